#include "esn/benchmarks.hpp"

#include "esn/rng.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace esn {

output_transform mackey_glass_transform()
{
    return {"tanh_shift", [](double v) { return std::tanh(v - 1.0); },
            [](double v) { return std::atanh(v) + 1.0; }};
}

task gen_narma10(int length, std::uint64_t seed, int max_attempts)
{
    if (length < 11) throw std::invalid_argument{"gen_narma10: length must be at least 11"};
    if (max_attempts < 1) throw std::invalid_argument{"gen_narma10: max_attempts must be positive"};
    prng rng{seed};
    std::uniform_real_distribution<double> input_dist{0.0, 0.5};
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<double> u(length);
        for (double& v : u) v = input_dist(rng);
        std::vector<double> y(length, 0.0);
        bool bounded = true;
        for (int t = 0; t + 1 < length; ++t) {
            double window = 0;
            for (int i = 0; i <= 9; ++i)
                if (t - i >= 0) window += y[t - i];
            double u_lag = t - 10 >= 0 ? u[t - 10] : 0.0;
            y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * u_lag * u[t] + 0.1;
            if (std::abs(y[t + 1]) > 1.0) {
                bounded = false;
                break;
            }
        }
        if (!bounded) continue;
        task t;
        t.name = "narma10";
        t.input = std::move(u);
        t.target = std::move(y);
        t.seed = seed;
        return t;
    }
    throw std::runtime_error{"gen_narma10: sequence kept diverging, giving up after "
                             + std::to_string(max_attempts) + " attempts"};
}

double mg_euler_step(double current, double delayed, double dt)
{
    return current + dt * (0.2 * delayed / (1.0 + std::pow(delayed, 10)) - 0.1 * current);
}

task gen_mackey_glass(int tau, int length, std::uint64_t seed, double initial_history)
{
    if (tau < 1) throw std::invalid_argument{"gen_mackey_glass: tau must be positive"};
    if (length < 2) throw std::invalid_argument{"gen_mackey_glass: length must be at least 2"};
    constexpr double dt = 0.1;
    constexpr int subsample = 10;
    constexpr int transient = 1000;  // subsampled points discarded unconditionally
    const int delay = static_cast<int>(std::lround(static_cast<double>(tau) / dt));
    // The seed picks a window start further along the attractor so that
    // repeated generations produce fresh realizations.
    const int window_offset = static_cast<int>(splitmix64(seed) % 1024);
    const int wanted = transient + window_offset + length + 1;
    const std::size_t raw_len = static_cast<std::size_t>(delay) + 1
      + static_cast<std::size_t>(wanted) * subsample;
    std::vector<double> raw(raw_len);
    std::fill(raw.begin(), raw.begin() + delay + 1, initial_history);
    for (std::size_t t = delay; t + 1 < raw_len; ++t)
        raw[t + 1] = mg_euler_step(raw[t], raw[t - delay], dt);
    std::vector<double> sub(wanted);
    for (int j = 0; j < wanted; ++j) sub[j] = raw[delay + static_cast<std::size_t>(j) * subsample];
    auto transform = mackey_glass_transform();
    task t;
    t.name = "mg" + std::to_string(tau);
    t.tau = tau;
    t.seed = seed;
    t.input.resize(length);
    t.target.resize(length);
    const int start = transient + window_offset;
    for (int j = 0; j < length; ++j) {
        t.input[j] = transform.forward(sub[start + j]);
        t.target[j] = transform.forward(sub[start + j + 1]);
    }
    t.transform = std::move(transform);
    return t;
}

double mse(std::span<const double> target, std::span<const double> predicted)
{
    if (target.size() != predicted.size()) throw std::invalid_argument{"mse: length mismatch"};
    if (target.empty()) throw std::invalid_argument{"mse: empty sequences"};
    double acc = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        double d = target[i] - predicted[i];
        acc += d * d;
    }
    return acc / static_cast<double>(target.size());
}

double nmse(std::span<const double> target, std::span<const double> predicted)
{
    if (target.size() != predicted.size()) throw std::invalid_argument{"nmse: length mismatch"};
    if (target.size() < 2) throw std::invalid_argument{"nmse: need at least two samples"};
    const auto n = static_cast<double>(target.size());
    double mean = 0;
    for (double v : target) mean += v;
    mean /= n;
    double variance = 0;  // population variance, divisor N
    for (double v : target) variance += (v - mean) * (v - mean);
    variance /= n;
    if (variance == 0) throw std::invalid_argument{"nmse: constant target sequence"};
    double acc = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        double d = target[i] - predicted[i];
        acc += d * d;
    }
    return acc / (n * variance);
}

double nrmse(std::span<const double> target, std::span<const double> predicted)
{
    return std::sqrt(nmse(target, predicted));
}

namespace {

std::pair<double, double> mean_and_sample_variance(std::span<const double> xs)
{
    const auto n = static_cast<double>(xs.size());
    double mean = 0;
    for (double v : xs) mean += v;
    mean /= n;
    double var = 0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    return {mean, var};
}

}  // namespace

welch_result welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b)
{
    if (sample_a.size() < 2 || sample_b.size() < 2)
        throw std::invalid_argument{"welch_t_test: each sample needs at least two values"};
    auto [mean_a, var_a] = mean_and_sample_variance(sample_a);
    auto [mean_b, var_b] = mean_and_sample_variance(sample_b);
    if (var_a == 0 && var_b == 0)
        throw std::invalid_argument{"welch_t_test: both samples are degenerate"};
    const auto na = static_cast<double>(sample_a.size());
    const auto nb = static_cast<double>(sample_b.size());
    const double se_a = var_a / na;
    const double se_b = var_b / nb;
    welch_result res;
    res.t = (mean_a - mean_b) / std::sqrt(se_a + se_b);
    double df_num = (se_a + se_b) * (se_a + se_b);
    double df_den = se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0);
    res.df = df_num / df_den;
    boost::math::students_t dist{res.df};
    res.p = 2.0 * boost::math::cdf(dist, -std::abs(res.t));
    return res;
}

void task_to_csv(const task& t, std::ostream& out)
{
    out << "# name=" << t.name << "\n";
    if (t.tau > 0) out << "# tau=" << t.tau << "\n";
    out << "# seed=" << t.seed << "\n";
    if (t.transform) out << "# transform=" << t.transform->name << "\n";
    out << "u,y\n";
    out.precision(17);
    for (std::size_t i = 0; i < t.input.size(); ++i)
        out << t.input[i] << "," << t.target[i] << "\n";
}

task task_from_csv(std::istream& in)
{
    task t;
    std::string line;
    bool saw_header = false;
    bool want_transform = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            std::string value = line.substr(eq + 1);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            if (key == "name") t.name = value;
            else if (key == "tau") t.tau = std::stoi(value);
            else if (key == "seed") t.seed = std::stoull(value);
            else if (key == "transform") want_transform = value == "tanh_shift";
            continue;
        }
        if (!saw_header) {  // the u,y column header
            saw_header = true;
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument{"task csv: malformed row"};
        t.input.push_back(std::stod(line.substr(0, comma)));
        t.target.push_back(std::stod(line.substr(comma + 1)));
    }
    if (!saw_header || t.input.empty()) throw std::invalid_argument{"task csv: no data rows"};
    if (want_transform) t.transform = mackey_glass_transform();
    return t;
}

}  // namespace esn
