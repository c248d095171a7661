#include "esn/harness.hpp"

#include "esn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace esn {

task_spec task_spec_from_name(const std::string& name)
{
    if (name == "narma10") return {"narma10", 0};
    if (name == "mg17") return {"mg17", 17};
    if (name == "mg30") return {"mg30", 30};
    if (name.rfind("mg", 0) == 0) {
        int tau = std::stoi(name.substr(2));
        if (tau < 1) throw std::invalid_argument{"task: bad Mackey-Glass delay"};
        return {name, tau};
    }
    throw std::invalid_argument{"unknown task `" + name + "` (expected narma10, mg17 or mg30)"};
}

void experiment_config::validate() const
{
    if (topo.neurons < 1) throw std::invalid_argument{"config: neurons must be at least 1"};
    if (washout < 1 || train < 1 || test < 1)
        throw std::invalid_argument{"config: washout/train/test lengths must be at least 1"};
    if (trials < 1) throw std::invalid_argument{"config: trials must be at least 1"};
    if (evaluations < 1) throw std::invalid_argument{"config: evaluations must be at least 1"};
    if (re_evaluations < 1) throw std::invalid_argument{"config: re_evaluations must be at least 1"};
    if (jobs < 1) throw std::invalid_argument{"config: jobs must be at least 1"};
    task_spec_from_name(task.name);
}

nlohmann::json experiment_config::to_json() const
{
    nlohmann::json doc;
    doc["task"] = task.name;
    doc["topology"] = {{"kind", to_string(topo.kind)}, {"neurons", topo.neurons}};
    doc["washout"] = washout;
    doc["train"] = train;
    doc["test"] = test;
    doc["trials"] = trials;
    doc["evaluations"] = evaluations;
    doc["re_evaluations"] = re_evaluations;
    doc["feedback"] = feedback;
    doc["seed"] = master_seed;
    doc["jobs"] = jobs;
    doc["search_space"] = specs_to_json(specs);
    return doc;
}

experiment_config experiment_config::from_json(const nlohmann::json& doc)
{
    experiment_config cfg;
    cfg.task = task_spec_from_name(doc.at("task").get<std::string>());
    if (doc.contains("topology")) {
        const auto& topo = doc.at("topology");
        cfg.topo = {topology_kind_from_string(topo.at("kind").get<std::string>()),
                    topo.at("neurons").get<int>()};
    }
    cfg.washout = doc.value("washout", cfg.washout);
    cfg.train = doc.value("train", cfg.train);
    cfg.test = doc.value("test", cfg.test);
    cfg.trials = doc.value("trials", cfg.trials);
    cfg.evaluations = doc.value("evaluations", cfg.evaluations);
    cfg.re_evaluations = doc.value("re_evaluations", cfg.re_evaluations);
    // Feedback helps autoregressive tasks; for the one-step-ahead MG tasks
    // the input already carries the previous target value.
    cfg.feedback = doc.value("feedback", cfg.task.name == "narma10");
    cfg.master_seed = doc.value("seed", cfg.master_seed);
    cfg.jobs = doc.value("jobs", cfg.jobs);
    if (doc.contains("search_space")) cfg.specs = specs_from_json(doc.at("search_space"));
    cfg.validate();
    return cfg;
}

task make_task(const task_spec& spec, int length, std::uint64_t seed)
{
    if (spec.name == "narma10") return gen_narma10(length, seed);
    return gen_mackey_glass(spec.tau, length, seed);
}

namespace {

// Seed stream tags so distinct purposes cannot collide.
enum stream : std::uint64_t {
    stream_data = 1,
    stream_network = 2,
    stream_trial = 3,
    stream_optimizer = 4,
    stream_candidate = 5,
    stream_re_eval = 6,
    stream_scan = 7,
};

double sample_mean(std::span<const double> xs)
{
    double acc = 0;
    for (double v : xs) acc += v;
    return acc / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs, double mean)
{
    if (xs.size() < 2) return 0;
    double acc = 0;
    for (double v : xs) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn)
{
    if (count == 0) return;
    const int workers = static_cast<int>(std::min<std::size_t>(std::max(jobs, 1), count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock{error_mutex};
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

metric_set evaluate_metrics(const hyperparameters& hp, const experiment_config& cfg,
                            std::uint64_t eval_seed)
{
    hyperparameters effective = hp;
    if (!cfg.feedback) effective.omega_fb = 0;  // severs the feedback path entirely

    const int total = cfg.washout + cfg.train + cfg.test;
    task data = make_task(cfg.task, total, derive_seed(eval_seed, stream_data));
    network net{cfg.topo, effective, derive_seed(eval_seed, stream_network)};

    metric_set res;
    res.diverged = true;
    const int fit_len = cfg.washout + cfg.train;
    std::span<const double> u{data.input};
    std::span<const double> y{data.target};
    run_record train_rec = net.run_teacher_forced(u.subspan(0, fit_len),
                                                  y.subspan(0, fit_len), cfg.washout);
    if (train_rec.diverged || !train_rec.activations.allFinite()) return res;
    Eigen::VectorXd targets =
      Eigen::Map<const Eigen::VectorXd>(data.target.data() + cfg.washout, cfg.train);
    net.set_readout(fit_readout(train_rec.activations, targets));

    run_record test_rec = net.predict_free_running(u.subspan(fit_len, cfg.test));
    if (test_rec.diverged || !test_rec.outputs.allFinite()) return res;
    std::span<const double> predicted{test_rec.outputs.data(),
                                      static_cast<std::size_t>(test_rec.outputs.size())};
    auto target = y.subspan(fit_len, cfg.test);
    double err = mse(target, predicted);
    if (!std::isfinite(err)) return res;
    res.mse = err;
    res.diverged = false;
    try {
        res.nmse = nmse(target, predicted);
        res.nrmse = std::sqrt(res.nmse);
    } catch (const std::invalid_argument&) {
        // constant target window; NMSE undefined, MSE still reported
    }
    if (data.transform) {
        std::vector<double> y_raw(cfg.test), x_raw(cfg.test);
        for (int i = 0; i < cfg.test; ++i) {
            // atanh blows up at +-1; the clamp keeps the back-transform total
            double clamped = std::clamp(predicted[i], -1.0 + 1e-12, 1.0 - 1e-12);
            x_raw[i] = data.transform->inverse(clamped);
            y_raw[i] = data.transform->inverse(y[fit_len + i]);
        }
        double original = mse(y_raw, x_raw);
        if (std::isfinite(original)) res.mse_original = original;
    }
    return res;
}

eval_result evaluate_hyperparameters(const hyperparameters& hp, const experiment_config& cfg,
                                     std::uint64_t eval_seed)
{
    metric_set metrics = evaluate_metrics(hp, cfg, eval_seed);
    eval_result res;
    res.diverged = metrics.diverged;
    res.mse_original = metrics.mse_original;
    res.fitness = metrics.diverged ? penalty_fitness : metrics.mse;
    return res;
}

eval_result evaluate_point(const Eigen::VectorXd& point, const experiment_config& cfg,
                           std::uint64_t eval_seed)
{
    return evaluate_hyperparameters(decode(point, cfg.specs), cfg, eval_seed);
}

double fitness(const Eigen::VectorXd& point, const experiment_config& cfg,
               std::uint64_t eval_seed)
{
    return evaluate_point(point, cfg, eval_seed).fitness;
}

network rebuild_trained_network(const hyperparameters& hp, const experiment_config& cfg,
                                std::uint64_t eval_seed)
{
    hyperparameters effective = hp;
    if (!cfg.feedback) effective.omega_fb = 0;
    const int total = cfg.washout + cfg.train + cfg.test;
    task data = make_task(cfg.task, total, derive_seed(eval_seed, stream_data));
    network net{cfg.topo, effective, derive_seed(eval_seed, stream_network)};
    const int fit_len = cfg.washout + cfg.train;
    std::span<const double> u{data.input};
    std::span<const double> y{data.target};
    run_record rec = net.run_teacher_forced(u.subspan(0, fit_len), y.subspan(0, fit_len),
                                            cfg.washout);
    Eigen::VectorXd targets =
      Eigen::Map<const Eigen::VectorXd>(data.target.data() + cfg.washout, cfg.train);
    net.set_readout(fit_readout(rec.activations, targets));
    return net;
}

namespace {

std::vector<double> evaluate_batch(const std::vector<Eigen::VectorXd>& points,
                                   const experiment_config& cfg,
                                   const std::vector<std::uint64_t>& seeds)
{
    std::vector<double> fitnesses(points.size(), penalty_fitness);
    parallel_for(cfg.jobs, points.size(), [&](std::size_t i) {
        double f = fitness(points[i], cfg, seeds[i]);
        fitnesses[i] = std::isfinite(f) ? f : penalty_fitness;
    });
    return fitnesses;
}

}  // namespace

trial_result run_trial(const experiment_config& cfg, int trial_index)
{
    cfg.validate();
    const std::uint64_t trial_seed = derive_seed(cfg.master_seed, {stream_trial,
                                                 static_cast<std::uint64_t>(trial_index)});

    optimizer_config opt_cfg;
    opt_cfg.dimension = search_dimension;
    opt_cfg.initial_mean = initial_point(cfg.topo, cfg.specs);
    opt_cfg.initial_step_sizes = Eigen::VectorXd::Constant(search_dimension, 0.05);
    for (int i = 0; i < search_dimension; ++i)
        if (cfg.specs[i].name == "sigma_res" || cfg.specs[i].name == "omega_fb")
            opt_cfg.initial_step_sizes(i) = 0.01;
    opt_cfg.max_evaluations = cfg.evaluations;
    opt_cfg.seed = derive_seed(trial_seed, stream_optimizer);
    cmaes opt{opt_cfg};

    trial_result result;
    result.trial = trial_index;
    result.trial_seed = trial_seed;
    result.evaluations_used = 0;

    while (!opt.terminated()) {
        auto candidates = opt.ask();
        std::vector<std::uint64_t> seeds(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i)
            seeds[i] = derive_seed(trial_seed, {stream_candidate,
                                   static_cast<std::uint64_t>(opt.generation()), i});
        auto fitnesses = evaluate_batch(candidates, cfg, seeds);
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (fitnesses[i] < result.best_fitness_seen) {
                result.best_fitness_seen = fitnesses[i];
                result.best_encoded = candidates[i];
                result.best_eval_seed = seeds[i];
            }
        opt.tell(candidates, fitnesses);
        result.trace.push_back({opt.generation(), opt.evaluations_used(),
                                opt.last_best_fitness(), opt.last_mean_fitness(),
                                opt.step_size(), opt.axis_ratio()});
    }
    result.evaluations_used = opt.evaluations_used();
    if (result.best_encoded.size() == 0) {
        // every single evaluation hit the penalty; report the optimizer's pick
        result.best_encoded = opt.recommend().first;
        result.best_eval_seed = derive_seed(trial_seed, {stream_candidate, 0, 0});
    }
    result.best_hp = decode(result.best_encoded, cfg.specs);

    result.re_eval_mse.resize(cfg.re_evaluations);
    std::vector<std::optional<double>> original(cfg.re_evaluations);
    parallel_for(cfg.jobs, static_cast<std::size_t>(cfg.re_evaluations), [&](std::size_t r) {
        auto res = evaluate_point(result.best_encoded, cfg,
                                  derive_seed(trial_seed, {stream_re_eval, r}));
        result.re_eval_mse[r] = res.fitness;
        original[r] = res.mse_original;
    });
    if (std::all_of(original.begin(), original.end(), [](const auto& o) { return o.has_value(); }))
        for (const auto& o : original) result.re_eval_mse_original.push_back(*o);
    result.mean_mse = sample_mean(result.re_eval_mse);
    result.std_mse = sample_std(result.re_eval_mse, result.mean_mse);
    return result;
}

nlohmann::json trial_result::to_json(const experiment_config& cfg) const
{
    nlohmann::json doc;
    doc["trial"] = trial;
    doc["trial_seed"] = trial_seed;
    doc["topology"] = to_string(cfg.topo.kind);
    doc["neurons"] = cfg.topo.neurons;
    doc["task"] = cfg.task.name;
    doc["feedback"] = cfg.feedback;
    doc["best_fitness_seen"] = best_fitness_seen;
    doc["best_eval_seed"] = best_eval_seed;
    std::vector<double> encoded(best_encoded.data(), best_encoded.data() + best_encoded.size());
    doc["best_encoded"] = encoded;
    doc["best_hyperparameters"] = {
      {"sigma_res", best_hp.sigma_res}, {"mu_res", best_hp.mu_res},
      {"omega_in", best_hp.omega_in},   {"omega_fb", best_hp.omega_fb},
      {"sparsity", best_hp.sparsity},   {"gamma", best_hp.gamma},
      {"mu_b", best_hp.mu_b},           {"epsilon", best_hp.epsilon}};
    doc["re_eval_mse"] = re_eval_mse;
    if (!re_eval_mse_original.empty()) {
        doc["re_eval_mse_original"] = re_eval_mse_original;
        double mean_original = sample_mean(re_eval_mse_original);
        doc["mean_mse_original"] = mean_original;
        doc["std_mse_original"] = sample_std(re_eval_mse_original, mean_original);
    }
    doc["mean_mse"] = mean_mse;
    doc["std_mse"] = std_mse;
    doc["evaluations_used"] = evaluations_used;
    return doc;
}

experiment_report run_experiment(const experiment_config& cfg)
{
    cfg.validate();
    experiment_report report;
    report.trials.reserve(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t) report.trials.push_back(run_trial(cfg, t));
    report.best_trial = 0;
    for (int t = 1; t < cfg.trials; ++t)
        if (report.trials[t].mean_mse < report.trials[report.best_trial].mean_mse)
            report.best_trial = t;
    return report;
}

Eigen::MatrixXd p_value_matrix(std::span<const std::vector<double>> samples)
{
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Ones(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double value = welch_t_test(samples[i], samples[j]).p;
            p(i, j) = value;
            p(j, i) = value;
        }
    return p;
}

comparison_report run_comparison(const experiment_config& cfg,
                                 std::span<const topology> topologies)
{
    if (topologies.empty()) throw std::invalid_argument{"comparison: no topologies given"};
    comparison_report report;
    std::vector<std::vector<double>> samples;
    for (const auto& topo : topologies) {
        experiment_config local = cfg;
        local.topo = topo;
        report.topologies.push_back(topo);
        report.reports.push_back(run_experiment(local));
        samples.push_back(report.reports.back().reported().re_eval_mse);
    }
    report.p_values = p_value_matrix(samples);
    return report;
}

namespace {

hyperparameters substitute(const hyperparameters& base, const std::string& param, double value)
{
    hyperparameters hp = base;
    double* field = nullptr;
    if (param == "sigma_res") field = &hp.sigma_res;
    else if (param == "mu_res") field = &hp.mu_res;
    else if (param == "omega_in") field = &hp.omega_in;
    else if (param == "omega_fb") field = &hp.omega_fb;
    else if (param == "sparsity") field = &hp.sparsity;
    else if (param == "gamma") field = &hp.gamma;
    else if (param == "mu_b") field = &hp.mu_b;
    else if (param == "epsilon") field = &hp.epsilon;
    else
        throw std::invalid_argument{
          "unknown parameter `" + param
          + "` (expected one of sigma_res, mu_res, omega_in, omega_fb, sparsity, gamma, "
            "mu_b, epsilon)"};
    *field = value;
    // clamp substituted values back into the parameter's domain
    hp.sigma_res = std::max(hp.sigma_res, 0.0);
    hp.omega_in = std::max(hp.omega_in, 0.0);
    hp.omega_fb = std::max(hp.omega_fb, 0.0);
    hp.epsilon = std::max(hp.epsilon, 0.0);
    hp.sparsity = std::clamp(hp.sparsity, 0.0, 1.0);
    return hp;
}

std::vector<scan_row> scan_impl(const std::vector<hyperparameters>& variants,
                                const std::vector<double>& labels,
                                const std::vector<experiment_config>& cfgs, int repeats)
{
    std::vector<scan_row> rows(variants.size() * static_cast<std::size_t>(repeats));
    const int jobs = cfgs.front().jobs;
    parallel_for(jobs, rows.size(), [&](std::size_t i) {
        const std::size_t v = i / static_cast<std::size_t>(repeats);
        const int r = static_cast<int>(i % static_cast<std::size_t>(repeats));
        const experiment_config& cfg = cfgs[v];
        std::uint64_t seed = derive_seed(cfg.master_seed, {stream_scan,
                                         static_cast<std::uint64_t>(r)});
        auto res = evaluate_hyperparameters(variants[v], cfg, seed);
        rows[i] = {labels[v], r, res.fitness};
    });
    return rows;
}

}  // namespace

std::vector<scan_row> scan_parameter(const hyperparameters& base, const std::string& param,
                                     std::span<const double> grid, const experiment_config& cfg,
                                     int repeats)
{
    cfg.validate();
    if (repeats < 1) throw std::invalid_argument{"scan: repeats must be at least 1"};
    std::vector<hyperparameters> variants;
    std::vector<double> labels;
    std::vector<experiment_config> cfgs;
    for (double value : grid) {
        variants.push_back(substitute(base, param, value));
        labels.push_back(value);
        cfgs.push_back(cfg);
    }
    if (variants.empty()) return {};
    return scan_impl(variants, labels, cfgs, repeats);
}

std::vector<scan_row> scan_lengths(const hyperparameters& base, length_kind which,
                                   std::span<const int> grid, const experiment_config& cfg,
                                   int repeats)
{
    cfg.validate();
    if (repeats < 1) throw std::invalid_argument{"scan: repeats must be at least 1"};
    std::vector<hyperparameters> variants;
    std::vector<double> labels;
    std::vector<experiment_config> cfgs;
    for (int value : grid) {
        experiment_config local = cfg;
        if (which == length_kind::washout) {
            // washout 0 is allowed here even though tuning configs require >= 1
            if (value < 0) throw std::invalid_argument{"scan: washout must be nonnegative"};
            local.washout = value;
        } else {
            if (value < 1) throw std::invalid_argument{"scan: train length must be positive"};
            local.train = value;
        }
        variants.push_back(base);
        labels.push_back(static_cast<double>(value));
        cfgs.push_back(local);
    }
    if (variants.empty()) return {};
    return scan_impl(variants, labels, cfgs, repeats);
}

void write_trace_csv(const std::vector<trace_row>& rows, std::ostream& out)
{
    out << "generation,evaluations,best_fitness,mean_fitness,step_size,axis_ratio\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.generation << "," << r.evaluations << "," << r.best_fitness << ","
            << r.mean_fitness << "," << r.step_size << "," << r.axis_ratio << "\n";
}

void write_scan_csv(const std::vector<scan_row>& rows, const std::string& label,
                    std::ostream& out)
{
    out << "# scan=" << label << "\n";
    out << "value,repeat,mse\n";
    out.precision(17);
    for (const auto& r : rows) out << r.value << "," << r.repeat << "," << r.mse << "\n";
}

}  // namespace esn
