#include "esn/reservoir.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace esn {

void hyperparameters::validate() const
{
    auto all_finite = std::isfinite(sigma_res) && std::isfinite(mu_res) && std::isfinite(omega_in)
      && std::isfinite(omega_fb) && std::isfinite(sparsity) && std::isfinite(gamma)
      && std::isfinite(mu_b) && std::isfinite(epsilon);
    if (!all_finite) throw std::invalid_argument{"hyperparameters: non-finite field"};
    if (sigma_res < 0) throw std::invalid_argument{"hyperparameters: sigma_res < 0"};
    if (omega_in < 0) throw std::invalid_argument{"hyperparameters: omega_in < 0"};
    if (omega_fb < 0) throw std::invalid_argument{"hyperparameters: omega_fb < 0"};
    if (epsilon < 0) throw std::invalid_argument{"hyperparameters: epsilon < 0"};
    if (sparsity < 0 || sparsity > 1)
        throw std::invalid_argument{"hyperparameters: sparsity outside [0, 1]"};
}

std::string to_string(topology_kind kind)
{
    switch (kind) {
    case topology_kind::sparse: return "sparse";
    case topology_kind::permutation: return "permutation";
    case topology_kind::chain: return "chain";
    case topology_kind::ring: return "ring";
    }
    throw std::invalid_argument{"unknown topology kind"};
}

topology_kind topology_kind_from_string(const std::string& name)
{
    if (name == "sparse") return topology_kind::sparse;
    if (name == "permutation") return topology_kind::permutation;
    if (name == "chain") return topology_kind::chain;
    if (name == "ring") return topology_kind::ring;
    throw std::invalid_argument{"unknown topology kind `" + name + "`"};
}

namespace {

double draw_weight(prng& rng, double mu, double sigma)
{
    if (sigma <= 0) return mu;
    return std::normal_distribution<double>{mu, sigma}(rng);
}

bool draw_keep(prng& rng, double sparsity)
{
    return std::uniform_real_distribution<double>{0.0, 1.0}(rng) >= sparsity;
}

Eigen::MatrixXd build_reservoir_matrix(topology topo, const hyperparameters& hp, prng& rng)
{
    const int n = topo.neurons;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    switch (topo.kind) {
    case topology_kind::sparse:
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double value = draw_weight(rng, hp.mu_res, hp.sigma_res);
                if (draw_keep(rng, hp.sparsity)) w(i, j) = value;
            }
        break;
    case topology_kind::chain:
        for (int i = 0; i + 1 < n; ++i) {
            double value = draw_weight(rng, hp.mu_res, hp.sigma_res);
            if (draw_keep(rng, hp.sparsity)) w(i + 1, i) = value;
        }
        break;
    case topology_kind::ring:
    case topology_kind::permutation: {
        for (int i = 0; i + 1 < n; ++i) {
            double value = draw_weight(rng, hp.mu_res, hp.sigma_res);
            if (draw_keep(rng, hp.sparsity)) w(i + 1, i) = value;
        }
        double value = draw_weight(rng, hp.mu_res, hp.sigma_res);
        if (draw_keep(rng, hp.sparsity)) w(0, n - 1) = value;
        if (topo.kind == topology_kind::permutation) {
            // Fisher-Yates over row indices; implemented by hand so the
            // draw sequence is pinned to this code, not the stdlib.
            std::vector<int> order(n);
            std::iota(order.begin(), order.end(), 0);
            for (int i = n - 1; i > 0; --i) {
                int j = static_cast<int>(std::uniform_int_distribution<int>{0, i}(rng));
                std::swap(order[i], order[j]);
            }
            Eigen::MatrixXd shuffled(n, n);
            for (int i = 0; i < n; ++i) shuffled.row(i) = w.row(order[i]);
            w = std::move(shuffled);
        }
        break;
    }
    }
    return w;
}

Eigen::VectorXd draw_uniform_vector(prng& rng, int n, double half_range)
{
    Eigen::VectorXd v(n);
    std::uniform_real_distribution<double> dist{-half_range, half_range};
    for (int i = 0; i < n; ++i) v(i) = half_range > 0 ? dist(rng) : 0.0;
    return v;
}

}  // namespace

network::network(topology topo, const hyperparameters& hp, std::uint64_t seed)
  : topo_{topo}, hp_{hp}, seed_{seed}
{
    if (topo.neurons < 1) throw std::invalid_argument{"network: need at least one neuron"};
    hp.validate();
    prng weight_rng{derive_seed(seed, 0)};
    w_ = build_reservoir_matrix(topo, hp, weight_rng);
    w_in_ = draw_uniform_vector(weight_rng, topo.neurons, hp.omega_in);
    w_fb_ = draw_uniform_vector(weight_rng, topo.neurons, hp.omega_fb);
    state_ = Eigen::VectorXd::Zero(topo.neurons);
    noise_rng_.seed(derive_seed(seed, 1));
}

void network::reseed_noise(std::uint64_t seed)
{
    noise_rng_.seed(seed);
}

void network::reset_state()
{
    state_.setZero();
    diverged_ = false;
}

void network::set_readout(Eigen::VectorXd w_out)
{
    if (w_out.size() != state_.size())
        throw std::invalid_argument{"set_readout: size does not match neuron count"};
    w_out_ = std::move(w_out);
}

std::optional<double> network::step(double input, double feedback)
{
    Eigen::VectorXd z = w_ * state_;
    z += w_in_ * input + w_fb_ * feedback;
    z.array() += hp_.mu_b;
    Eigen::VectorXd activated = z.array().tanh();
    if (hp_.epsilon > 0) {
        std::normal_distribution<double> noise{1.0, hp_.epsilon};
        for (Eigen::Index i = 0; i < activated.size(); ++i) activated(i) *= noise(noise_rng_);
    }
    state_ = (1.0 - hp_.gamma) * state_ + activated;
    if (!state_.allFinite()) diverged_ = true;
    if (!w_out_) return std::nullopt;
    double out = state_.dot(*w_out_);
    if (!std::isfinite(out)) diverged_ = true;
    return out;
}

run_record network::run_teacher_forced(std::span<const double> input,
                                       std::span<const double> target, int washout)
{
    if (input.size() != target.size())
        throw std::invalid_argument{"run_teacher_forced: input/target length mismatch"};
    if (washout < 0 || input.size() < static_cast<std::size_t>(washout) + 1)
        throw std::invalid_argument{"run_teacher_forced: need washout + at least one step"};
    const auto steps = static_cast<Eigen::Index>(input.size());
    const Eigen::Index kept = steps - washout;
    run_record rec;
    rec.activations.resize(kept, neurons());
    if (w_out_) rec.outputs.resize(kept);
    for (Eigen::Index t = 0; t < steps; ++t) {
        double fb = t > 0 ? target[t - 1] : 0.0;
        auto out = step(input[t], fb);
        if (t >= washout) {
            rec.activations.row(t - washout) = state_.transpose();
            if (out) rec.outputs(t - washout) = *out;
        }
    }
    rec.diverged = diverged_;
    return rec;
}

run_record network::predict_free_running(std::span<const double> input)
{
    if (!w_out_) throw std::logic_error{"predict_free_running: readout not trained"};
    const auto steps = static_cast<Eigen::Index>(input.size());
    run_record rec;
    rec.activations.resize(steps, neurons());
    rec.outputs.resize(steps);
    double prev_out = state_.dot(*w_out_);
    for (Eigen::Index t = 0; t < steps; ++t) {
        auto out = step(input[t], prev_out);
        prev_out = *out;
        rec.activations.row(t) = state_.transpose();
        rec.outputs(t) = *out;
    }
    rec.diverged = diverged_;
    return rec;
}

Eigen::MatrixXd network::dump_activations(std::span<const double> input)
{
    const auto steps = static_cast<Eigen::Index>(input.size());
    Eigen::MatrixXd history(steps, neurons());
    for (Eigen::Index t = 0; t < steps; ++t) {
        step(input[t], 0.0);
        history.row(t) = state_.transpose();
    }
    return history;
}

Eigen::VectorXd fit_readout(const Eigen::MatrixXd& activations, const Eigen::VectorXd& targets)
{
    if (activations.rows() < 1) throw std::invalid_argument{"fit_readout: empty system"};
    if (activations.rows() != targets.size())
        throw std::invalid_argument{"fit_readout: row count does not match target length"};
    if (!activations.allFinite() || !targets.allFinite())
        throw std::invalid_argument{"fit_readout: non-finite input"};
    return activations.completeOrthogonalDecomposition().solve(targets);
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr)
{
    Eigen::VectorXd v(arr.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr.at(i).get<double>();
    return v;
}

}  // namespace

nlohmann::json network::to_json() const
{
    nlohmann::json doc;
    doc["topology"] = {{"kind", to_string(topo_.kind)}, {"neurons", topo_.neurons}};
    doc["hyperparameters"] = {
      {"sigma_res", hp_.sigma_res}, {"mu_res", hp_.mu_res},   {"omega_in", hp_.omega_in},
      {"omega_fb", hp_.omega_fb},   {"sparsity", hp_.sparsity}, {"gamma", hp_.gamma},
      {"mu_b", hp_.mu_b},           {"epsilon", hp_.epsilon}};
    doc["seed"] = seed_;
    const int n = neurons();
    std::vector<double> flat(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) flat[static_cast<std::size_t>(i) * n + j] = w_(i, j);
    doc["w"] = flat;
    doc["w_in"] = to_vector(w_in_);
    doc["w_fb"] = to_vector(w_fb_);
    doc["w_out"] = w_out_ ? nlohmann::json(to_vector(*w_out_)) : nlohmann::json(nullptr);
    doc["state"] = to_vector(state_);
    doc["diverged"] = diverged_;
    std::ostringstream noise_state;
    noise_state << noise_rng_;
    doc["noise_rng"] = noise_state.str();
    return doc;
}

network network::from_json(const nlohmann::json& doc)
{
    network net;
    const auto& topo = doc.at("topology");
    net.topo_ = {topology_kind_from_string(topo.at("kind").get<std::string>()),
                 topo.at("neurons").get<int>()};
    if (net.topo_.neurons < 1) throw std::invalid_argument{"network document: bad neuron count"};
    const auto& hp = doc.at("hyperparameters");
    net.hp_ = {hp.at("sigma_res").get<double>(), hp.at("mu_res").get<double>(),
               hp.at("omega_in").get<double>(),  hp.at("omega_fb").get<double>(),
               hp.at("sparsity").get<double>(),  hp.at("gamma").get<double>(),
               hp.at("mu_b").get<double>(),      hp.at("epsilon").get<double>()};
    net.seed_ = doc.at("seed").get<std::uint64_t>();
    const int n = net.topo_.neurons;
    const auto& flat = doc.at("w");
    if (flat.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument{"network document: reservoir size mismatch"};
    net.w_.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            net.w_(i, j) = flat.at(static_cast<std::size_t>(i) * n + j).get<double>();
    net.w_in_ = vector_from_json(doc.at("w_in"));
    net.w_fb_ = vector_from_json(doc.at("w_fb"));
    if (net.w_in_.size() != n || net.w_fb_.size() != n)
        throw std::invalid_argument{"network document: weight vector size mismatch"};
    if (!doc.at("w_out").is_null()) {
        net.w_out_ = vector_from_json(doc.at("w_out"));
        if (net.w_out_->size() != n)
            throw std::invalid_argument{"network document: readout size mismatch"};
    }
    net.state_ = vector_from_json(doc.at("state"));
    if (net.state_.size() != n)
        throw std::invalid_argument{"network document: state size mismatch"};
    net.diverged_ = doc.at("diverged").get<bool>();
    std::istringstream noise_state{doc.at("noise_rng").get<std::string>()};
    noise_state >> net.noise_rng_;
    if (!noise_state) throw std::invalid_argument{"network document: bad noise rng state"};
    return net;
}

}  // namespace esn
