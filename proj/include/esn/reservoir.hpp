#pragma once

// Echo state network construction, simulation and readout training.

#include "esn/rng.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

namespace esn {

/// The eight tunable hyperparameters in natural (decoded) units.
struct hyperparameters {
    double sigma_res = 0;  ///< std-dev of the reservoir weight distribution, >= 0
    double mu_res = 0;     ///< mean of the reservoir weight distribution
    double omega_in = 0;   ///< input weight half-range, >= 0
    double omega_fb = 0;   ///< feedback weight half-range, >= 0
    double sparsity = 0;   ///< per-edge drop probability, in [0, 1]
    double gamma = 1;      ///< leakage
    double mu_b = 0;       ///< constant bias added to every raw potential
    double epsilon = 0;    ///< std-dev of the multiplicative internal noise, >= 0

    /// Throws std::invalid_argument when a field is outside its domain.
    void validate() const;

    bool operator==(const hyperparameters&) const = default;
};

enum class topology_kind { sparse, permutation, chain, ring };

std::string to_string(topology_kind kind);
topology_kind topology_kind_from_string(const std::string& name);

struct topology {
    topology_kind kind = topology_kind::sparse;
    int neurons = 0;
};

/// Activation history of a driven network.
struct run_record {
    Eigen::MatrixXd activations;  ///< one row per driven step
    Eigen::VectorXd outputs;      ///< per-step readout output; empty when untrained
    bool diverged = false;        ///< a non-finite activation or output appeared
};

/// Solve argmin_w ||A w - y|| in the Euclidean norm.
///
/// Uses a rank-revealing orthogonal decomposition, so the minimum-norm
/// solution is returned when A is rank deficient. Non-finite entries in
/// A or y are rejected.
Eigen::VectorXd fit_readout(const Eigen::MatrixXd& activations, const Eigen::VectorXd& targets);

/// An echo state network instance: frozen random weights plus mutable
/// activation state. Instances are single-threaded but independent, so
/// separate instances may run on separate threads.
class network {
public:
    /// Generate a network for the given topology. The same
    /// (topology, hyperparameters, seed) triple yields a bit-identical
    /// network including its internal noise stream.
    network(topology topo, const hyperparameters& hp, std::uint64_t seed);

    /// Advance the state by one step and return the readout output
    /// (nullopt while the readout is untrained). Sets the divergence
    /// flag instead of throwing when the state leaves the finite range.
    std::optional<double> step(double input, double feedback);

    /// Drive the network with feedback taken from the desired output
    /// sequence delayed by one step (teacher forcing). The first
    /// `washout` activation rows are discarded from the returned record.
    run_record run_teacher_forced(std::span<const double> input, std::span<const double> target,
                                  int washout);

    /// Drive the network feeding its own previous output back through
    /// the feedback connections. Requires a trained readout; the state
    /// is carried over from whatever run preceded.
    run_record predict_free_running(std::span<const double> input);

    /// Drive with zero feedback and return the full activation history,
    /// one row per step.
    Eigen::MatrixXd dump_activations(std::span<const double> input);

    void set_readout(Eigen::VectorXd w_out);
    const std::optional<Eigen::VectorXd>& readout() const { return w_out_; }

    /// Reseed the internal noise stream (`epsilon` noise) independently
    /// of the frozen weights.
    void reseed_noise(std::uint64_t seed);

    void reset_state();

    int neurons() const { return static_cast<int>(state_.size()); }
    topology topo() const { return topo_; }
    const hyperparameters& params() const { return hp_; }
    const Eigen::MatrixXd& reservoir() const { return w_; }
    const Eigen::VectorXd& input_weights() const { return w_in_; }
    const Eigen::VectorXd& feedback_weights() const { return w_fb_; }
    const Eigen::VectorXd& state() const { return state_; }
    bool diverged() const { return diverged_; }
    std::uint64_t seed() const { return seed_; }

    /// Bit-exact structured serialization (weights, state, seeds and the
    /// position of the noise stream).
    nlohmann::json to_json() const;
    static network from_json(const nlohmann::json& doc);

private:
    network() = default;

    topology topo_;
    hyperparameters hp_;
    std::uint64_t seed_ = 0;
    Eigen::MatrixXd w_;
    Eigen::VectorXd w_in_;
    Eigen::VectorXd w_fb_;
    std::optional<Eigen::VectorXd> w_out_;
    Eigen::VectorXd state_;
    bool diverged_ = false;
    prng noise_rng_;
};

}  // namespace esn
