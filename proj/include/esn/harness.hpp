#pragma once

// Fitness definition and the full tuning protocol: CMA-ES trials,
// re-evaluation of the best network, topology comparisons and the
// sensitivity scans.

#include "esn/benchmarks.hpp"
#include "esn/cmaes.hpp"
#include "esn/reservoir.hpp"
#include "esn/search_space.hpp"

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace esn {

/// Fitness assigned to diverged or otherwise non-finite evaluations. Far
/// above any sane MSE on these bounded tasks but finite, so ranking stays
/// meaningful for the optimizer.
inline constexpr double penalty_fitness = 1e6;

struct task_spec {
    std::string name;  ///< narma10, mg17 or mg30
    int tau = 0;       ///< delay for Mackey-Glass tasks
};

task_spec task_spec_from_name(const std::string& name);

struct experiment_config {
    topology topo{topology_kind::sparse, 500};
    task_spec task{"narma10", 0};
    int washout = 1000;
    int train = 5000;
    int test = 5000;
    int trials = 10;
    long evaluations = 5000;
    int re_evaluations = 100;
    bool feedback = true;
    std::uint64_t master_seed = 1;
    int jobs = 1;
    std::array<param_spec, search_dimension> specs = default_specs();

    void validate() const;
    nlohmann::json to_json() const;
    /// Parses and validates; when `feedback` is absent it defaults to on
    /// for NARMA10 and off for the Mackey-Glass tasks.
    static experiment_config from_json(const nlohmann::json& doc);
};

/// Generate the benchmark data an evaluation runs on.
task make_task(const task_spec& spec, int length, std::uint64_t seed);

struct eval_result {
    double fitness = penalty_fitness;  ///< test MSE in the network's operating range
    std::optional<double> mse_original;  ///< back-transformed MSE for MG tasks
    bool diverged = false;
};

struct metric_set {
    double mse = penalty_fitness;
    double nmse = std::numeric_limits<double>::quiet_NaN();
    double nrmse = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> mse_original;
    bool diverged = false;
};

/// Train-and-test protocol at fixed hyperparameters: fresh data and a
/// fresh reservoir from `eval_seed`, teacher-forced drive over
/// washout+train, least-squares readout, free-running test. Divergence
/// and non-finite errors map to the penalty fitness.
eval_result evaluate_hyperparameters(const hyperparameters& hp, const experiment_config& cfg,
                                     std::uint64_t eval_seed);

/// Same protocol, reporting NMSE/NRMSE alongside the MSE.
metric_set evaluate_metrics(const hyperparameters& hp, const experiment_config& cfg,
                            std::uint64_t eval_seed);

eval_result evaluate_point(const Eigen::VectorXd& point, const experiment_config& cfg,
                           std::uint64_t eval_seed);

double fitness(const Eigen::VectorXd& point, const experiment_config& cfg,
               std::uint64_t eval_seed);

/// Rebuild the concrete network behind an evaluation (same seeds, same
/// data) with its trained readout, e.g. for serialization.
network rebuild_trained_network(const hyperparameters& hp, const experiment_config& cfg,
                                std::uint64_t eval_seed);

struct trace_row {
    int generation = 0;
    long evaluations = 0;
    double best_fitness = 0;  ///< best of the generation
    double mean_fitness = 0;
    double step_size = 0;
    double axis_ratio = 0;
};

struct trial_result {
    int trial = 0;
    std::uint64_t trial_seed = 0;
    Eigen::VectorXd best_encoded;
    hyperparameters best_hp;
    double best_fitness_seen = penalty_fitness;
    std::uint64_t best_eval_seed = 0;
    std::vector<double> re_eval_mse;
    std::vector<double> re_eval_mse_original;  ///< empty unless MG
    double mean_mse = 0;
    double std_mse = 0;
    long evaluations_used = 0;
    std::vector<trace_row> trace;

    nlohmann::json to_json(const experiment_config& cfg) const;
};

/// One CMA-ES run over the evaluation budget followed by re-evaluations
/// of the best encountered point on fresh seeds.
trial_result run_trial(const experiment_config& cfg, int trial_index);

struct experiment_report {
    std::vector<trial_result> trials;
    int best_trial = 0;  ///< lowest mean re-evaluated MSE

    const trial_result& reported() const { return trials.at(best_trial); }
};

experiment_report run_experiment(const experiment_config& cfg);

struct comparison_report {
    std::vector<topology> topologies;
    std::vector<experiment_report> reports;  ///< one per topology
    Eigen::MatrixXd p_values;  ///< Welch's test between reported re-eval sets
};

comparison_report run_comparison(const experiment_config& cfg, std::span<const topology> topologies);

/// Welch p-value matrix between result sample sets.
Eigen::MatrixXd p_value_matrix(std::span<const std::vector<double>> samples);

struct scan_row {
    double value = 0;
    int repeat = 0;
    double mse = 0;
};

/// Substitute one hyperparameter with each grid value and measure the
/// resulting test MSE over `repeats` fresh networks. The same seed set is
/// reused across grid values so rows are comparable.
std::vector<scan_row> scan_parameter(const hyperparameters& base, const std::string& param,
                                     std::span<const double> grid, const experiment_config& cfg,
                                     int repeats);

enum class length_kind { washout, train };

std::vector<scan_row> scan_lengths(const hyperparameters& base, length_kind which,
                                   std::span<const int> grid, const experiment_config& cfg,
                                   int repeats);

/// Run fn(0..count-1) on up to `jobs` threads; results must be written to
/// index-addressed slots so the schedule cannot influence the outcome.
void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn);

void write_trace_csv(const std::vector<trace_row>& rows, std::ostream& out);
void write_scan_csv(const std::vector<scan_row>& rows, const std::string& label, std::ostream& out);

}  // namespace esn
