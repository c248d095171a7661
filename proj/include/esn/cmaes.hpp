#pragma once

// Active CMA-ES continuous minimizer with an ask/tell interface.

#include "esn/rng.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace esn {

struct optimizer_config {
    int dimension = 0;
    Eigen::VectorXd initial_mean;
    /// Per-coordinate standard deviations of the initial search
    /// distribution (anisotropy goes into the covariance diagonal, the
    /// overall scale into the global step size).
    Eigen::VectorXd initial_step_sizes;
    int population_size = 0;  ///< 0 picks the default 4 + floor(3 ln d)
    long max_evaluations = 0;
    std::uint64_t seed = 0;
};

/// Covariance matrix adaptation evolution strategy, active variant: the
/// covariance update uses positive weights for the best candidates and
/// negative weights for the worst ones. Minimizes.
class cmaes {
public:
    explicit cmaes(const optimizer_config& cfg);

    static int default_population_size(int dimension);

    /// Sample one generation of candidates from mean + sigma * N(0, C).
    std::vector<Eigen::VectorXd> ask();

    /// Consume fitness values for the candidates of the last ask(). Only
    /// the fitness ranks enter the distribution update; ties break by
    /// candidate index. NaN fitness is rejected, callers map pathologies
    /// to a finite penalty first.
    void tell(const std::vector<Eigen::VectorXd>& candidates, const std::vector<double>& fitnesses);

    /// Best candidate seen so far and its fitness.
    std::pair<Eigen::VectorXd, double> recommend() const;

    /// True once the evaluation budget is spent, the covariance condition
    /// number exceeds 1e14 or the step size underflows below 1e-14.
    bool terminated() const;

    int dimension() const { return dim_; }
    int population_size() const { return lambda_; }
    int generation() const { return generation_; }
    long evaluations_used() const { return evaluations_; }
    double step_size() const { return sigma_; }
    double axis_ratio() const;
    double condition_number() const;
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::VectorXd& path_sigma() const { return path_sigma_; }
    const Eigen::VectorXd& path_cov() const { return path_cov_; }
    double last_best_fitness() const { return last_best_fitness_; }
    double last_mean_fitness() const { return last_mean_fitness_; }

private:
    void decompose_and_repair();

    int dim_ = 0;
    int lambda_ = 0;
    int mu_ = 0;
    long max_evaluations_ = 0;
    Eigen::VectorXd weights_;  ///< lambda entries, positives then negatives
    double mu_eff_ = 0;
    double c_sigma_ = 0;
    double d_sigma_ = 0;
    double c_cov_path_ = 0;
    double c_rank1_ = 0;
    double c_rank_mu_ = 0;
    double chi_n_ = 0;

    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    double sigma_ = 0;
    Eigen::VectorXd path_sigma_;
    Eigen::VectorXd path_cov_;
    Eigen::MatrixXd eigen_basis_;  ///< columns are eigenvectors of cov_
    Eigen::VectorXd eigen_scale_;  ///< sqrt of the (repaired) eigenvalues

    int generation_ = 0;
    long evaluations_ = 0;
    bool asked_ = false;
    std::optional<std::pair<Eigen::VectorXd, double>> best_seen_;
    double last_best_fitness_ = std::numeric_limits<double>::quiet_NaN();
    double last_mean_fitness_ = std::numeric_limits<double>::quiet_NaN();
    prng rng_;
};

}  // namespace esn
