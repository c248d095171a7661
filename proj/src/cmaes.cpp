#include "esn/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace esn {

namespace {

constexpr double condition_limit = 1e14;
constexpr double step_size_floor = 1e-14;

}  // namespace

int cmaes::default_population_size(int dimension)
{
    return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

cmaes::cmaes(const optimizer_config& cfg)
{
    dim_ = cfg.dimension;
    if (dim_ < 1) throw std::invalid_argument{"cmaes: dimension must be at least 1"};
    if (cfg.initial_mean.size() != dim_)
        throw std::invalid_argument{"cmaes: initial mean has wrong dimension"};
    if (cfg.initial_step_sizes.size() != dim_)
        throw std::invalid_argument{"cmaes: initial step sizes have wrong dimension"};
    if ((cfg.initial_step_sizes.array() <= 0).any())
        throw std::invalid_argument{"cmaes: initial step sizes must be positive"};
    if (cfg.max_evaluations < 1) throw std::invalid_argument{"cmaes: empty evaluation budget"};
    lambda_ = cfg.population_size > 0 ? cfg.population_size : default_population_size(dim_);
    if (lambda_ < 4) throw std::invalid_argument{"cmaes: population size must be at least 4"};
    mu_ = lambda_ / 2;
    max_evaluations_ = cfg.max_evaluations;

    const double d = dim_;
    Eigen::VectorXd raw(lambda_);
    for (int i = 0; i < lambda_; ++i)
        raw(i) = std::log((lambda_ + 1.0) / 2.0) - std::log(i + 1.0);
    const double sum_pos = raw.head(mu_).sum();
    const double sum_pos_sq = raw.head(mu_).squaredNorm();
    mu_eff_ = sum_pos * sum_pos / sum_pos_sq;
    const double sum_neg = raw.tail(lambda_ - mu_).sum();
    const double sum_neg_sq = raw.tail(lambda_ - mu_).squaredNorm();
    const double mu_eff_neg = sum_neg * sum_neg / sum_neg_sq;

    c_sigma_ = (mu_eff_ + 2.0) / (d + mu_eff_ + 5.0);
    d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (d + 1.0)) - 1.0) + c_sigma_;
    c_cov_path_ = (4.0 + mu_eff_ / d) / (d + 4.0 + 2.0 * mu_eff_ / d);
    c_rank1_ = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff_);
    c_rank_mu_ = std::min(1.0 - c_rank1_,
                          2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((d + 2.0) * (d + 2.0) + mu_eff_));

    // Negative weights scaled down far enough to keep the covariance
    // update positive definite in expectation (eigen repair catches the
    // remaining numerical violations).
    const double alpha_mu = 1.0 + c_rank1_ / c_rank_mu_;
    const double alpha_mu_eff = 1.0 + 2.0 * mu_eff_neg / (mu_eff_ + 2.0);
    const double alpha_posdef = (1.0 - c_rank1_ - c_rank_mu_) / (d * c_rank_mu_);
    const double neg_scale = std::min({alpha_mu, alpha_mu_eff, alpha_posdef});

    weights_ = raw;
    weights_.head(mu_) /= sum_pos;
    weights_.tail(lambda_ - mu_) *= neg_scale / std::abs(sum_neg);

    chi_n_ = std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

    mean_ = cfg.initial_mean;
    // Overall scale in sigma, relative anisotropy in the covariance.
    sigma_ = std::sqrt(cfg.initial_step_sizes.squaredNorm() / d);
    cov_ = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
        double s = cfg.initial_step_sizes(i) / sigma_;
        cov_(i, i) = s * s;
    }
    path_sigma_ = Eigen::VectorXd::Zero(dim_);
    path_cov_ = Eigen::VectorXd::Zero(dim_);
    rng_.seed(cfg.seed);
    decompose_and_repair();
}

void cmaes::decompose_and_repair()
{
    cov_ = 0.5 * (cov_ + cov_.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error{"cmaes: eigendecomposition failed"};
    Eigen::VectorXd values = solver.eigenvalues();
    eigen_basis_ = solver.eigenvectors();
    const double max_value = values.maxCoeff();
    if (max_value <= 0) throw std::runtime_error{"cmaes: covariance collapsed"};
    const double floor_value = max_value * 1e-14;
    if (values.minCoeff() < floor_value) {
        values = values.cwiseMax(floor_value);
        cov_ = eigen_basis_ * values.asDiagonal() * eigen_basis_.transpose();
        cov_ = 0.5 * (cov_ + cov_.transpose().eval());
    }
    eigen_scale_ = values.cwiseSqrt();
}

double cmaes::axis_ratio() const
{
    return eigen_scale_.maxCoeff() / eigen_scale_.minCoeff();
}

double cmaes::condition_number() const
{
    double r = axis_ratio();
    return r * r;
}

bool cmaes::terminated() const
{
    if (evaluations_ >= max_evaluations_) return true;
    if (condition_number() > condition_limit) return true;
    if (sigma_ < step_size_floor) return true;
    return false;
}

std::vector<Eigen::VectorXd> cmaes::ask()
{
    if (terminated()) throw std::logic_error{"cmaes: ask() after termination"};
    std::normal_distribution<double> gauss{0.0, 1.0};
    std::vector<Eigen::VectorXd> candidates(lambda_);
    for (int k = 0; k < lambda_; ++k) {
        Eigen::VectorXd z(dim_);
        for (int i = 0; i < dim_; ++i) z(i) = gauss(rng_);
        candidates[k] = mean_ + sigma_ * (eigen_basis_ * (eigen_scale_.asDiagonal() * z));
    }
    asked_ = true;
    return candidates;
}

void cmaes::tell(const std::vector<Eigen::VectorXd>& candidates,
                 const std::vector<double>& fitnesses)
{
    if (!asked_) throw std::logic_error{"cmaes: tell() without a preceding ask()"};
    if (candidates.size() != static_cast<std::size_t>(lambda_)
        || fitnesses.size() != static_cast<std::size_t>(lambda_))
        throw std::invalid_argument{"cmaes: candidate/fitness count must equal population size"};
    for (double f : fitnesses)
        if (std::isnan(f)) throw std::invalid_argument{"cmaes: NaN fitness rejected"};

    std::vector<int> order(lambda_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitnesses[a] < fitnesses[b]; });

    evaluations_ += lambda_;
    ++generation_;
    asked_ = false;

    if (!best_seen_ || fitnesses[order[0]] < best_seen_->second)
        best_seen_ = {candidates[order[0]], fitnesses[order[0]]};
    last_best_fitness_ = fitnesses[order[0]];
    last_mean_fitness_ =
      std::accumulate(fitnesses.begin(), fitnesses.end(), 0.0) / static_cast<double>(lambda_);

    const double d = dim_;
    const Eigen::VectorXd old_mean = mean_;
    std::vector<Eigen::VectorXd> steps(lambda_);
    for (int k = 0; k < lambda_; ++k) steps[k] = (candidates[order[k]] - old_mean) / sigma_;

    Eigen::VectorXd step_w = Eigen::VectorXd::Zero(dim_);
    for (int k = 0; k < mu_; ++k) step_w += weights_(k) * steps[k];
    mean_ = old_mean + sigma_ * step_w;

    auto whiten = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return eigen_basis_ * eigen_scale_.cwiseInverse().asDiagonal()
          * (eigen_basis_.transpose() * v);
    };

    path_sigma_ = (1.0 - c_sigma_) * path_sigma_
      + std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * whiten(step_w);

    const double expected_decay = std::sqrt(
      1.0 - std::pow(1.0 - c_sigma_, 2.0 * static_cast<double>(generation_)));
    const bool h_sigma =
      path_sigma_.norm() / expected_decay < (1.4 + 2.0 / (d + 1.0)) * chi_n_;

    path_cov_ = (1.0 - c_cov_path_) * path_cov_;
    if (h_sigma) path_cov_ += std::sqrt(c_cov_path_ * (2.0 - c_cov_path_) * mu_eff_) * step_w;

    // Rank-mu update over the full population; the worst candidates enter
    // with negative weights rescaled by their whitened length (active CMA-ES).
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int k = 0; k < lambda_; ++k) {
        double w = weights_(k);
        if (w < 0) {
            double norm_sq = whiten(steps[k]).squaredNorm();
            w *= d / std::max(norm_sq, 1e-12);
        }
        rank_mu.noalias() += w * steps[k] * steps[k].transpose();
    }

    const double delta_h = (1.0 - (h_sigma ? 1.0 : 0.0)) * c_cov_path_ * (2.0 - c_cov_path_);
    const double decay =
      1.0 + c_rank1_ * delta_h - c_rank1_ - c_rank_mu_ * weights_.sum();
    cov_ = decay * cov_ + c_rank1_ * path_cov_ * path_cov_.transpose() + c_rank_mu_ * rank_mu;

    const double exponent =
      std::min(1.0, (c_sigma_ / d_sigma_) * (path_sigma_.norm() / chi_n_ - 1.0));
    sigma_ *= std::exp(exponent);

    decompose_and_repair();
}

std::pair<Eigen::VectorXd, double> cmaes::recommend() const
{
    if (!best_seen_) throw std::logic_error{"cmaes: recommend() before any tell()"};
    return *best_seen_;
}

}  // namespace esn
