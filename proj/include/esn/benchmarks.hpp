#pragma once

// Benchmark task generators and error measures.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esn {

/// Transform pair applied around the network (forward on the data fed in,
/// inverse on the outputs when reporting errors in the original range).
struct output_transform {
    std::string name;
    std::function<double(double)> forward;
    std::function<double(double)> inverse;
};

/// A benchmark instance: input sequence, target sequence and metadata.
struct task {
    std::string name;
    std::vector<double> input;
    std::vector<double> target;
    std::optional<output_transform> transform;
    int tau = 0;  ///< delay parameter, Mackey-Glass only
    std::uint64_t seed = 0;
};

/// The tanh(v - 1) squashing used for Mackey-Glass data together with its
/// exact inverse atanh(v) + 1.
output_transform mackey_glass_transform();

/// Generate a NARMA task of 10th order driven by i.i.d. Uniform(0, 0.5)
/// input. Sequences whose target leaves [-1, 1] are regenerated with fresh
/// input; gives up with std::runtime_error after `max_attempts`.
task gen_narma10(int length, std::uint64_t seed, int max_attempts = 100);

/// One explicit-Euler update of the Mackey-Glass delay equation with
/// discretization step `dt`.
double mg_euler_step(double current, double delayed, double dt = 0.1);

/// Generate a Mackey-Glass one-step-ahead prediction task. The raw
/// trajectory starts from a constant history, is subsampled by 10 and has
/// its transient discarded (the seed offsets the sampled window along the
/// attractor). Values are squashed by tanh(v - 1) before use.
task gen_mackey_glass(int tau, int length, std::uint64_t seed, double initial_history = 1.2);

double mse(std::span<const double> target, std::span<const double> predicted);
double nmse(std::span<const double> target, std::span<const double> predicted);
double nrmse(std::span<const double> target, std::span<const double> predicted);

struct welch_result {
    double t = 0;
    double p = 1;
    double df = 0;
};

/// Two-sided Welch's t-test with Welch-Satterthwaite degrees of freedom.
welch_result welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b);

/// Two-column CSV with `#`-prefixed metadata comments.
void task_to_csv(const task& t, std::ostream& out);
task task_from_csv(std::istream& in);

}  // namespace esn
