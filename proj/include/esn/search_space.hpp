#pragma once

// Bijective encoding between optimizer coordinates and natural
// hyperparameter values.

#include "esn/reservoir.hpp"

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>

#include <json.hpp>

namespace esn {

enum class transform_kind {
    log_exp,        ///< v = e^{-50 x}
    signed_square,  ///< v = 2 x |x|
    identity,
};

std::string to_string(transform_kind kind);
transform_kind transform_kind_from_string(const std::string& name);

struct param_spec {
    std::string name;
    transform_kind transform = transform_kind::identity;
    double lower = -1.1;  ///< bound in encoded space
    double upper = 1.1;
};

inline constexpr int search_dimension = 8;

/// The per-parameter encodings in canonical coordinate order:
/// sigma_res, mu_res, omega_in, omega_fb, sparsity, gamma, mu_b, epsilon.
std::array<param_spec, search_dimension> default_specs();

double apply_transform(transform_kind kind, double encoded);
double invert_transform(transform_kind kind, double value);

/// Clamp the point into the encoded-space bounds, then apply each
/// parameter's transform. Total: any real input decodes to valid
/// hyperparameters (sparsity re-clamped to [0,1], half-ranges made
/// nonnegative).
hyperparameters decode(const Eigen::VectorXd& point, std::span<const param_spec> specs);

/// Inverse of decode on its in-range domain. Values a transform cannot
/// represent (e.g. sigma_res <= 0 in log space) or that encode outside
/// the bounds are rejected with std::invalid_argument.
Eigen::VectorXd encode(const hyperparameters& hp, std::span<const param_spec> specs);

/// The handpicked starting hyperparameters, encoded. sigma_res is set to
/// 1/(2k) with k the topology's average in-degree at the initial
/// sparsity of 0.1.
Eigen::VectorXd initial_point(topology topo, std::span<const param_spec> specs);

nlohmann::json specs_to_json(std::span<const param_spec> specs);
std::array<param_spec, search_dimension> specs_from_json(const nlohmann::json& doc);

}  // namespace esn
