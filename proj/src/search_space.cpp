#include "esn/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace esn {

std::string to_string(transform_kind kind)
{
    switch (kind) {
    case transform_kind::log_exp: return "log_exp";
    case transform_kind::signed_square: return "signed_square";
    case transform_kind::identity: return "identity";
    }
    throw std::invalid_argument{"unknown transform kind"};
}

transform_kind transform_kind_from_string(const std::string& name)
{
    if (name == "log_exp") return transform_kind::log_exp;
    if (name == "signed_square") return transform_kind::signed_square;
    if (name == "identity") return transform_kind::identity;
    throw std::invalid_argument{"unknown transform kind `" + name + "`"};
}

std::array<param_spec, search_dimension> default_specs()
{
    return {{
      {"sigma_res", transform_kind::log_exp},
      {"mu_res", transform_kind::signed_square},
      {"omega_in", transform_kind::signed_square},
      {"omega_fb", transform_kind::signed_square},
      {"sparsity", transform_kind::identity},
      {"gamma", transform_kind::identity},
      {"mu_b", transform_kind::signed_square},
      {"epsilon", transform_kind::log_exp},
    }};
}

double apply_transform(transform_kind kind, double encoded)
{
    switch (kind) {
    case transform_kind::log_exp: return std::exp(-50.0 * encoded);
    case transform_kind::signed_square: return 2.0 * encoded * std::abs(encoded);
    case transform_kind::identity: return encoded;
    }
    throw std::invalid_argument{"unknown transform kind"};
}

double invert_transform(transform_kind kind, double value)
{
    switch (kind) {
    case transform_kind::log_exp:
        if (value <= 0) throw std::invalid_argument{"log transform cannot represent values <= 0"};
        return -std::log(value) / 50.0;
    case transform_kind::signed_square:
        return std::copysign(std::sqrt(std::abs(value) / 2.0), value);
    case transform_kind::identity: return value;
    }
    throw std::invalid_argument{"unknown transform kind"};
}

namespace {

double& field_by_name(hyperparameters& hp, const std::string& name)
{
    if (name == "sigma_res") return hp.sigma_res;
    if (name == "mu_res") return hp.mu_res;
    if (name == "omega_in") return hp.omega_in;
    if (name == "omega_fb") return hp.omega_fb;
    if (name == "sparsity") return hp.sparsity;
    if (name == "gamma") return hp.gamma;
    if (name == "mu_b") return hp.mu_b;
    if (name == "epsilon") return hp.epsilon;
    throw std::invalid_argument{"unknown hyperparameter `" + name + "`"};
}

}  // namespace

hyperparameters decode(const Eigen::VectorXd& point, std::span<const param_spec> specs)
{
    if (point.size() != static_cast<Eigen::Index>(specs.size()))
        throw std::invalid_argument{"decode: coordinate count does not match specs"};
    hyperparameters hp;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        double x = std::clamp(point(static_cast<Eigen::Index>(i)), spec.lower, spec.upper);
        field_by_name(hp, spec.name) = apply_transform(spec.transform, x);
    }
    hp.sparsity = std::clamp(hp.sparsity, 0.0, 1.0);
    hp.omega_in = std::abs(hp.omega_in);
    hp.omega_fb = std::abs(hp.omega_fb);
    return hp;
}

Eigen::VectorXd encode(const hyperparameters& hp, std::span<const param_spec> specs)
{
    Eigen::VectorXd point(static_cast<Eigen::Index>(specs.size()));
    hyperparameters copy = hp;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        double x = invert_transform(spec.transform, field_by_name(copy, spec.name));
        if (x < spec.lower || x > spec.upper)
            throw std::invalid_argument{"encode: `" + spec.name + "` falls outside the bounds"};
        point(static_cast<Eigen::Index>(i)) = x;
    }
    return point;
}

Eigen::VectorXd initial_point(topology topo, std::span<const param_spec> specs)
{
    constexpr double initial_sparsity = 0.1;
    double in_degree = 0;  // average number of inputs per neuron before drops
    switch (topo.kind) {
    case topology_kind::sparse: in_degree = topo.neurons; break;
    case topology_kind::chain:
        in_degree = topo.neurons > 1 ? (topo.neurons - 1.0) / topo.neurons : 1.0;
        break;
    case topology_kind::ring:
    case topology_kind::permutation: in_degree = 1.0; break;
    }
    double k = (1.0 - initial_sparsity) * in_degree;
    hyperparameters hp;
    hp.sigma_res = 1.0 / (2.0 * k);
    hp.mu_res = 0;
    hp.omega_in = 0.02;
    hp.omega_fb = 0;
    hp.sparsity = initial_sparsity;
    hp.gamma = 0.9;
    hp.mu_b = 0;
    hp.epsilon = 4.5e-5;
    return encode(hp, specs);
}

nlohmann::json specs_to_json(std::span<const param_spec> specs)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs)
        arr.push_back({{"name", s.name},
                       {"transform", to_string(s.transform)},
                       {"lower", s.lower},
                       {"upper", s.upper}});
    return arr;
}

std::array<param_spec, search_dimension> specs_from_json(const nlohmann::json& doc)
{
    if (!doc.is_array() || doc.size() != search_dimension)
        throw std::invalid_argument{"search space table must list all eight parameters"};
    std::array<param_spec, search_dimension> specs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& entry = doc.at(i);
        specs[i].name = entry.at("name").get<std::string>();
        specs[i].transform = transform_kind_from_string(entry.at("transform").get<std::string>());
        specs[i].lower = entry.value("lower", -1.1);
        specs[i].upper = entry.value("upper", 1.1);
        if (!(specs[i].lower < specs[i].upper))
            throw std::invalid_argument{"search space bounds must satisfy lower < upper"};
    }
    hyperparameters probe;
    std::set<std::string> names;
    for (const auto& s : specs) {
        field_by_name(probe, s.name);  // name validation
        names.insert(s.name);
    }
    if (names.size() != specs.size())
        throw std::invalid_argument{"search space table repeats a parameter"};
    return specs;
}

}  // namespace esn
