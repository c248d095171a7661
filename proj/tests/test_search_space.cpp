#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "esn/search_space.hpp"

#include <cmath>
#include <random>

using namespace esn;

namespace {

Eigen::VectorXd point_with(const std::array<param_spec, search_dimension>& specs,
                           const std::string& name, double value)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(search_dimension);
    for (int i = 0; i < search_dimension; ++i)
        if (specs[i].name == name) p(i) = value;
    return p;
}

}  // namespace

TEST_CASE("transform assignment matches the experiment table")
{
    auto specs = default_specs();
    REQUIRE(specs.size() == 8);
    for (const auto& s : specs) {
        CHECK(s.lower == doctest::Approx(-1.1));
        CHECK(s.upper == doctest::Approx(1.1));
        if (s.name == "sigma_res" || s.name == "epsilon") {
            CHECK(s.transform == transform_kind::log_exp);
        } else if (s.name == "sparsity" || s.name == "gamma") {
            CHECK(s.transform == transform_kind::identity);
        } else {
            CHECK(s.transform == transform_kind::signed_square);
        }
    }
}

TEST_CASE("decode closed-form examples")
{
    auto specs = default_specs();
    SUBCASE("sigma_res at zero encodes to one")
    {
        auto hp = decode(Eigen::VectorXd::Zero(8), specs);
        CHECK(hp.sigma_res == doctest::Approx(1.0));
        CHECK(hp.epsilon == doctest::Approx(1.0));
        CHECK(hp.mu_res == 0.0);
        CHECK(hp.sparsity == 0.0);
        CHECK(hp.gamma == 0.0);
    }
    SUBCASE("signed square is odd")
    {
        auto hp = decode(point_with(specs, "mu_b", 0.5), specs);
        CHECK(hp.mu_b == doctest::Approx(0.5));
        hp = decode(point_with(specs, "mu_b", -0.5), specs);
        CHECK(hp.mu_b == doctest::Approx(-0.5));
    }
    SUBCASE("log space example")
    {
        auto hp = decode(point_with(specs, "sigma_res", 0.0921034), specs);
        CHECK(hp.sigma_res == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("decode clamps before transforming")
{
    auto specs = default_specs();
    auto hp = decode(point_with(specs, "gamma", 5.0), specs);
    CHECK(hp.gamma == doctest::Approx(1.1));
    hp = decode(point_with(specs, "sparsity", -0.7), specs);
    CHECK(hp.sparsity == 0.0);  // identity clamps to -0.7, then to the [0,1] domain
    hp = decode(point_with(specs, "sparsity", 1.05), specs);
    CHECK(hp.sparsity == 1.0);
    hp = decode(point_with(specs, "omega_in", -0.1), specs);
    CHECK(hp.omega_in == doctest::Approx(0.02));  // half-ranges are nonnegative
    // idempotence: decoding an already clamped point changes nothing
    Eigen::VectorXd wild(8);
    wild << 3, -4, 2, -2, 7, -9, 2, 3;
    Eigen::VectorXd clamped = wild.cwiseMax(-1.1).cwiseMin(1.1);
    CHECK(decode(wild, specs) == decode(clamped, specs));
}

TEST_CASE("encode closed-form examples and errors")
{
    auto specs = default_specs();
    hyperparameters hp;
    hp.sigma_res = 1;
    hp.epsilon = 1;
    hp.gamma = 0;
    auto point = encode(hp, specs);
    CHECK(point(0) == doctest::Approx(0.0));

    hp.mu_res = 0.5;
    point = encode(hp, specs);
    CHECK(point(1) == doctest::Approx(0.5));  // sign(v) * sqrt(|v|/2)

    hp.sigma_res = 0;
    CHECK_THROWS_AS(encode(hp, specs), std::invalid_argument);
    hp.sigma_res = 1;
    hp.gamma = 1.2;  // outside the encoded bounds
    CHECK_THROWS_AS(encode(hp, specs), std::invalid_argument);
}

TEST_CASE("decode is the inverse of encode on the in-range domain")
{
    auto specs = default_specs();
    std::mt19937_64 rng{42};
    std::uniform_real_distribution<double> coord{-1.0, 1.0};
    for (int it = 0; it < 500; ++it) {
        hyperparameters hp;
        hp.sigma_res = std::exp(-50.0 * coord(rng));
        hp.epsilon = std::exp(-50.0 * coord(rng));
        hp.mu_res = 2 * coord(rng) * std::abs(coord(rng));
        hp.omega_in = std::abs(2 * coord(rng) * std::abs(coord(rng)));
        hp.omega_fb = std::abs(2 * coord(rng) * std::abs(coord(rng)));
        hp.mu_b = 2 * coord(rng) * std::abs(coord(rng));
        hp.sparsity = std::uniform_real_distribution<double>{0, 1}(rng);
        hp.gamma = coord(rng);
        auto round = decode(encode(hp, specs), specs);
        CHECK(round.sigma_res == doctest::Approx(hp.sigma_res).epsilon(1e-9));
        CHECK(round.epsilon == doctest::Approx(hp.epsilon).epsilon(1e-9));
        CHECK(round.mu_res == doctest::Approx(hp.mu_res).epsilon(1e-9));
        CHECK(round.omega_in == doctest::Approx(hp.omega_in).epsilon(1e-9));
        CHECK(round.omega_fb == doctest::Approx(hp.omega_fb).epsilon(1e-9));
        CHECK(round.mu_b == doctest::Approx(hp.mu_b).epsilon(1e-9));
        CHECK(round.sparsity == doctest::Approx(hp.sparsity).epsilon(1e-9));
        CHECK(round.gamma == doctest::Approx(hp.gamma).epsilon(1e-9));
    }
}

TEST_CASE("transform shapes on a grid")
{
    double prev_log = std::numeric_limits<double>::infinity();
    double prev_sq = -std::numeric_limits<double>::infinity();
    for (double x = -1.1; x <= 1.1; x += 0.01) {
        double v_log = apply_transform(transform_kind::log_exp, x);
        double v_sq = apply_transform(transform_kind::signed_square, x);
        CHECK(v_log < prev_log);  // strictly decreasing
        CHECK(v_sq > prev_sq);    // strictly increasing
        CHECK(v_sq == -apply_transform(transform_kind::signed_square, -x));  // odd
        prev_log = v_log;
        prev_sq = v_sq;
    }
}

TEST_CASE("initial point follows the handpicked recipe")
{
    auto specs = default_specs();
    SUBCASE("ring topology")
    {
        auto point = initial_point({topology_kind::ring, 500}, specs);
        auto hp = decode(point, specs);
        // average in-degree 1, times 0.9 for the initial sparsity
        CHECK(hp.sigma_res == doctest::Approx(1.0 / 1.8).epsilon(1e-12));
        CHECK(point(0) == doctest::Approx(-std::log(1.0 / 1.8) / 50.0));
        CHECK(hp.gamma == 0.9);
        CHECK(hp.sparsity == doctest::Approx(0.1));
        CHECK(hp.omega_in == doctest::Approx(0.02));
        CHECK(hp.omega_fb == 0.0);
        CHECK(hp.mu_res == 0.0);
        CHECK(hp.mu_b == 0.0);
        CHECK(hp.epsilon == doctest::Approx(4.5e-5).epsilon(1e-9));
    }
    SUBCASE("sparse topology")
    {
        auto hp = decode(initial_point({topology_kind::sparse, 500}, specs), specs);
        CHECK(hp.sigma_res == doctest::Approx(1.0 / (2.0 * 450.0)).epsilon(1e-12));
    }
    SUBCASE("feedback and reservoir mean encode to exactly zero")
    {
        auto point = initial_point({topology_kind::chain, 100}, specs);
        CHECK(point(1) == 0.0);  // mu_res
        CHECK(point(3) == 0.0);  // omega_fb
        CHECK(point(6) == 0.0);  // mu_b
    }
}

TEST_CASE("spec table serialization round-trips")
{
    auto specs = default_specs();
    auto doc = specs_to_json(specs);
    auto back = specs_from_json(doc);
    for (int i = 0; i < search_dimension; ++i) {
        CHECK(back[i].name == specs[i].name);
        CHECK(back[i].transform == specs[i].transform);
        CHECK(back[i].lower == specs[i].lower);
        CHECK(back[i].upper == specs[i].upper);
    }
    doc[0]["name"] = "gamma";  // duplicate
    CHECK_THROWS_AS(specs_from_json(doc), std::invalid_argument);
}
