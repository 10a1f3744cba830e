#include <catch_amalgamated.hpp>

#include "vucalc/subdiff.hpp"

#include "oracle_helpers.hpp"

using vucalc::Index;
using vucalc::Matrix;
using vucalc::NonsmoothAtom;
using vucalc::SubdifferentialModel;
using vucalc::Vector;

TEST_CASE("coordinate-max activity uses a relative tolerance") {
    const NonsmoothAtom atom = NonsmoothAtom::coordinate_max(1e-8);
    Vector y(3);
    y << 1.0, 1.0 - 5e-9, 0.3; // gap 5e-9 <= 1e-8 * (1 + 1)
    CHECK(vucalc::active_set(atom, y) == std::vector<Index>{0, 1});

    y(1) = 1.0 - 3e-8; // gap 3e-8 > 2e-8
    CHECK(vucalc::active_set(atom, y) == std::vector<Index>{0});

    CHECK(vucalc::eval(atom, y) == 1.0);
}

TEST_CASE("l1 activity flags coordinates near zero") {
    const NonsmoothAtom atom = NonsmoothAtom::l1_norm(0.5, 1e-10);
    Vector y(4);
    y << 0.2, 0.0, -1e-11, -0.3;
    CHECK(vucalc::active_set(atom, y) == std::vector<Index>{1, 2});
    CHECK(std::abs(vucalc::eval(atom, y) - 0.5 * (0.2 + 1e-11 + 0.3)) <= 1e-15);
}

TEST_CASE("max subdifferential: one coordinate generator per active index") {
    Vector y(4);
    y << 2.0, 1.0, 2.0, 0.0;
    const SubdifferentialModel m =
        vucalc::subdifferential(NonsmoothAtom::coordinate_max(1e-8), y);
    REQUIRE(m.count() == 2);
    Vector e0 = Vector::Zero(4), e2 = Vector::Zero(4);
    e0(0) = 1.0;
    e2(2) = 1.0;
    CHECK(oracle::same_generator_set(m.generators, {e0, e2}, 0.0));
    CHECK(oracle::max_abs_diff(m.ri_point, (0.5 * (e0 + e2)).eval()) == 0.0);
    CHECK(m.horizon_trivial);
}

TEST_CASE("l1 subdifferential enumerates sign vertices over the zero set") {
    const double tau = 0.7;
    Vector z(4);
    z << 0.5, 0.0, -0.2, 0.0;
    const SubdifferentialModel m = vucalc::subdifferential(NonsmoothAtom::l1_norm(tau), z);
    REQUIRE(m.count() == 4); // 2 zeros -> 2^2 vertices

    // independent enumeration
    Vector base(4);
    base << tau, 0.0, -tau, 0.0;
    const auto expected = oracle::enumerate_sign_vectors(base, {1, 3}, tau);
    CHECK(oracle::same_generator_set(m.generators, expected, 1e-15));

    // relative-interior point: fixed signs on the support, zero on the zero set
    CHECK(oracle::max_abs_diff(m.ri_point, base) <= 1e-15);
}

TEST_CASE("l1 subdifferential respects the generator budget") {
    const Index n = 13; // 2^13 = 8192 > 4096
    CHECK_THROWS_AS(vucalc::subdifferential(NonsmoothAtom::l1_norm(1.0), Vector::Zero(n)),
                    vucalc::GeneratorBudgetExceeded);
    const SubdifferentialModel ok =
        vucalc::subdifferential(NonsmoothAtom::l1_norm(1.0), Vector::Zero(12));
    CHECK(ok.count() == 4096);
}

TEST_CASE("linear outer function gives a singleton model") {
    Vector w(3);
    w << 1, -2, 0.5;
    const SubdifferentialModel m =
        vucalc::subdifferential(NonsmoothAtom::smooth_linear(w), Vector::Zero(3));
    REQUIRE(m.count() == 1);
    CHECK(oracle::max_abs_diff(m.generators[0], w) == 0.0);
    CHECK(oracle::max_abs_diff(m.ri_point, w) == 0.0);
}

TEST_CASE("pushforward maps every generator and the interior point through J^T") {
    std::mt19937_64 rng(44);
    std::vector<Vector> gens;
    for (int i = 0; i < 5; ++i) gens.push_back(oracle::random_vector(rng, 3));
    const SubdifferentialModel m = SubdifferentialModel::from_generators(gens);
    const Matrix j = oracle::random_matrix(rng, 3, 4); // rows live in the model space

    const SubdifferentialModel pushed = vucalc::pushforward(m, j);
    REQUIRE(pushed.ambient_dim == 4);
    REQUIRE(pushed.count() == 5);
    for (size_t k = 0; k < gens.size(); ++k)
        CHECK(oracle::max_abs_diff(pushed.generators[k], (j.transpose() * gens[k]).eval()) ==
              0.0);
    CHECK(oracle::max_abs_diff(pushed.ri_point, (j.transpose() * m.ri_point).eval()) == 0.0);
    CHECK(pushed.horizon_trivial == m.horizon_trivial);

    CHECK_THROWS_AS(vucalc::pushforward(m, oracle::random_matrix(rng, 2, 4)),
                    vucalc::DimensionMismatch);
}

TEST_CASE("minkowski sum enumerates pairwise sums and adds interior points") {
    std::mt19937_64 rng(55);
    std::vector<Vector> ga, gb;
    for (int i = 0; i < 3; ++i) ga.push_back(oracle::random_vector(rng, 2));
    for (int i = 0; i < 2; ++i) gb.push_back(oracle::random_vector(rng, 2));
    const auto a = SubdifferentialModel::from_generators(ga);
    const auto b = SubdifferentialModel::from_generators(gb);

    const SubdifferentialModel s = vucalc::minkowski_sum({a, b});
    REQUIRE(s.count() == 6);
    std::vector<Vector> expected;
    for (const auto& x : ga)
        for (const auto& y : gb) expected.push_back(x + y);
    CHECK(oracle::same_generator_set(s.generators, expected, 1e-15));
    CHECK(oracle::max_abs_diff(s.ri_point, (a.ri_point + b.ri_point).eval()) <= 1e-15);
}

TEST_CASE("minkowski sum enforces the generator budget") {
    std::vector<Vector> many;
    for (int i = 0; i < 70; ++i) many.push_back(Vector::Constant(1, i));
    const auto big = SubdifferentialModel::from_generators(many);
    CHECK_THROWS_AS(vucalc::minkowski_sum({big, big}), vucalc::GeneratorBudgetExceeded);
}

TEST_CASE("difference span columns are generators minus the interior point") {
    std::mt19937_64 rng(66);
    std::vector<Vector> gens;
    for (int i = 0; i < 4; ++i) gens.push_back(oracle::random_vector(rng, 3));
    const auto m = SubdifferentialModel::from_generators(gens);
    const Matrix d = vucalc::minkowski_difference_span(m);
    REQUIRE(d.cols() == 4);
    for (Index k = 0; k < 4; ++k)
        CHECK(oracle::max_abs_diff(d.col(k),
                                   (gens[static_cast<size_t>(k)] - m.ri_point).eval()) == 0.0);
}

TEST_CASE("custom interior points are validated against the ambient dimension") {
    std::vector<Vector> gens{Vector::Zero(2), Vector::Ones(2)};
    CHECK_THROWS_AS(SubdifferentialModel::with_ri_point(gens, Vector::Zero(3)),
                    vucalc::DimensionMismatch);
}
