#include <catch_amalgamated.hpp>

#include "vucalc/vu.hpp"

#include "oracle_helpers.hpp"

using vucalc::Index;
using vucalc::Matrix;
using vucalc::PdgStructure;
using vucalc::QuadraticAtom;
using vucalc::SubdifferentialModel;
using vucalc::Vector;

namespace {

SubdifferentialModel random_model(std::mt19937_64& rng, Index n, int count) {
    std::vector<Vector> gens;
    for (int i = 0; i < count; ++i) gens.push_back(oracle::random_vector(rng, n));
    return SubdifferentialModel::from_generators(std::move(gens));
}

// The two-piece parabola structure: f_1 = x1, f_2 = -x1 + x2^2.
PdgStructure parabola_pdg() {
    PdgStructure pdg;
    Vector b1(2), b2(2);
    b1 << 1, 0;
    b2 << -1, 0;
    Matrix a2 = Matrix::Zero(2, 2);
    a2(1, 1) = 2.0;
    pdg.f_atoms.emplace_back(Matrix::Zero(2, 2), b1, 0.0);
    pdg.f_atoms.emplace_back(a2, b2, 0.0);
    return pdg;
}

} // namespace

TEST_CASE("absolute value at the kink: V is the whole line, U is trivial") {
    std::vector<Vector> gens{Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    const auto model = SubdifferentialModel::from_generators(gens);
    const vucalc::VuPair vu = vucalc::decompose(model);
    CHECK(vu.dim_u() == 0);
    CHECK(vu.dim_v() == 1);
    CHECK(vu.v_basis.cols(0, 0) == 1.0); // sign convention

    const vucalc::UGradientResult res = vucalc::u_gradient(vu, model.ri_point);
    CHECK(res.u_gradient.size() == 1);
    CHECK(res.u_gradient(0) == 0.0);
    CHECK(res.u_lagrangian_gradient.size() == 0);
}

TEST_CASE("U-restricted subgradients are identical across the whole model") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = random_model(rng, 5, 6);
        const vucalc::VuPair vu = vucalc::decompose(model);
        const Vector ref = vu.u_basis.cols.transpose() * model.ri_point;
        for (const auto& g : model.generators) {
            const Vector proj = vu.u_basis.cols.transpose() * g;
            CHECK(oracle::max_abs_diff(proj, ref) <= 1e-10);
        }
        // U is the orthogonal complement of the generator differences (oracle)
        const Matrix diffs = vucalc::minkowski_difference_span(model);
        CHECK(oracle::subspaces_equal(vu.u_basis.cols,
                                      oracle::gs_complement(diffs, 5), 1e-9));
    }
}

TEST_CASE("the U-gradient does not depend on which interior subgradient is used") {
    std::mt19937_64 rng(88);
    const auto model = random_model(rng, 4, 5);

    // a different strictly-positive convex combination of the generators
    Vector weights(5);
    weights << 0.1, 0.3, 0.25, 0.2, 0.15;
    Vector other = Vector::Zero(4);
    for (int i = 0; i < 5; ++i) other += weights(i) * model.generators[static_cast<size_t>(i)];
    const auto moved = SubdifferentialModel::with_ri_point(model.generators, other);

    const vucalc::VuPair vu_a = vucalc::decompose(model);
    const vucalc::VuPair vu_b = vucalc::decompose(moved);
    CHECK(oracle::subspaces_equal(vu_a.u_basis.cols, vu_b.u_basis.cols, 1e-10));

    const Vector ga = vucalc::u_gradient(vu_a, model.ri_point).u_gradient;
    const Vector gb = vucalc::u_gradient(vu_b, moved.ri_point).u_gradient;
    CHECK(oracle::max_abs_diff(ga, gb) <= 1e-10);
}

TEST_CASE("structure decomposition of the parabola max: V from the gradient difference") {
    const PdgStructure pdg = parabola_pdg();
    const Vector xbar = Vector::Zero(2);
    const vucalc::VuPair vu = vucalc::decompose_pdg(pdg, xbar);

    REQUIRE(vu.dim_v() == 1);
    REQUIRE(vu.dim_u() == 1);
    // raw column is grad f_2 - grad f_1 = (-2, 0)
    CHECK(vu.v_raw(0, 0) == -2.0);
    CHECK(vu.v_raw(1, 0) == 0.0);
    CHECK(vu.v_basis.cols(0, 0) == 1.0); // normalized, sign-fixed
    CHECK(vu.u_basis.cols(1, 0) == 1.0);
}

TEST_CASE("structure decomposition rejects inconsistent selection values") {
    PdgStructure pdg = parabola_pdg();
    pdg.f_atoms[1].c = 0.5; // f_2(xbar) != f_1(xbar)
    CHECK_THROWS_AS(vucalc::decompose_pdg(pdg, Vector::Zero(2)), vucalc::PdgInconsistent);

    const auto rep = vucalc::check_pdg_consistency(pdg, Vector::Zero(2), 0.0, 1e-8);
    CHECK_FALSE(rep.all_pass);
    bool found_bad_f1 = false;
    for (const auto& e : rep.entries)
        if (e.label == "f[1]") found_bad_f1 = !e.pass;
    CHECK(found_bad_f1);
}

TEST_CASE("reduced index sets must stay independent and span the full structure space") {
    // duplicate constraints: phi_0 = phi_1 = x1
    PdgStructure dup;
    dup.f_atoms.push_back(QuadraticAtom::zero(2));
    Vector e1(2);
    e1 << 1, 0;
    dup.phi_atoms.push_back(QuadraticAtom::affine(e1, 0.0));
    dup.phi_atoms.push_back(QuadraticAtom::affine(e1, 0.0));
    dup.k_phi = {0, 1};
    CHECK_THROWS_AS(vucalc::decompose_pdg(dup, Vector::Zero(2)), vucalc::RankDeficientVBar);

    // dropping an independent constraint: reduced span is strictly smaller
    PdgStructure drop;
    drop.f_atoms.push_back(QuadraticAtom::zero(2));
    Vector e2(2);
    e2 << 0, 1;
    drop.phi_atoms.push_back(QuadraticAtom::affine(e1, 0.0));
    drop.phi_atoms.push_back(QuadraticAtom::affine(e2, 0.0));
    drop.k_phi = {0};
    CHECK_THROWS_AS(vucalc::decompose_pdg(drop, Vector::Zero(2)), vucalc::PdgInconsistent);
}

TEST_CASE("full-set independence check with a greedy reduced-set suggestion") {
    const PdgStructure pdg = parabola_pdg();
    const auto ok = vucalc::strong_transversality(pdg, Vector::Zero(2));
    CHECK(ok.holds);
    CHECK(ok.rank == 1);
    CHECK(ok.columns == 1);

    // add a redundant selection function f_3 = 2 f_2 - f_1 (gradient dependent)
    PdgStructure bad = parabola_pdg();
    Matrix a3 = 2.0 * bad.f_atoms[1].A - bad.f_atoms[0].A;
    Vector b3 = 2.0 * bad.f_atoms[1].b - bad.f_atoms[0].b;
    bad.f_atoms.emplace_back(a3, b3, 0.0);
    const auto rep = vucalc::strong_transversality(bad, Vector::Zero(2));
    CHECK_FALSE(rep.holds);
    CHECK(rep.rank == 1);
    CHECK(rep.columns == 2);
    REQUIRE(!rep.suggested_k_f.empty());
    CHECK(rep.suggested_k_f[0] == 0); // the base selection is always kept

    // the suggestion must itself be independent: re-check it
    PdgStructure reduced = bad;
    reduced.k_f = rep.suggested_k_f;
    reduced.k_phi = rep.suggested_k_phi;
    CHECK_NOTHROW(vucalc::decompose_pdg(reduced, Vector::Zero(2)));
}

TEST_CASE("structure route and generator route agree on the max function") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const Index m = 4;
        PdgStructure pdg;
        std::vector<Vector> grads;
        const Vector xbar = oracle::random_vector(rng, m);
        for (int i = 0; i < 3; ++i) {
            QuadraticAtom atom(oracle::random_symmetric(rng, m),
                               oracle::random_vector(rng, m), 0.0);
            atom.c = -vucalc::eval(atom, xbar); // exact value ties at xbar
            grads.push_back(vucalc::grad(atom, xbar));
            pdg.f_atoms.push_back(std::move(atom));
        }
        const vucalc::VuPair via_structure = vucalc::decompose_pdg(pdg, xbar);
        const auto model = SubdifferentialModel::from_generators(grads);
        const vucalc::VuPair via_model = vucalc::decompose(model);
        CHECK(oracle::subspaces_equal(via_structure.u_basis.cols, via_model.u_basis.cols,
                                      1e-9));
    }
}

TEST_CASE("base selection index 0 is mandatory in reduced sets") {
    PdgStructure pdg = parabola_pdg();
    pdg.k_f = {1};
    CHECK_THROWS_AS(vucalc::decompose_pdg(pdg, Vector::Zero(2)), vucalc::ValidationError);
}
