#include <catch_amalgamated.hpp>

#include <loewner/normal_form.hpp>

#include "test_util.hpp"

using namespace loewner;
using namespace testutil;

namespace {

PolyJet quadratic_1d(double lambda, double c) {
    PolyJet f(1, 2);
    f.set(0, {1}, lambda).set(0, {2}, c);
    return f;
}

Point pt(std::initializer_list<cplx> v) {
    Point z(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (auto x : v) z(k++) = x;
    return z;
}

// random perturbations of a fixed linear part, bounded quadratic and cubic terms
std::vector<PolyJet> random_steps(std::mt19937_64& rng, const Matrix& A, int count, double size) {
    const int q = static_cast<int>(A.rows());
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<PolyJet> steps;
    for (int n = 0; n < count; ++n) {
        PolyJet f = PolyJet::linear(A, 3);
        const auto& T = f.table();
        for (int j = 0; j < q; ++j)
            for (std::size_t m = T.offset(2); m < f.row_size(); ++m) f.at(j, m) = size * cplx(u(rng), u(rng));
        steps.push_back(f);
    }
    return steps;
}

} // namespace

TEST_CASE("defect examples") {
    SECTION("linear family has no defect") {
        Matrix A(2, 2);
        A << 0.6, 0, 0, 0.3;
        auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 3)}, TailPolicy::Constant);
        auto id = PolyJet::identity(2, 3), T = PolyJet::linear(fam.A(), 3);
        for (int i = 2; i <= 3; ++i) CHECK(defect(fam, id, id, T, 0, i).max_abs() == 0);
    }
    SECTION("one-dimensional quadratic") {
        auto fam = DiscreteEvolutionFamily::from_steps({quadratic_1d(0.5, 0.1)}, TailPolicy::Constant);
        auto id = PolyJet::identity(1, 2);
        auto P = defect(fam, id, id, PolyJet::linear(fam.A(), 2), 0, 2);
        CHECK(std::abs(P.coeff(0, {2}) - 0.1) < 1e-16);
    }
    SECTION("resonant defect") {
        PolyJet f(2, 2);
        f.set(0, {1, 0}, 0.4).set(1, {0, 1}, 0.16).set(1, {2, 0}, 0.3);
        auto fam = DiscreteEvolutionFamily::from_steps({f}, TailPolicy::Constant);
        auto id = PolyJet::identity(2, 2);
        auto P = defect(fam, id, id, PolyJet::linear(fam.A(), 2), 0, 2);
        CHECK(std::abs(P.coeff(1, {2, 0}) - 0.3) < 1e-16);
        auto split = spectral_split(fam.form(), 2);
        auto parts = split_forcing(P, split);
        CHECK(parts.resonant.max_abs() == P.max_abs());
    }
}

TEST_CASE("estimate_constants") {
    Matrix A(1, 1);
    A << 0.5;
    auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 2)}, TailPolicy::Constant);
    auto c = estimate_constants(fam, {PolyJet::linear(fam.A(), 2)}, 2);
    CHECK(std::abs(c.alpha - 0.75) < 1e-15);
    CHECK(std::abs(c.beta - 2.0) < 1e-15);
    CHECK(c.ell == 3);

    Matrix B(2, 2);
    B << 0.6, 0, 0.05, 0.3;
    auto fam2 = DiscreteEvolutionFamily::from_steps({PolyJet::linear(B, 2)}, TailPolicy::Constant);
    auto c2 = estimate_constants(fam2, {PolyJet::linear(fam2.A(), 2)}, 3);
    CHECK(std::abs(c2.beta - max_row_sum(Matrix(fam2.A().inverse()))) < 1e-12);
    CHECK(c2.ell >= 2);
    CHECK(std::pow(c2.alpha, c2.ell) * c2.beta < 1);
}

TEST_CASE("linear family") {
    Matrix A(2, 2);
    A << 0.6, 0, 0.1, 0.35;
    auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 2)}, TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 4;
    opt.pad = 8;
    auto res = build_normal_form(fam, opt);
    for (const auto& k : res.k) CHECK(k == PolyJet::identity(2, res.order));
    for (const auto& t : res.T) CHECK(t.jet() == PolyJet::linear(fam.A(), res.order));
    Point z = pt({cplx(0.2, 0.1), cplx(-0.3, 0.05)});
    CHECK((res.h(0, z) - z).norm() < 1e-15);
    // f_n = A^{-n}
    Matrix An = Matrix::Identity(2, 2);
    for (int n = 0; n < 4; ++n) {
        CHECK((res.chain(static_cast<std::size_t>(n), z) - An.inverse() * z).norm() < 1e-12);
        An = fam.A() * An;
    }
}

TEST_CASE("one-dimensional Koenigs collapse") {
    auto fam = DiscreteEvolutionFamily::from_steps({quadratic_1d(0.5, 0.1)}, TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 8;
    opt.pad = 40;
    auto res = build_normal_form(fam, opt);
    CHECK(std::abs(res.k[0].coeff(0, {2}) - 0.4) < 1e-14);
    for (const auto& t : res.T) CHECK(t.jet() == PolyJet::linear(fam.A(), res.order));
    CHECK(res.resonances.empty());
    for (double x : {0.05, 0.1, 0.9}) {
        cplx want = oracle::koenigs(0.5, 0.1, x, 60);
        CHECK(std::abs(res.h(0, pt({x}))(0) - want) <= 1e-8);
    }
    auto ext = extend_intertwining(res, 0, std::vector<Point>{pt({0.9}), pt({cplx(0.3, 0.6)})});
    CHECK(ext.u_gap <= 1e-10);
    CHECK(ext.entry[0] > 0);
}

TEST_CASE("resonant autonomous family") {
    PolyJet f(2, 2);
    f.set(0, {1, 0}, 0.4).set(1, {0, 1}, 0.16).set(1, {2, 0}, 0.3).set(0, {1, 1}, 0.05);
    auto fam = DiscreteEvolutionFamily::from_steps({f}, TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 4;
    opt.pad = 24;
    auto res = build_normal_form(fam, opt);
    REQUIRE(res.resonances.resonances.size() == 1);
    for (const auto& t : res.T) {
        CHECK(std::abs(t.jet().coeff(1, {2, 0}) - 0.3) < 1e-12);
        CHECK(is_triangular(t.jet()));
        CHECK(t.jet().top_degree() <= res.constants.p - 1);
    }
    CHECK(std::abs(res.k[0].coeff(1, {2, 0})) < 1e-14);
    REQUIRE(res.absorbed.size() == 1);
    CHECK(res.absorbed[0].component == 1);
    CHECK(res.max_residual <= 1e-10);
}

TEST_CASE("conjugacy identity on random families") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 6; ++trial) {
        int q = 1 + trial % 3;
        auto lam = random_spectrum(rng, q, 0.45, 0.8);
        Matrix V = random_matrix(rng, q);
        Matrix A = V * random_lower(rng, lam, 0.2) * V.inverse();
        auto steps = random_steps(rng, A, 6, 0.1);
        auto fam = DiscreteEvolutionFamily::from_steps(steps, trial % 2 ? TailPolicy::Zero : TailPolicy::Constant);
        NormalFormOptions opt;
        opt.order = 3;
        opt.pad = 12;
        auto res = build_normal_form(fam, opt);
        CHECK(res.order >= res.constants.ell);
        CHECK(res.max_residual <= 1e-10);
        for (const auto& kk : res.k) CHECK(max_abs(Matrix(kk.linear_part() - Matrix::Identity(q, q))) == 0);
        if (res.resonances.empty())
            for (const auto& t : res.T) CHECK(t.jet() == PolyJet::linear(fam.A(), res.order));
    }
}

TEST_CASE("orbits contract and Cauchy increments obey the rate") {
    std::mt19937_64 rng(103);
    Matrix A(2, 2);
    A << 0.7, 0, 0, 0.5;
    auto fam = DiscreteEvolutionFamily::from_steps(random_steps(rng, A, 5, 0.15), TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 4;
    opt.pad = 40;
    opt.samples = halton_ball(2, 1.0, 20);
    auto probe = build_normal_form(fam, opt);
    for (auto& z : opt.samples) z *= probe.constants.r;
    auto res = build_normal_form(fam, opt);
    const auto& c = res.constants;
    REQUIRE_FALSE(res.convergence_log.empty());
    for (const auto& e : res.convergence_log) CHECK(e.increment <= e.bound);
    for (const auto& z : opt.samples)
        for (std::size_t m = 1; m < 6; ++m)
            CHECK(fam.apply(0, m, z).norm() <= std::pow(c.alpha, static_cast<double>(m)) * z.norm() * (1 + 1e-12));
    // cocycle coherence
    Point z = opt.samples[3];
    CHECK((fam.apply(0, 5, z) - fam.apply(2, 5, fam.apply(0, 2, z))).norm() == 0);
    Point zs = 0.05 * z;
    CHECK((fam.jet(0, 3, 4).evaluate(zs) - fam.apply(0, 3, zs)).norm() < 1e-8 * zs.norm());
}

TEST_CASE("discrete chain") {
    std::mt19937_64 rng(107);
    Matrix A(2, 2);
    A << 0.65, 0, 0.1, 0.45;
    auto fam = DiscreteEvolutionFamily::from_steps(random_steps(rng, A, 4, 0.1), TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 5;
    opt.pad = 40;
    auto res = build_normal_form(fam, opt);
    auto K = halton_ball(2, 0.5, 12);
    CHECK((res.chain(0, K[0]) - res.h(0, K[0])).norm() == 0);
    CHECK(chain_identity_residual(res, K, 3) <= 1e-9);
    // chain jet agrees with the pointwise chain near 0
    Point z = K[1] * 0.01;
    CHECK((res.chain_jet(2).evaluate(z) - res.chain(2, z)).norm() <= 1e-9 * z.norm());
}

TEST_CASE("range growth") {
    SECTION("scalar multiple of identity") {
        Matrix A = 0.5 * Matrix::Identity(2, 2);
        auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 2)}, TailPolicy::Constant);
        NormalFormOptions opt;
        opt.pad = 4;
        auto res = build_normal_form(fam, opt);
        auto r = range_growth_check(res, 0.1, 8);
        for (std::size_t n = 0; n < r.size(); ++n) CHECK(std::abs(r[n] - 0.1 * std::pow(2.0, n)) <= 1e-12 * r[n]);
    }
    SECTION("diagonal") {
        Matrix A(2, 2);
        A << 0.5, 0, 0, 0.3;
        auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 2)}, TailPolicy::Constant);
        NormalFormOptions opt;
        opt.pad = 4;
        auto res = build_normal_form(fam, opt);
        auto r = range_growth_check(res, 0.1, 10);
        for (std::size_t n = 0; n < r.size(); ++n) {
            CHECK(r[n] >= 0.1 * std::pow(2.0, n) * (1 - 1e-12));
            if (n) CHECK(r[n] >= r[n - 1]);
        }
    }
}

TEST_CASE("univalence_check") {
    auto K = halton_ball(1, 0.5, 100);
    auto id = PolyJet::identity(1, 3);
    auto r = univalence_check([&](const Point& z) { return z; }, &id, K, 1e-3);
    CHECK(r.passed());

    PolyJet sq(1, 2);
    sq.set(0, {2}, 1.0);
    std::vector<Point> pm{pt({0.5}), pt({-0.5})};
    auto bad = univalence_check([&](const Point& z) { return sq(z); }, &sq, pm, 1e-3);
    CHECK_FALSE(bad.passed());
    CHECK_FALSE(bad.injective_ok);
    CHECK_FALSE(bad.jacobian_ok);

    auto fam = DiscreteEvolutionFamily::from_steps({quadratic_1d(0.5, 0.1)}, TailPolicy::Constant);
    NormalFormOptions opt;
    opt.order = 6;
    opt.pad = 40;
    auto res = build_normal_form(fam, opt);
    auto good = univalence_check([&](const Point& z) { return res.h(0, z); }, &res.k[0], K, 1e-3);
    CHECK(good.passed());
}
