#include <catch_amalgamated.hpp>

#include <loewner/loewner_chain.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace loewner;
using namespace testutil;

namespace {

HerglotzFieldSpec linear_field(const Matrix& L, int horizon = 4) {
    HerglotzFieldSpec f;
    f.q = static_cast<int>(L.rows());
    f.Lambda = L;
    f.order = 4;
    f.horizon = horizon;
    return f;
}

HerglotzFieldSpec quadratic_1d(double alpha, double c, int horizon = 4) {
    Matrix L(1, 1);
    L << alpha;
    auto f = linear_field(L, horizon);
    f.terms.push_back({0, MultiIndex({2}), TimeFunction::constant(c)});
    return f;
}

HerglotzFieldSpec counterexample(double alpha, double c, int horizon = 4) {
    Matrix L(2, 2);
    L << alpha, 0, 0, 2 * alpha;
    auto f = linear_field(L, horizon);
    f.terms.push_back({1, MultiIndex({2, 0}), TimeFunction::constant(c)});
    return f;
}

Point pt(std::initializer_list<cplx> v) {
    Point z(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (auto x : v) z(k++) = x;
    return z;
}

} // namespace

TEST_CASE("time functions") {
    auto c = TimeFunction::constant(cplx(0.3, -0.1));
    CHECK(c(7.5) == cplx(0.3, -0.1));
    auto p = TimeFunction::piecewise({0, 1, 2.5}, {1.0, 2.0, 3.0});
    CHECK(p(-1) == cplx(1.0));
    CHECK(p(0.99) == cplx(1.0));
    CHECK(p(1.0) == cplx(2.0));
    CHECK(p(9) == cplx(3.0));
    auto s = TimeFunction::sampled({0, 2}, {0.0, 1.0});
    CHECK(std::abs(s(0.5) - 0.25) < 1e-15);
    CHECK(s(5) == cplx(1.0));
    CHECK(s.breakpoints().size() == 2);
    CHECK_THROWS_AS(TimeFunction::piecewise({0, 0}, {1.0, 2.0}), precondition_error);
    CHECK_THROWS_AS(TimeFunction::sampled({0}, {}), precondition_error);
}

TEST_CASE("field validation") {
    Matrix L(2, 2);
    L << -0.5, 0, 0, 0.1;
    auto f = linear_field(L);
    try {
        f.validate();
        FAIL("expected rejection");
    } catch (const precondition_error& e) {
        CHECK(std::string(e.what()).find("0.1") != std::string::npos);
    }
    auto g = quadratic_1d(-0.5, 0.2);
    CHECK_NOTHROW(g.validate());
    g.terms.push_back({0, MultiIndex({1}), TimeFunction::constant(1.0)});
    CHECK_THROWS_AS(g.validate(), precondition_error);
    auto h = quadratic_1d(-0.5, 0.2);
    h.terms.push_back({0, MultiIndex({5}), TimeFunction::constant(1.0)});
    CHECK_THROWS_AS(h.validate(), precondition_error);

    auto j = field_from_json(field_to_json(counterexample(-0.4, 0.3)));
    CHECK(j.terms.size() == 1);
    CHECK(j.terms[0].component == 1);
    CHECK_THROWS_AS(field_from_json(json::parse(R"({"Lambda": 3})")), format_error);
}

TEST_CASE("integrate_jet") {
    SECTION("linear field matches the matrix exponential") {
        std::mt19937_64 rng(201);
        for (int q = 1; q <= 3; ++q) {
            Matrix L = random_matrix(rng, q) * 0.3;
            L -= Matrix::Identity(q, q) * (0.2 + spectral_radius(L));
            auto f = linear_field(L);
            auto J = integrate_jet(f, 0.3, 1.7, 3);
            CHECK(max_abs(Matrix(J.linear_part() - oracle::expm(Matrix(1.4 * L)))) <= 1e-10);
            CHECK(J.max_abs() == Catch::Approx(max_abs(J.linear_part())));
        }
    }
    SECTION("t = s is the identity") {
        CHECK(integrate_jet(quadratic_1d(-0.5, 0.2), 2.0, 2.0, 4) == PolyJet::identity(1, 4));
    }
    SECTION("scalar quadratic closed form") {
        const double a = -0.6, c = 0.25;
        auto f = quadratic_1d(a, c);
        for (double t : {0.5, 1.0, 2.0}) {
            auto J = integrate_jet(f, 0, t, 3);
            CHECK(std::abs(J.coeff(0, {2}) - c * (std::exp(2 * a * t) - std::exp(a * t)) / a) <= 1e-8);
        }
    }
    SECTION("cocycle and linear part on random triples") {
        std::mt19937_64 rng(203);
        std::uniform_real_distribution<double> u(0, 3);
        Matrix L(2, 2);
        L << -0.4, 0.1, -0.05, -0.7;
        auto f = linear_field(L);
        f.terms.push_back({0, MultiIndex({1, 1}), TimeFunction::piecewise({0, 1.3}, {0.2, -0.1})});
        f.terms.push_back({1, MultiIndex({0, 3}), TimeFunction::sampled({0, 1, 2}, {0.1, cplx(0.3, 0.1), 0.0})});
        const double tol = 1e-10;
        for (int trial = 0; trial < 4; ++trial) {
            double a = u(rng), b = u(rng), c = u(rng);
            double s = std::min({a, b, c}), t = std::max({a, b, c}), m = a + b + c - s - t;
            auto Jst = integrate_jet(f, s, t, 4, tol);
            auto Jmt = integrate_jet(f, m, t, 4, tol), Jsm = integrate_jet(f, s, m, 4, tol);
            CHECK(max_difference(compose(Jmt, Jsm, 4), Jst) <= 10 * tol * (1 + Jst.max_abs()));
            CHECK(max_abs(Matrix(Jst.linear_part() - matrix_exp(Matrix((t - s) * L)))) <= 10 * tol);
        }
    }
    SECTION("piecewise field equals the composition of its pieces") {
        auto f = quadratic_1d(-0.5, 0.0);
        f.terms[0].coeff = TimeFunction::piecewise({0, 0.7}, {0.3, -0.2});
        auto g1 = quadratic_1d(-0.5, 0.3), g2 = quadratic_1d(-0.5, -0.2);
        auto want = compose(integrate_jet(g2, 0.7, 1.5, 4), integrate_jet(g1, 0.2, 0.7, 4), 4);
        CHECK(max_difference(integrate_jet(f, 0.2, 1.5, 4), want) <= 1e-9);
    }
}

TEST_CASE("integrate_point") {
    Matrix L(2, 2);
    L << -0.3, 0, 0.2, -0.5;
    auto lin = linear_field(L);
    Point z = pt({0.3, cplx(0.1, -0.2)});
    CHECK((integrate_point(lin, 0, 2, z) - matrix_exp(Matrix(2 * L)) * z).norm() <= 1e-12);
    auto f = counterexample(-0.4, 0.5);
    // exact flow: z1 e^{at}, z2 e^{2at} + c t e^{2at} z1^2
    double t = 1.5, a = -0.4;
    Point want = pt({z(0) * std::exp(a * t), std::exp(2 * a * t) * (z(1) + 0.5 * t * z(0) * z(0))});
    CHECK((integrate_point(f, 0, t, z) - want).norm() <= 1e-12);
}

TEST_CASE("discretize") {
    SECTION("linear field") {
        Matrix L(2, 2);
        L << -0.3, 0, 0.2, -0.5;
        auto fam = discretize(linear_field(L), 3, 3);
        CHECK(fam.horizon() == 3);
        for (const auto& s : fam.original_steps()) {
            CHECK(max_abs(Matrix(s.linear_part() - matrix_exp(L))) == 0);
            CHECK(s.max_abs() == max_abs(s.linear_part()));
        }
    }
    SECTION("autonomous field repeats its step") {
        auto fam = discretize(quadratic_1d(-0.5, 0.2), 4, 4);
        for (const auto& s : fam.steps()) CHECK(max_difference(s, fam.steps()[0]) <= 1e-10);
    }
    SECTION("counterexample coefficient") {
        const double a = -0.4, c = 0.3;
        auto fam = discretize(counterexample(a, c), 2, 3);
        CHECK(std::abs(fam.original_steps()[0].coeff(1, {2, 0}) - c * std::exp(2 * a)) <= 1e-8);
        auto rep = detect_resonances(std::span<const cplx>(fam.form().eigenvalues), ResonanceMode::Multiplicative, 1e-9);
        CHECK_FALSE(rep.empty());
    }
    SECTION("horizon covers the last breakpoint") {
        auto f = quadratic_1d(-0.5, 0.0);
        f.terms[0].coeff = TimeFunction::piecewise({0, 5.5}, {0.3, -0.2});
        CHECK(effective_horizon(f, 2) == 6);
    }
}

TEST_CASE("chains from fields") {
    ChainOptions opt;
    opt.order = 4;
    opt.pad = 24;
    SECTION("linear field gives e^{-Lambda t}") {
        Matrix L(2, 2);
        L << -0.3, 0, 0.1, -0.45;
        auto ch = build_chain(linear_field(L, 3), 3, opt);
        Point z = pt({0.02, cplx(0, 0.03)});
        for (double t : {0.0, 0.4, 1.0, 2.3})
            CHECK((ch.f(t, z) - matrix_exp(Matrix(-t * L)) * z).norm() <= 1e-12);
        REQUIRE(ch.certificate);
        CHECK(ch.certificate->passed());
        auto K = halton_ball(2, 0.5 * ch.validity_radius(), 20);
        std::vector<std::pair<double, Point>> S;
        for (std::size_t k = 0; k < K.size(); ++k) S.push_back({0.1 + 0.09 * static_cast<double>(k), K[k]});
        CHECK(pde_residual(ch, S, 1e-3).max_abs <= 1e-8);
    }
    SECTION("scalar quadratic field") {
        auto ch = build_chain(quadratic_1d(-0.6, 0.4, 3), 3, opt);
        REQUIRE(ch.certificate);
        CHECK(ch.certificate->passed());
        const double rho = 0.5 * ch.validity_radius();
        auto K = halton_ball(1, rho, 12);
        for (auto [s, t] : {std::pair{0.3, 0.8}, std::pair{0.5, 2.2}, std::pair{1.0, 3.0}})
            for (const auto& z : K)
                CHECK((ch.f(t, ch.phi(s, t, z)) - ch.f(s, z)).norm() <= 1e-8 * ch.f(s, z).norm());
        // normalization and jets
        auto J = ch.f_jet(1.5);
        CHECK(std::abs(J.coeff(0, {1}) - std::exp(0.6 * 1.5)) <= 1e-9);
        Point zs = K[2] * 0.05;
        CHECK(std::abs(J.evaluate(zs)(0) - ch.f(1.5, zs)(0)) <= 1e-7 * std::abs(ch.f(1.5, zs)(0)));
        // PDE residual
        auto Z = halton_ball(1, rho, 50);
        std::vector<std::pair<double, Point>> S;
        for (std::size_t k = 0; k < Z.size(); ++k) S.push_back({0.05 + 0.038 * static_cast<double>(k), Z[k]});
        auto r1 = pde_residual(ch, S, 1e-3);
        CHECK(r1.max_abs <= 1e-6);
        std::vector<std::pair<double, Point>> S2(S.begin(), S.begin() + 6);
        auto a = pde_residual(ch, S2, 4e-2), b = pde_residual(ch, S2, 2e-2);
        CHECK(a.max_abs / b.max_abs >= 3);
        CHECK(a.max_abs / b.max_abs <= 5);
    }
    SECTION("resonant counterexample") {
        auto ch = build_chain(counterexample(-0.4, 0.3, 3), 3, opt);
        CHECK_FALSE(ch.result.resonances.empty());
        CHECK_FALSE(ch.certificate.has_value());
        bool nonlinear = false;
        for (const auto& t : ch.result.T) nonlinear |= t.jet().top_degree() > 1;
        CHECK(nonlinear);
        auto K = halton_ball(2, 0.5 * ch.validity_radius(), 6);
        for (const auto& z : K) CHECK((ch.f(2.0, ch.phi(0.5, 2.0, z)) - ch.f(0.5, z)).norm() <= 1e-8 * ch.f(0.5, z).norm());
    }
}

TEST_CASE("verify_subordination_chain") {
    ChainOptions opt;
    opt.order = 4;
    opt.pad = 24;
    auto ch = build_chain(quadratic_1d(-0.6, 0.4, 3), 3, opt);
    auto v = chain_view(ch, time_grid(3.0, 0.5));
    auto K = halton_ball(1, v.radius, 16);
    auto ok = verify_subordination_chain(v, K);
    CHECK(ok.passed());
    auto id = chain_identity_check(v, K);
    CHECK(id.passed());

    SECTION("unbounded normalization") {
        auto bad = v;
        bad.f = [L = v.Lambda](double t, const Point& z) {
            Point w = z;
            w(0) += (1 + 10 * t) * z(0) * z(0);
            return Point(matrix_exp(Matrix(-t * L)) * w);
        };
        for (std::size_t g = 0; g < bad.times.size(); ++g) {
            PolyJet J = PolyJet::identity(1, 4);
            J.set(0, {2}, 1 + 10 * bad.times[g]);
            bad.jets[g] = compose(PolyJet::linear(matrix_exp(Matrix(-bad.times[g] * v.Lambda)), 4), J, 4);
        }
        auto r = verify_subordination_chain(bad, K);
        CHECK_FALSE(r.bounded_ok);
        REQUIRE(r.offending_t);
        CHECK(*r.offending_t > 0);
    }
    SECTION("constant identity chain") {
        auto bad = v;
        for (auto& j : bad.jets) j = PolyJet::identity(1, 4);
        bad.f = [](double, const Point& z) { return z; };
        auto r = verify_subordination_chain(bad, K);
        CHECK_FALSE(r.linear_ok);
        CHECK_FALSE(r.passed());
    }
    SECTION("empty sample set") {
        CHECK_THROWS_AS(verify_subordination_chain(v, std::vector<Point>{}), precondition_error);
    }
}

TEST_CASE("attraction_check") {
    Matrix A(2, 2);
    A << 0.5, 0, 0, 0.3;
    auto fam = DiscreteEvolutionFamily::from_steps({PolyJet::linear(A, 2)}, TailPolicy::Constant);
    std::vector<Point> K{pt({0, 0}), pt({0.9, 0}), pt({0, 0.9})};
    auto r = attraction_check(fam, K, 1e-6);
    CHECK(r[0].steps == 0);
    CHECK(r[1].steps == 20);
    for (const auto& e : r) CHECK(e.converged);

    auto ch = build_chain(quadratic_1d(-0.6, 0.4, 2), 2, ChainOptions{});
    auto far = attraction_check(ch.result.family, std::vector<Point>{pt({0.8}), pt({cplx(-0.5, 0.5)})}, 1e-8);
    for (const auto& e : far) CHECK(e.converged);
}
