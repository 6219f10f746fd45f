#include <catch_amalgamated.hpp>

#include <loewner/jet_json.hpp>

#include "test_util.hpp"

using namespace loewner;
using namespace testutil;

TEST_CASE("enumerate_indices order and counts") {
    auto v = enumerate_indices(2, 2);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == MultiIndex{2, 0});
    CHECK(v[1] == MultiIndex{1, 1});
    CHECK(v[2] == MultiIndex{0, 2});
    CHECK(enumerate_indices(1, 5) == std::vector<MultiIndex>{MultiIndex{5}});
    CHECK(enumerate_indices(3, 2).size() == 6);
    for (int q = 1; q <= 4; ++q)
        for (int i = 0; i <= 6; ++i) {
            auto idx = enumerate_indices(q, i);
            CHECK(idx.size() == count_indices(q, i));
            for (std::size_t k = 1; k < idx.size(); ++k) CHECK(graded_before(idx[k - 1], idx[k]));
        }
    CHECK_THROWS_AS(enumerate_indices(0, 1), precondition_error);
}

TEST_CASE("homogeneous space dimension") {
    for (int q = 1; q <= 4; ++q)
        for (int i = 2; i <= 5; ++i) CHECK(HomogeneousMap(q, i).basis_size() == q * binomial(i + q - 1, q - 1));
}

TEST_CASE("compose small cases") {
    SECTION("identity") {
        auto id = PolyJet::identity(3, 4);
        CHECK(compose(id, id, 4) == id);
    }
    SECTION("one variable") {
        PolyJet f(1, 2), g(1, 2);
        f.set(0, {1}, 1.0).set(0, {2}, 1.0);
        g.set(0, {1}, 2.0);
        auto h = compose(f, g, 2);
        CHECK(h.coeff(0, {1}) == cplx(2.0));
        CHECK(h.coeff(0, {2}) == cplx(4.0));
    }
    SECTION("two variables, degree two") {
        PolyJet f(2, 2), g(2, 2);
        f.set(0, {1, 0}, 1.0).set(1, {0, 1}, 1.0).set(1, {2, 0}, 1.0);
        g.set(0, {1, 0}, 1.0).set(0, {0, 2}, 1.0).set(1, {0, 1}, 1.0);
        auto h = compose(f, g, 2);
        PolyJet want(2, 2);
        want.set(0, {1, 0}, 1.0).set(0, {0, 2}, 1.0).set(1, {0, 1}, 1.0).set(1, {2, 0}, 1.0);
        CHECK(h == want);
    }
    SECTION("dimension mismatch") {
        CHECK_THROWS_AS(compose(PolyJet(1, 2), PolyJet(2, 2), 2), precondition_error);
    }
    SECTION("effective order is the minimum") {
        CHECK(compose(PolyJet::identity(2, 5), PolyJet::identity(2, 3), 9).order() == 3);
    }
}

TEST_CASE("compose matches expansion oracle") {
    std::mt19937_64 rng(7);
    for (int q = 1; q <= 3; ++q)
        for (int trial = 0; trial < 5; ++trial) {
            int N = 5 - q / 2;
            auto f = random_jet(rng, q, N), g = random_jet(rng, q, N);
            auto h = compose(f, g, N);
            auto ref = oracle::compose(to_oracle(f), to_oracle(g), N);
            CHECK(oracle_distance(h, ref) <= 1e-12 * std::max(1.0, h.max_abs()));
        }
}

TEST_CASE("compose is associative") {
    std::mt19937_64 rng(11);
    for (int q = 1; q <= 3; ++q) {
        auto f = random_jet(rng, q, 5), g = random_jet(rng, q, 5), h = random_jet(rng, q, 5);
        auto a = compose(compose(f, g, 5), h, 5), b = compose(f, compose(g, h, 5), 5);
        CHECK(max_difference(a, b) <= 1e-12 * std::max(1.0, a.max_abs()));
    }
}

TEST_CASE("invert") {
    SECTION("linear") {
        Matrix A(2, 2);
        A << 0.5, 0.0, 0.25, 0.4;
        auto g = invert(PolyJet::linear(A, 3), 3);
        CHECK((g.linear_part() - A.inverse()).norm() < 1e-15);
        CHECK(g.top_degree() == 1);
    }
    SECTION("series reversion") {
        PolyJet f(1, 3);
        f.set(0, {1}, 1.0).set(0, {2}, 1.0);
        auto g = invert(f, 3);
        CHECK(std::abs(g.coeff(0, {1}) - 1.0) < 1e-15);
        CHECK(std::abs(g.coeff(0, {2}) + 1.0) < 1e-15);
        CHECK(std::abs(g.coeff(0, {3}) - 2.0) < 1e-15);
    }
    SECTION("random one-variable against reversion oracle") {
        std::mt19937_64 rng(3);
        auto f = random_jet(rng, 1, 7);
        std::vector<cplx> a(8);
        for (int k = 1; k <= 7; ++k) a[static_cast<std::size_t>(k)] = f.coeff(0, {k});
        auto b = oracle::reversion_1d(a, 7);
        auto g = invert(f, 7);
        for (int k = 1; k <= 7; ++k)
            CHECK(std::abs(g.coeff(0, {k}) - b[static_cast<std::size_t>(k)]) <= 1e-10 * std::abs(b[static_cast<std::size_t>(k)]) + 1e-13);
    }
    SECTION("two-sided inverse and involution") {
        std::mt19937_64 rng(5);
        for (int q = 1; q <= 3; ++q) {
            auto f = random_jet(rng, q, 5);
            auto g = invert(f, 5);
            auto id = PolyJet::identity(q, 5);
            double scale = std::max({1.0, f.max_abs(), g.max_abs()});
            CHECK(max_difference(compose(f, g, 5), id) <= 1e-12 * scale);
            CHECK(max_difference(compose(g, f, 5), id) <= 1e-12 * scale);
            CHECK(max_difference(invert(g, 5), f) <= 1e-11 * scale);
        }
    }
    SECTION("singular linear part") {
        PolyJet f(2, 3);
        f.set(0, {1, 0}, 1.0).set(1, {1, 0}, 1.0);
        CHECK_THROWS_AS(invert(f, 3), precondition_error);
    }
}

TEST_CASE("homogeneous_part") {
    Matrix A(2, 2);
    A << 0.5, 0, 0, 0.3;
    CHECK(homogeneous_part(PolyJet::linear(A, 4), 2).max_abs() == 0.0);
    PolyJet f(1, 3);
    f.set(0, {1}, 1.0).set(0, {2}, 3.0);
    CHECK(homogeneous_part(f, 2).coeff(0, {2}) == cplx(3.0));
    CHECK_THROWS_AS(homogeneous_part(f, 4), precondition_error);

    std::mt19937_64 rng(9);
    auto g = random_jet(rng, 3, 4);
    PolyJet sum(3, 4);
    for (int i = 1; i <= 4; ++i) sum = sum + homogeneous_part(g, i).to_jet(4);
    CHECK(sum == g);
}

TEST_CASE("evaluate") {
    Point z(2);
    z << cplx(0.3, 0.1), cplx(-0.2, 0.4);
    CHECK((PolyJet::identity(2, 3).evaluate(z) - z).norm() == 0.0);
    PolyJet f(1, 2);
    f.set(0, {1}, 1.0).set(0, {2}, 1.0);
    Point x(1);
    x << 0.1;
    CHECK(std::abs(f(x)(0) - 0.11) < 1e-16);

    std::mt19937_64 rng(13);
    for (int q = 1; q <= 3; ++q) {
        auto a = random_jet(rng, q, 4), b = random_jet(rng, q, 4);
        auto c = compose(a, b, 4);
        Point w = random_point(rng, q, 1e-3);
        double scale = a.max_abs() * std::pow(1 + b.max_abs(), 5);
        CHECK((c(w) - a(b(w))).norm() <= 1e-12 * scale);
    }
}

TEST_CASE("jacobian agrees with finite differences") {
    std::mt19937_64 rng(17);
    auto f = random_jet(rng, 2, 4);
    Point z = random_point(rng, 2, 0.3);
    Matrix J = f.jacobian(z);
    double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
        Point e = Point::Zero(2);
        e(k) = h;
        Point d = (f(z + e) - f(z - e)) / (2 * h);
        CHECK((J.col(k) - d).norm() < 1e-7);
    }
}

TEST_CASE("triangular closure") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    auto tri = [&](int q) {
        PolyJet f(q, 4);
        const auto& T = f.table();
        for (int j = 0; j < q; ++j) {
            f.at(j, 1 + static_cast<std::size_t>(j)) = 0.9 - 0.2 * j;
            for (std::size_t m = 1; m < f.row_size(); ++m) {
                const auto& I = T.index(m);
                bool ok = true;
                for (int k = j; k < q; ++k) ok = ok && I[k] == 0;
                if (ok) f.at(j, m) = cplx(u(rng), u(rng));
            }
        }
        return f;
    };
    for (int q = 1; q <= 3; ++q) {
        auto f = tri(q), g = tri(q);
        REQUIRE(is_triangular(f));
        CHECK(is_triangular(compose(f, g, 4)));
        CHECK(is_triangular(invert(f, 4)));
        TriangularJet t(f);
        Point z = random_point(rng, q, 0.4);
        CHECK((t.inverse_at(t.evaluate(z)) - z).norm() < 1e-14);
    }
    PolyJet bad(2, 2);
    bad.set(0, {1, 0}, 0.5).set(1, {0, 1}, 0.3).set(0, {0, 2}, 1.0);
    CHECK_FALSE(is_triangular(bad));
    CHECK_THROWS_AS(TriangularJet(bad), precondition_error);
}

TEST_CASE("JSON round trip is bit exact") {
    std::mt19937_64 rng(23);
    auto f = random_jet(rng, 3, 4);
    f.at(1, 5) = 0.0;
    auto j = jet_to_json(f);
    auto g = jet_from_json(json::parse(j.dump()));
    CHECK(g.order() == f.order());
    CHECK(g == f);
    CHECK(j["terms"][0]["component"] == 1);
    CHECK_THROWS_AS(jet_from_json(json::parse(R"({"q":1,"order":2,"terms":[{"component":2,"index":[1],"re":1,"im":0}]})")),
                    format_error);
}
