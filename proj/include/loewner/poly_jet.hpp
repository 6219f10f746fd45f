#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "monomial_table.hpp"

namespace loewner {

using cplx = std::complex<double>;
using Point = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

// Truncated polynomial map C^q -> C^q fixing 0.
//
// Components are 0-based in the C++ API (1-based only in JSON).
// Coefficients of component j sit at [j*size + m], m the graded-lex position
// of the monomial; m = 0 is the constant slot and is always zero.
// Positions do not depend on the truncation order, so truncating a jet keeps a
// prefix of each row.
class PolyJet {
public:
    PolyJet() = default;
    PolyJet(int q, int order) : q_(q), N_(order) {
        if (q < 1 || order < 1) throw precondition_error("PolyJet: need q >= 1 and order >= 1");
        size_ = monomial_table(q, order).size();
        c_.assign(static_cast<std::size_t>(q) * size_, cplx{});
    }

    static PolyJet identity(int q, int order) {
        return linear(Matrix::Identity(q, q), order);
    }

    static PolyJet linear(const Matrix& A, int order) {
        if (A.rows() != A.cols()) throw precondition_error("linear jet needs a square matrix");
        PolyJet f(static_cast<int>(A.rows()), order);
        for (int j = 0; j < f.q_; ++j)
            for (int k = 0; k < f.q_; ++k) f.at(j, 1 + static_cast<std::size_t>(k)) = A(j, k);
        return f;
    }

    int dim() const { return q_; }
    int order() const { return N_; }
    std::size_t row_size() const { return size_; }
    const MonomialTable& table() const { return monomial_table(q_, N_); }

    cplx at(int j, std::size_t m) const { return c_[static_cast<std::size_t>(j) * size_ + m]; }
    cplx& at(int j, std::size_t m) { return c_[static_cast<std::size_t>(j) * size_ + m]; }

    /// Coefficient of z^I in component j; 0 when absent or past the order.
    cplx coeff(int j, const MultiIndex& I) const {
        check_component(j);
        if (I.degree() == 0) return {};
        long m = table().position(I);
        return m < 0 ? cplx{} : at(j, static_cast<std::size_t>(m));
    }

    PolyJet& set(int j, const MultiIndex& I, cplx v) {
        check_component(j);
        if (I.degree() == 0) throw precondition_error("jets have no constant term");
        long m = table().position(I);
        if (m < 0) throw precondition_error("monomial degree exceeds jet order");
        at(j, static_cast<std::size_t>(m)) = v;
        return *this;
    }

    Matrix linear_part() const {
        Matrix A(q_, q_);
        for (int j = 0; j < q_; ++j)
            for (int k = 0; k < q_; ++k) A(j, k) = at(j, 1 + static_cast<std::size_t>(k));
        return A;
    }

    /// Highest degree carrying a nonzero coefficient (0 for the zero jet).
    int top_degree() const {
        const auto& T = table();
        int d = 0;
        for (int j = 0; j < q_; ++j)
            for (std::size_t m = 1; m < size_; ++m)
                if (at(j, m) != cplx{}) d = std::max(d, T.degree(m));
        return d;
    }

    double max_abs() const {
        double r = 0;
        for (auto& v : c_) r = std::max(r, std::abs(v));
        return r;
    }

    /// Same polynomial viewed at another order: drops or zero-pads terms.
    PolyJet with_order(int order) const {
        PolyJet g(q_, order);
        std::size_t keep = std::min(size_, g.size_);
        for (int j = 0; j < q_; ++j)
            for (std::size_t m = 0; m < keep; ++m) g.at(j, m) = at(j, m);
        return g;
    }

    PolyJet truncated(int order) const {
        if (order > N_) throw precondition_error("cannot truncate above the jet order");
        return with_order(order);
    }

    Point evaluate(const Point& z) const {
        check_point(z);
        auto v = monomial_values(z);
        Point out = Point::Zero(q_);
        for (int j = 0; j < q_; ++j) {
            cplx s{};
            for (std::size_t m = 1; m < size_; ++m) s += at(j, m) * v[m];
            out(j) = s;
        }
        return out;
    }

    Point operator()(const Point& z) const { return evaluate(z); }

    /// Df(z) as a q x q matrix.
    Matrix jacobian(const Point& z) const {
        check_point(z);
        const auto& T = table();
        auto v = monomial_values(z);
        Matrix J = Matrix::Zero(q_, q_);
        for (std::size_t m = 1; m < size_; ++m) {
            const auto& I = T.index(m);
            for (int k = 0; k < q_; ++k) {
                int lo = T.lower(m, k);
                if (lo < 0) continue;
                cplx dv = static_cast<double>(I[k]) * v[static_cast<std::size_t>(lo)];
                for (int j = 0; j < q_; ++j) J(j, k) += at(j, m) * dv;
            }
        }
        return J;
    }

    friend bool operator==(const PolyJet& a, const PolyJet& b) {
        if (a.q_ != b.q_) return false;
        std::size_t n = std::min(a.size_, b.size_);
        for (int j = 0; j < a.q_; ++j)
            for (std::size_t m = 0; m < n; ++m)
                if (a.at(j, m) != b.at(j, m)) return false;
        return true;
    }

    friend PolyJet operator+(const PolyJet& a, const PolyJet& b) { return combine(a, b, 1.0); }
    friend PolyJet operator-(const PolyJet& a, const PolyJet& b) { return combine(a, b, -1.0); }
    friend PolyJet operator*(cplx s, const PolyJet& a) {
        PolyJet r = a;
        for (auto& v : r.c_) v *= s;
        return r;
    }

    /// Largest coefficient difference over the common order.
    friend double max_difference(const PolyJet& a, const PolyJet& b) {
        return (a - b).max_abs();
    }

private:
    static PolyJet combine(const PolyJet& a, const PolyJet& b, double sb) {
        if (a.q_ != b.q_) throw precondition_error("jet dimension mismatch");
        PolyJet r(a.q_, std::min(a.N_, b.N_));
        for (int j = 0; j < a.q_; ++j)
            for (std::size_t m = 0; m < r.size_; ++m) r.at(j, m) = a.at(j, m) + sb * b.at(j, m);
        return r;
    }

    std::vector<cplx> monomial_values(const Point& z) const {
        const auto& T = table();
        std::vector<cplx> v(size_);
        v[0] = 1.0;
        for (std::size_t m = 1; m < size_; ++m) {
            auto [p, k] = T.parent(m);
            v[m] = v[static_cast<std::size_t>(p)] * z(k);
        }
        return v;
    }

    void check_component(int j) const {
        if (j < 0 || j >= q_) throw precondition_error("component out of range");
    }
    void check_point(const Point& z) const {
        if (z.size() != q_) throw precondition_error("point dimension mismatch");
    }

    int q_ = 0, N_ = 0;
    std::size_t size_ = 0;
    std::vector<cplx> c_;
};

// Element of H_i: q homogeneous components of degree i.
// Basis X^j_I is stored at j * count(i) + rank(I).
class HomogeneousMap {
public:
    HomogeneousMap() = default;
    HomogeneousMap(int q, int degree)
        : q_(q), d_(degree), n_(count_indices(q, degree)),
          c_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(static_cast<std::size_t>(q) * n_))) {
        if (q < 1 || degree < 1) throw precondition_error("HomogeneousMap: need q >= 1, degree >= 1");
    }
    HomogeneousMap(int q, int degree, Eigen::VectorXcd c) : HomogeneousMap(q, degree) {
        if (c.size() != c_.size()) throw precondition_error("HomogeneousMap: coefficient vector has wrong size");
        c_ = std::move(c);
    }

    int dim() const { return q_; }
    int degree() const { return d_; }
    std::size_t per_component() const { return n_; }
    std::size_t basis_size() const { return static_cast<std::size_t>(q_) * n_; }
    const Eigen::VectorXcd& coeffs() const { return c_; }

    /// Basis slot of X^j_I; returns (component, position in degree block).
    std::pair<int, std::size_t> basis_element(std::size_t b) const {
        return {static_cast<int>(b / n_), b % n_};
    }
    MultiIndex basis_index(std::size_t b) const {
        const auto& T = monomial_table(q_, d_);
        return T.index(T.offset(d_) + b % n_);
    }

    cplx coeff(int j, const MultiIndex& I) const {
        if (I.degree() != d_) return {};
        const auto& T = monomial_table(q_, d_);
        auto r = static_cast<std::size_t>(T.position(I)) - T.offset(d_);
        return c_(static_cast<Eigen::Index>(static_cast<std::size_t>(j) * n_ + r));
    }

    PolyJet to_jet(int order) const {
        if (order < d_) throw precondition_error("jet order below homogeneous degree");
        PolyJet f(q_, order);
        std::size_t off = monomial_table(q_, d_).offset(d_);
        for (int j = 0; j < q_; ++j)
            for (std::size_t r = 0; r < n_; ++r)
                f.at(j, off + r) = c_(static_cast<Eigen::Index>(static_cast<std::size_t>(j) * n_ + r));
        return f;
    }

    double max_abs() const { return c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0; }

    friend HomogeneousMap operator+(const HomogeneousMap& a, const HomogeneousMap& b) {
        return HomogeneousMap(a.q_, a.d_, a.c_ + b.c_);
    }
    friend HomogeneousMap operator-(const HomogeneousMap& a, const HomogeneousMap& b) {
        return HomogeneousMap(a.q_, a.d_, a.c_ - b.c_);
    }
    friend HomogeneousMap operator*(cplx s, const HomogeneousMap& a) {
        return HomogeneousMap(a.q_, a.d_, s * a.c_);
    }

private:
    int q_ = 0, d_ = 0;
    std::size_t n_ = 0;
    Eigen::VectorXcd c_;
};

/// Degree-i coefficients of f.
inline HomogeneousMap homogeneous_part(const PolyJet& f, int i) {
    if (i < 1 || i > f.order()) throw precondition_error("homogeneous_part: degree out of range");
    HomogeneousMap H(f.dim(), i);
    Eigen::VectorXcd c(static_cast<Eigen::Index>(H.basis_size()));
    std::size_t off = f.table().offset(i), n = H.per_component();
    for (int j = 0; j < f.dim(); ++j)
        for (std::size_t r = 0; r < n; ++r)
            c(static_cast<Eigen::Index>(static_cast<std::size_t>(j) * n + r)) = f.at(j, off + r);
    return HomogeneousMap(f.dim(), i, std::move(c));
}

namespace detail {
// out = a * b truncated at degree N; b has no constant term.
inline void mul_truncated(const MonomialTable& T, int N, const std::vector<cplx>& a,
                          const std::vector<std::size_t>& bnz, const std::vector<cplx>& b,
                          std::vector<cplx>& out) {
    std::fill(out.begin(), out.end(), cplx{});
    for (std::size_t x = 0; x < a.size(); ++x) {
        if (a[x] == cplx{}) continue;
        int room = N - T.degree(x);
        for (std::size_t y : bnz) {
            if (T.degree(y) > room) break;
            out[static_cast<std::size_t>(T.product(x, y))] += a[x] * b[y];
        }
    }
}
} // namespace detail

namespace detail {
// pw[m] = g^{I_m} truncated at M, for every m flagged in need (parents get flagged too).
inline std::vector<std::vector<cplx>> monomial_powers(const PolyJet& g, int M, std::vector<char> need) {
    const int q = g.dim();
    const auto& T = monomial_table(q, M);
    const std::size_t S = T.size();
    for (std::size_t m = S; m-- > 1;)
        if (need[m]) need[static_cast<std::size_t>(T.parent(m).first)] = 1;

    std::vector<std::vector<cplx>> gk(static_cast<std::size_t>(q), std::vector<cplx>(S));
    std::vector<std::vector<std::size_t>> gnz(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k)
        for (std::size_t m = 1; m < S; ++m) {
            gk[static_cast<std::size_t>(k)][m] = g.at(k, m);
            if (g.at(k, m) != cplx{}) gnz[static_cast<std::size_t>(k)].push_back(m);
        }

    std::vector<std::vector<cplx>> pw(S);
    pw[0].assign(S, cplx{});
    pw[0][0] = 1.0;
    for (std::size_t m = 1; m < S; ++m) {
        if (!need[m]) continue;
        auto [p, k] = T.parent(m);
        pw[m].assign(S, cplx{});
        mul_truncated(T, M, pw[static_cast<std::size_t>(p)], gnz[static_cast<std::size_t>(k)],
                      gk[static_cast<std::size_t>(k)], pw[m]);
    }
    return pw;
}
} // namespace detail

/// Jet of f o g at order min(N, f.order, g.order).
inline PolyJet compose(const PolyJet& f, const PolyJet& g, int N) {
    if (f.dim() != g.dim()) throw precondition_error("compose: dimension mismatch");
    const int q = f.dim();
    const int M = std::min({N, f.order(), g.order()});
    if (M < 1) throw precondition_error("compose: order must be >= 1");
    const std::size_t S = monomial_table(q, M).size();

    std::vector<char> need(S, 0);
    for (std::size_t m = 1; m < S; ++m)
        for (int j = 0; j < q; ++j)
            if (f.at(j, m) != cplx{}) { need[m] = 1; break; }
    auto pw = detail::monomial_powers(g, M, need);

    PolyJet r(q, M);
    for (std::size_t m = 1; m < S; ++m) {
        if (!need[m]) continue;
        for (int j = 0; j < q; ++j) {
            cplx c = f.at(j, m);
            if (c == cplx{}) continue;
            for (std::size_t x = 1; x < S; ++x) r.at(j, x) += c * pw[m][x];
        }
    }
    return r;
}

/// Matrix of z^I -> (Bz)^I on degree-i monomials: entry (K, I) is the z^K coefficient.
inline Matrix linear_substitution(const Matrix& B, int i) {
    const int q = static_cast<int>(B.rows());
    const auto& T = monomial_table(q, i);
    std::size_t off = T.offset(i), n = T.end_of(i) - off;
    std::vector<char> need(T.size(), 0);
    for (std::size_t m = off; m < T.end_of(i); ++m) need[m] = 1;
    auto pw = detail::monomial_powers(PolyJet::linear(B, i), i, need);
    Matrix S(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t r = 0; r < n; ++r)
            S(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = pw[off + c][off + r];
    return S;
}

/// Compositional inverse at order min(N, f.order); needs invertible linear part.
inline PolyJet invert(const PolyJet& f, int N) {
    const int q = f.dim();
    const int M = std::min(N, f.order());
    Matrix L = f.linear_part();
    Eigen::JacobiSVD<Matrix> svd(L);
    auto sv = svd.singularValues();
    if (sv(q - 1) <= 1e-14 * std::max(1.0, sv(0))) throw precondition_error("invert: singular linear part");
    Matrix Li = L.inverse();
    PolyJet F = f.with_order(M) - PolyJet::linear(L, M);
    PolyJet Ljet = PolyJet::linear(Li, M), id = PolyJet::identity(q, M);
    PolyJet g = Ljet;
    // each pass fixes one more degree of g
    for (int d = 2; d <= M; ++d) g = compose(Ljet, id - compose(F, g, M), M);
    return g;
}

/// Component j uses only z_1..z_{j-1}, apart from its own diagonal term.
inline bool is_triangular(const PolyJet& f) {
    const auto& T = f.table();
    for (int j = 0; j < f.dim(); ++j) {
        if (f.at(j, 1 + static_cast<std::size_t>(j)) == cplx{}) return false;
        for (std::size_t m = 1; m < f.row_size(); ++m) {
            if (f.at(j, m) == cplx{}) continue;
            const auto& I = T.index(m);
            if (T.degree(m) == 1 && I[j] == 1) continue;
            for (int k = j; k < f.dim(); ++k)
                if (I[k] != 0) return false;
        }
    }
    return true;
}

// Triangular polynomial automorphism; pointwise inverse by back-substitution.
class TriangularJet {
public:
    TriangularJet() = default;
    explicit TriangularJet(PolyJet f) : f_(std::move(f)) {
        if (!is_triangular(f_)) throw precondition_error("jet is not triangular");
    }

    const PolyJet& jet() const { return f_; }
    int dim() const { return f_.dim(); }
    cplx diagonal(int j) const { return f_.at(j, 1 + static_cast<std::size_t>(j)); }

    Point evaluate(const Point& z) const { return f_.evaluate(z); }

    /// Exact preimage of y (within rounding), solving one component at a time.
    Point inverse_at(const Point& y) const {
        const int q = f_.dim();
        Point w = Point::Zero(q);
        for (int j = 0; j < q; ++j) {
            // w_j..w_q are still zero, so this is the off-diagonal part of row j
            cplx t = f_.evaluate(w)(j);
            w(j) = (y(j) - t) / diagonal(j);
        }
        return w;
    }

    /// Dilation flag: diagonal moduli decreasing inside (0, 1).
    bool is_dilation() const {
        for (int j = 0; j < dim(); ++j) {
            double a = std::abs(diagonal(j));
            if (!(a > 0 && a < 1)) return false;
            if (j > 0 && a > std::abs(diagonal(j - 1))) return false;
        }
        return true;
    }

private:
    PolyJet f_;
};

} // namespace loewner
