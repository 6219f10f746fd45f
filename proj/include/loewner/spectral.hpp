#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jet_json.hpp"
#include "linalg.hpp"

namespace loewner {

// Lower-triangular conjugate of a contracting matrix: A = M A_orig M^{-1}.
struct OptimalForm {
    Matrix A;
    Matrix M;
    Matrix M_inv;
    std::vector<cplx> eigenvalues;  // diagonal of A, decreasing modulus
    double epsilon = 1.0;           // delta used by the diagonal scaling
    double norm_bound = 0.0;        // ||A||_2
    double spectral_radius = 0.0;
    double residual = 0.0;          // max |M A_orig M^{-1} - A|
};

namespace detail {

// Swap diagonal entries k, k+1 of upper-triangular T with a Givens rotation.
inline void swap_schur(Matrix& T, Matrix& U, Eigen::Index k) {
    cplx a = T(k, k), b = T(k, k + 1), c = T(k + 1, k + 1);
    cplx v1 = b, v2 = c - a;
    double nv = std::hypot(std::abs(v1), std::abs(v2));
    if (nv == 0) return;
    Matrix G(2, 2);
    G << v1 / nv, -std::conj(v2) / nv, v2 / nv, std::conj(v1) / nv;
    T.middleRows(k, 2) = G.adjoint() * T.middleRows(k, 2);
    T.middleCols(k, 2) = T.middleCols(k, 2) * G;
    U.middleCols(k, 2) = U.middleCols(k, 2) * G;
    T(k + 1, k) = 0;
}

inline bool same_modulus(cplx a, cplx b, double rel) {
    return std::abs(std::abs(a) - std::abs(b)) <= rel * std::max(std::abs(a), std::abs(b));
}

constexpr double cluster_tolerance = 1e-6;

} // namespace detail

/// Lower-triangular form with decreasing diagonal moduli, couplings only between
/// eigenvalues of equal modulus, and ||A||_2 <= target (default (1+rho)/2).
inline OptimalForm to_optimal_form(const Matrix& A_orig, std::optional<double> target = {}) {
    const Eigen::Index q = A_orig.rows();
    if (q == 0 || A_orig.cols() != q) throw precondition_error("to_optimal_form: need a non-empty square matrix");
    if (!A_orig.allFinite()) throw precondition_error("to_optimal_form: non-finite entries");
    const double anorm = spectral_norm(A_orig);

    Matrix L, M;
    bool lower = true;
    for (Eigen::Index r = 0; r < q && lower; ++r)
        for (Eigen::Index c = r + 1; c < q; ++c)
            if (A_orig(r, c) != cplx{}) { lower = false; break; }
    if (lower)
        for (Eigen::Index k = 1; k < q; ++k)
            if (std::abs(A_orig(k, k)) > std::abs(A_orig(k - 1, k - 1))) lower = false;

    if (lower) {
        L = A_orig;
        M = Matrix::Identity(q, q);
    } else {
        Eigen::ComplexSchur<Matrix> cs(A_orig);
        Matrix T = cs.matrixT(), U = cs.matrixU();
        for (Eigen::Index r = 1; r < q; ++r)
            for (Eigen::Index c = 0; c < r; ++c) T(r, c) = 0;
        // bubble to increasing modulus along the diagonal
        for (Eigen::Index pass = 0; pass < q; ++pass)
            for (Eigen::Index k = 0; k + 1 < q; ++k)
                if (std::abs(T(k, k)) > std::abs(T(k + 1, k + 1)) * (1 + 1e-12)) detail::swap_schur(T, U, k);
        // reversal turns upper into lower triangular with decreasing moduli
        Eigen::PermutationMatrix<Eigen::Dynamic> P(q);
        for (Eigen::Index k = 0; k < q; ++k) P.indices()(k) = static_cast<int>(q - 1 - k);
        L = P * T * P.transpose();
        M = P * U.adjoint();
        for (Eigen::Index r = 0; r < q; ++r)
            for (Eigen::Index c = r + 1; c < q; ++c) L(r, c) = 0;
    }

    double rho = 0, lmin = INFINITY;
    for (Eigen::Index k = 0; k < q; ++k) {
        rho = std::max(rho, std::abs(L(k, k)));
        lmin = std::min(lmin, std::abs(L(k, k)));
    }
    if (rho >= 1) throw precondition_error("to_optimal_form: spectral radius >= 1, not a dilation");
    if (lmin <= 1e-14 * std::max(1.0, anorm)) throw precondition_error("to_optimal_form: singular matrix");

    // decouple blocks of distinct modulus: S = [[I,0],[X,I]] with X L11 - L22 X = -L21
    for (Eigen::Index c = 1; c < q; ++c) {
        if (detail::same_modulus(L(c - 1, c - 1), L(c, c), detail::cluster_tolerance)) continue;
        Eigen::Index r = q - c;
        Matrix L21 = L.block(c, 0, r, c);
        if (L21.cwiseAbs().maxCoeff() == 0) continue;
        Matrix L11 = L.topLeftCorner(c, c), L22 = L.bottomRightCorner(r, r);
        Matrix K = Matrix::Zero(r * c, r * c);
        for (Eigen::Index a = 0; a < c; ++a)
            for (Eigen::Index b = 0; b < c; ++b) {
                K.block(b * r, a * r, r, r).diagonal().array() += L11(a, b);
            }
        for (Eigen::Index a = 0; a < c; ++a) K.block(a * r, a * r, r, r) -= L22;
        Eigen::VectorXcd rhs = -Eigen::Map<const Eigen::VectorXcd>(L21.data(), r * c);
        Eigen::VectorXcd x = K.partialPivLu().solve(rhs);
        Matrix X = Eigen::Map<Matrix>(x.data(), r, c);
        Matrix S = Matrix::Identity(q, q), Si = Matrix::Identity(q, q);
        S.block(c, 0, r, c) = X;
        Si.block(c, 0, r, c) = -X;
        L = S * L * Si;
        M = S * M;
        L.block(c, 0, r, c).setZero();
        for (Eigen::Index a = 0; a < q; ++a)
            for (Eigen::Index b = a + 1; b < q; ++b) L(a, b) = 0;
    }

    const double goal = target.value_or((1 + rho) / 2);
    if (!(goal > rho && goal < 1)) throw precondition_error("to_optimal_form: target norm must lie in (rho, 1)");
    double delta = 1;
    Matrix Ld = L;
    for (int it = 0; it < 200; ++it) {
        Ld = L;
        for (Eigen::Index r = 0; r < q; ++r)
            for (Eigen::Index c = 0; c < r; ++c) Ld(r, c) *= std::pow(delta, static_cast<double>(r - c));
        if (spectral_norm(Ld) <= goal) break;
        delta /= 2;
    }
    Matrix D = Matrix::Zero(q, q);
    for (Eigen::Index k = 0; k < q; ++k) D(k, k) = std::pow(delta, static_cast<double>(k + 1));

    OptimalForm out;
    out.A = Ld;
    out.M = D * M;
    out.M_inv = out.M.inverse();
    out.epsilon = delta;
    out.norm_bound = spectral_norm(Ld);
    out.spectral_radius = rho;
    for (Eigen::Index k = 0; k < q; ++k) out.eigenvalues.push_back(Ld(k, k));
    out.residual = max_abs(Matrix(out.M * A_orig * out.M_inv - out.A));
    if (out.norm_bound >= 1) throw convergence_error("to_optimal_form: could not reach norm < 1");
    return out;
}

/// Matrix of H -> B o H o B^{-1} on H_i (basis X^j_I, index j*count + rank).
inline Matrix conjugation_matrix(const Matrix& B, int i) {
    if (i < 1) throw precondition_error("degree must be >= 1");
    Matrix S = linear_substitution(B.inverse(), i);
    const Eigen::Index q = B.rows(), n = S.rows();
    Matrix G(q * n, q * n);
    for (Eigen::Index l = 0; l < q; ++l)
        for (Eigen::Index j = 0; j < q; ++j) G.block(l * n, j * n, n, n) = B(l, j) * S;
    return G;
}

/// Gamma: H -> A o H o A^{-1} on H_i.
inline Matrix gamma_matrix(const OptimalForm& form, int i) {
    if (i < 2) throw precondition_error("gamma_matrix: degree must be >= 2");
    return conjugation_matrix(form.A, i);
}
inline Matrix gamma_matrix(const Matrix& A, int i) {
    if (i < 2) throw precondition_error("gamma_matrix: degree must be >= 2");
    return conjugation_matrix(A, i);
}

enum class BasisClass { Resonant, Stable, Unstable };

struct SpectralSplit {
    int dim = 0, degree = 0;
    double tau = 0;
    std::vector<cplx> candidate;   // lambda_j lambda^{-I}
    std::vector<double> mu;        // |candidate|
    std::vector<BasisClass> cls;
    std::vector<Eigen::Index> resonant, stable, unstable;
    double rho_s = 0;      // max stable mu
    double rho_u_inv = 0;  // max 1/mu over unstable

    std::size_t size() const { return cls.size(); }
};

/// Classify X^j_I by mu = |lambda_j lambda^{-I}|; ties within tau go to the resonant set.
inline SpectralSplit spectral_split(std::span<const cplx> lambda, int i, double tau = 1e-9) {
    if (!(tau > 0)) throw precondition_error("spectral_split: tau must be positive");
    if (i < 2) throw precondition_error("spectral_split: degree must be >= 2");
    const int q = static_cast<int>(lambda.size());
    SpectralSplit s;
    s.dim = q;
    s.degree = i;
    s.tau = tau;
    auto idx = enumerate_indices(q, i);
    for (int j = 0; j < q; ++j)
        for (const auto& I : idx) {
            cplx li = 1.0;
            for (int k = 0; k < q; ++k) li *= std::pow(lambda[static_cast<std::size_t>(k)], I[k]);
            cplx c = lambda[static_cast<std::size_t>(j)] / li;
            double mu = std::abs(c);
            auto b = static_cast<Eigen::Index>(s.cls.size());
            s.candidate.push_back(c);
            s.mu.push_back(mu);
            if (std::abs(mu - 1) <= tau) {
                s.cls.push_back(BasisClass::Resonant);
                s.resonant.push_back(b);
            } else if (mu < 1) {
                s.cls.push_back(BasisClass::Stable);
                s.stable.push_back(b);
                s.rho_s = std::max(s.rho_s, mu);
            } else {
                s.cls.push_back(BasisClass::Unstable);
                s.unstable.push_back(b);
                s.rho_u_inv = std::max(s.rho_u_inv, 1 / mu);
            }
        }
    return s;
}

inline SpectralSplit spectral_split(const OptimalForm& form, int i, double tau = 1e-9) {
    return spectral_split(std::span<const cplx>(form.eigenvalues), i, tau);
}

enum class ResonanceMode { Multiplicative, Additive };

struct Resonance {
    int component;  // 0-based j (or l)
    MultiIndex index;
    friend bool operator==(const Resonance&, const Resonance&) = default;
};

struct ResonanceReport {
    ResonanceMode mode = ResonanceMode::Multiplicative;
    double tolerance = 0;
    int p = 2;
    std::vector<Resonance> resonances;
    bool empty() const { return resonances.empty(); }
};

/// Smallest p >= 2 with max|lambda|^p < min|lambda|.
inline int degree_bound(std::span<const cplx> lambda) {
    double hi = 0, lo = INFINITY;
    for (auto l : lambda) {
        hi = std::max(hi, std::abs(l));
        lo = std::min(lo, std::abs(l));
    }
    int p = 2;
    while (std::pow(hi, p) >= lo) {
        if (++p > 10000) throw precondition_error("degree bound diverges; spectrum too close to the unit circle");
    }
    return p;
}

/// All (j, I), 2 <= |I| <= p, with ||lambda_j| - |lambda^I|| <= tau |lambda_j|.
/// Additive mode takes eigenvalues alpha of Lambda and searches e^alpha.
inline ResonanceReport detect_resonances(std::span<const cplx> values, ResonanceMode mode, double tau = 1e-9) {
    if (values.empty()) throw precondition_error("detect_resonances: empty spectrum");
    std::vector<cplx> lam;
    for (auto v : values) {
        if (mode == ResonanceMode::Additive) {
            if (!(v.real() < 0)) throw precondition_error("detect_resonances: additive mode needs Re(alpha) < 0");
            lam.push_back(std::exp(v));
        } else {
            double a = std::abs(v);
            if (!(a > 0 && a < 1)) throw precondition_error("detect_resonances: need 0 < |lambda| < 1");
            lam.push_back(v);
        }
    }
    const int q = static_cast<int>(lam.size());
    ResonanceReport r;
    r.mode = mode;
    r.tolerance = tau;
    r.p = degree_bound(lam);
    for (int d = 2; d <= r.p; ++d)
        for (const auto& I : enumerate_indices(q, d)) {
            double m = 1;
            for (int k = 0; k < q; ++k) m *= std::pow(std::abs(lam[static_cast<std::size_t>(k)]), I[k]);
            for (int j = 0; j < q; ++j) {
                double lj = std::abs(lam[static_cast<std::size_t>(j)]);
                if (std::abs(lj - m) <= tau * lj) r.resonances.push_back({j, I});
            }
        }
    std::sort(r.resonances.begin(), r.resonances.end(), [](const Resonance& a, const Resonance& b) {
        return a.component != b.component ? a.component < b.component : graded_before(a.index, b.index);
    });
    return r;
}

/// i_j = ... = i_q = 0 for every reported (j, I).
inline bool triangular_compatible(const ResonanceReport& r) {
    for (const auto& res : r.resonances)
        for (int k = res.component; k < res.index.dim(); ++k)
            if (res.index[k] != 0) return false;
    return true;
}

inline json resonance_report_to_json(const ResonanceReport& r) {
    json list = json::array();
    for (const auto& res : r.resonances)
        list.push_back({{"component", res.component + 1}, {"index", res.index.entries()}});
    return json{{"mode", r.mode == ResonanceMode::Additive ? "additive" : "multiplicative"},
                {"tolerance", r.tolerance},
                {"p", r.p},
                {"resonances", std::move(list)}};
}

inline ResonanceReport resonance_report_from_json(const json& j) {
    try {
        ResonanceReport r;
        auto mode = j.at("mode").get<std::string>();
        if (mode != "additive" && mode != "multiplicative") throw format_error("unknown resonance mode " + mode);
        r.mode = mode == "additive" ? ResonanceMode::Additive : ResonanceMode::Multiplicative;
        r.tolerance = j.at("tolerance").get<double>();
        r.p = j.at("p").get<int>();
        for (const auto& e : j.at("resonances")) {
            auto idx = e.at("index").get<std::vector<int>>();
            r.resonances.push_back({e.at("component").get<int>() - 1, MultiIndex(idx)});
        }
        return r;
    } catch (const json::exception& e) {
        throw format_error(std::string("malformed resonance report: ") + e.what());
    }
}

} // namespace loewner
