#pragma once

#include <optional>
#include <vector>

#include "spectral.hpp"

namespace loewner {

enum class TailPolicy { Zero, Constant };

// B_0..B_{T-1}; past T the forcing is 0 (Zero) or tail_value (Constant).
struct ForcingSequence {
    int dim = 0, degree = 0;
    std::vector<HomogeneousMap> terms;
    TailPolicy tail = TailPolicy::Zero;
    std::optional<HomogeneousMap> tail_value;

    const HomogeneousMap& at(std::size_t n, const HomogeneousMap& zero) const {
        if (n < terms.size()) return terms[n];
        if (tail == TailPolicy::Constant) return tail_value ? *tail_value : terms.back();
        return zero;
    }
};

struct SolutionSequence {
    std::vector<HomogeneousMap> H;  // H_0..H_T
    double stable_bound = 0;        // C
    double unstable_bound = 0;      // C'
    double sup_bound = 0;           // C + C'
    std::vector<double> residuals;  // per step, relative to 1 + |B_n|
    double max_residual = 0;
    double sup_norm = 0;            // max_n |H_n| (max-coefficient norm)
};

struct ForcingParts {
    HomogeneousMap resonant, stable, unstable;
};

inline ForcingParts split_forcing(const HomogeneousMap& B, const SpectralSplit& split) {
    if (B.degree() != split.degree || B.dim() != split.dim)
        throw precondition_error("split_forcing: degree or dimension mismatch");
    Eigen::VectorXcd r = Eigen::VectorXcd::Zero(B.coeffs().size()), s = r, u = r;
    for (std::size_t b = 0; b < split.size(); ++b) {
        auto k = static_cast<Eigen::Index>(b);
        switch (split.cls[b]) {
        case BasisClass::Resonant: r(k) = B.coeffs()(k); break;
        case BasisClass::Stable: s(k) = B.coeffs()(k); break;
        case BasisClass::Unstable: u(k) = B.coeffs()(k); break;
        }
    }
    int q = B.dim(), i = B.degree();
    return {HomogeneousMap(q, i, r), HomogeneousMap(q, i, s), HomogeneousMap(q, i, u)};
}

namespace detail {

inline Matrix sub_block(const Matrix& G, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = G(rows[a], cols[b]);
    return out;
}

inline Eigen::VectorXcd gather(const Eigen::VectorXcd& v, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(idx[a]);
    return out;
}

inline void scatter(Eigen::VectorXcd& v, const std::vector<Eigen::Index>& idx, const Eigen::VectorXcd& part) {
    for (std::size_t a = 0; a < idx.size(); ++a) v(idx[a]) = part(static_cast<Eigen::Index>(a));
}

// sum_{j >= first} |G^j|_inf, for a block with spectral radius < 1
inline double power_sum(const Matrix& G, int first) {
    if (G.size() == 0) return 0.0;
    Matrix P = Matrix::Identity(G.rows(), G.cols());
    for (int j = 0; j < first; ++j) P = P * G;
    double sum = 0;
    for (int j = 0; j < 200000; ++j) {
        double t = max_row_sum(P);
        sum += t;
        if (t <= 1e-17 * sum) return sum;
        P = P * G;
    }
    throw convergence_error("geometric bound does not converge; block is not contracting");
}

} // namespace detail

enum class StableSeed { Auto, Zero, Stationary };

/// Bounded solution of H_{n+1} = Gamma H_n + B_n for n = 0..T-1.
///
/// Stable part runs forward. Its seed is 0, or (I - Gamma_s)^{-1} B^s_0 when the
/// forcing is treated as constant before n = 0 (Auto picks that under a Constant tail).
/// Unstable part is swept backward from the closed-form tail value.
inline SolutionSequence solve_difference(const Matrix& gamma, const SpectralSplit& split,
                                         const ForcingSequence& forcing, int horizon,
                                         StableSeed seed = StableSeed::Auto) {
    const auto nb = static_cast<Eigen::Index>(split.size());
    if (gamma.rows() != nb || gamma.cols() != nb) throw precondition_error("solve_difference: Gamma size does not match the split");
    if (horizon < 0) throw precondition_error("solve_difference: negative horizon");
    if (forcing.terms.empty() && forcing.tail == TailPolicy::Constant && !forcing.tail_value)
        throw precondition_error("solve_difference: constant tail needs a value");
    const int q = split.dim, i = split.degree;
    const HomogeneousMap zero(q, i);

    const double gscale = std::max(max_abs(gamma), 1e-300);
    auto leaks = [&](const std::vector<Eigen::Index>& cols, BasisClass cls) {
        for (auto c : cols)
            for (Eigen::Index r = 0; r < nb; ++r)
                if (split.cls[static_cast<std::size_t>(r)] != cls && std::abs(gamma(r, c)) > 1e-10 * gscale) return true;
        return false;
    };
    if (leaks(split.stable, BasisClass::Stable) || leaks(split.unstable, BasisClass::Unstable))
        throw precondition_error("solve_difference: stable/unstable subspaces are not Gamma-invariant (linear part not in optimal form)");

    const std::size_t T = static_cast<std::size_t>(horizon);
    const std::size_t span = std::max(T, forcing.terms.size());
    std::vector<ForcingParts> parts;
    double sup_bs = 0, sup_bu = 0;
    for (std::size_t n = 0; n <= span; ++n) {
        const auto& B = forcing.at(n, zero);
        if (B.dim() != q || B.degree() != i) throw precondition_error("solve_difference: forcing degree mismatch");
        auto p = split_forcing(B, split);
        if (p.resonant.max_abs() > 1e-12 * std::max(B.max_abs(), 1e-300))
            throw precondition_error("solve_difference: forcing has a resonant component");
        sup_bs = std::max(sup_bs, p.stable.max_abs());
        sup_bu = std::max(sup_bu, p.unstable.max_abs());
        parts.push_back(std::move(p));
    }

    Matrix Gs = detail::sub_block(gamma, split.stable, split.stable);
    Matrix Gu = detail::sub_block(gamma, split.unstable, split.unstable);
    const auto ns = static_cast<Eigen::Index>(split.stable.size()), nu = static_cast<Eigen::Index>(split.unstable.size());

    SolutionSequence sol;
    sol.stable_bound = sup_bs * detail::power_sum(Gs, 0);
    Matrix Gu_inv = nu ? Matrix(Gu.inverse()) : Matrix();
    sol.unstable_bound = sup_bu * detail::power_sum(Gu_inv, 1);
    sol.sup_bound = sol.stable_bound + sol.unstable_bound;

    // stable part, forward
    std::vector<Eigen::VectorXcd> hs(T + 1, Eigen::VectorXcd::Zero(ns));
    if (seed == StableSeed::Auto) seed = forcing.tail == TailPolicy::Constant ? StableSeed::Stationary : StableSeed::Zero;
    if (seed == StableSeed::Stationary && ns)
        hs[0] = (Matrix::Identity(ns, ns) - Gs).partialPivLu().solve(detail::gather(parts[0].stable.coeffs(), split.stable));
    for (std::size_t n = 0; n < T; ++n) hs[n + 1] = Gs * hs[n] + detail::gather(parts[n].stable.coeffs(), split.stable);

    // unstable part, backward from n = span
    std::vector<Eigen::VectorXcd> hu(T + 1, Eigen::VectorXcd::Zero(nu));
    if (nu) {
        Eigen::VectorXcd h = Eigen::VectorXcd::Zero(nu);
        if (forcing.tail == TailPolicy::Constant) {
            Matrix K = Matrix::Identity(nu, nu) - Gu;
            Eigen::FullPivLU<Matrix> lu(K);
            if (!lu.isInvertible()) throw std::logic_error("solve_difference: I - Gamma singular on the unstable block");
            h = lu.solve(detail::gather(parts[span].unstable.coeffs(), split.unstable));
        }
        if (span == T) hu[T] = h;
        auto lu = Gu.partialPivLu();
        for (std::size_t n = span; n-- > 0;) {
            h = lu.solve(h - detail::gather(parts[n].unstable.coeffs(), split.unstable));
            if (n <= T) hu[n] = h;
        }
    }

    for (std::size_t n = 0; n <= T; ++n) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(nb);
        detail::scatter(v, split.stable, hs[n]);
        detail::scatter(v, split.unstable, hu[n]);
        sol.H.emplace_back(q, i, std::move(v));
        sol.sup_norm = std::max(sol.sup_norm, sol.H.back().max_abs());
    }
    for (std::size_t n = 0; n < T; ++n) {
        const auto& B = forcing.at(n, zero);
        double r = max_abs(Eigen::VectorXcd(sol.H[n + 1].coeffs() - gamma * sol.H[n].coeffs() - B.coeffs()));
        sol.residuals.push_back(r / (1 + B.max_abs()));
        sol.max_residual = std::max(sol.max_residual, sol.residuals.back());
    }
    return sol;
}

/// Plain forward recursion from a given H_0; diverges on the unstable part in general.
inline std::vector<HomogeneousMap> solve_forward(const Matrix& gamma, const ForcingSequence& forcing, int horizon,
                                                 const HomogeneousMap& H0) {
    const HomogeneousMap zero(H0.dim(), H0.degree());
    std::vector<HomogeneousMap> H{H0};
    for (std::size_t n = 0; n < static_cast<std::size_t>(horizon); ++n)
        H.emplace_back(H0.dim(), H0.degree(), gamma * H.back().coeffs() + forcing.at(n, zero).coeffs());
    return H;
}

inline json solution_diagnostics_to_json(const SolutionSequence& s) {
    return json{{"stable_bound", s.stable_bound},   {"unstable_bound", s.unstable_bound},
                {"sup_bound", s.sup_bound},         {"sup_norm", s.sup_norm},
                {"max_residual", s.max_residual},   {"residuals", s.residuals}};
}

} // namespace loewner
