#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evolution_family.hpp"
#include "sampling.hpp"

namespace loewner {

struct NormalFormOptions {
    int order = 6;           // requested jet order; raised to l when needed
    double tau = 1e-9;       // resonance classification tolerance
    int pad = 32;            // window extension past the family horizon
    int max_order = 16;
    double point_tol = 1e-14;  // Cauchy increment tolerance, relative to 1 + |x|
    std::size_t max_entry_steps = 2000;
    std::vector<Point> samples;  // points of the r-ball for the convergence log
    std::size_t log_samples = 0; // when samples is empty: this many Halton points of the r-ball
    std::size_t sample_skip = 0;
};

struct Constants {
    double norm_bound = 0;  // ||A||_2
    double alpha = 0;
    double C2 = 0;          // quadratic remainder constant on the 1/2-ball
    double r = 0;
    double beta = 0;
    int ell = 2;
    int p = 2;
    double sup_defect = 0;  // sampled sup of T^{-1} o k_{n+1} o phi_n - k_n on the r-sphere
    double C = 0;           // sup_defect / r^l
    double s = 0;           // uniform Koebe-type radius of the k_n
    int beta_order = 1;     // order of the inverse jets used for beta
};

struct AbsorbedTerm {
    int component;
    MultiIndex index;
    cplx first;     // coefficient at the first step where it is nonzero
    double sup;     // largest modulus over the window
};

struct ConvergenceEntry {
    std::size_t m;
    double increment;
    double bound;
};

namespace detail {

inline double homogeneous_bound(const PolyJet& f, int d) {
    const auto& T = f.table();
    if (d > f.order()) return 0;
    double s2 = 0;
    for (int j = 0; j < f.dim(); ++j) {
        double s = 0;
        for (std::size_t m = T.offset(d); m < T.end_of(d); ++m) s += std::abs(f.at(j, m));
        s2 += s * s;
    }
    return std::sqrt(s2);
}

// sum_{d>=2} |P_d| rho^{d-2}
inline double remainder_constant(const PolyJet& f, double rho) {
    double c = 0;
    for (int d = 2; d <= f.order(); ++d) c += homogeneous_bound(f, d) * std::pow(rho, d - 2);
    return c;
}

// max-norm Lipschitz constant on the polydisc of radius rho
inline double lipschitz_polydisc(const PolyJet& g, double rho) {
    const auto& T = g.table();
    double best = 0;
    for (int j = 0; j < g.dim(); ++j) {
        double s = 0;
        for (std::size_t m = 1; m < g.row_size(); ++m) {
            int d = T.degree(m);
            s += std::abs(g.at(j, m)) * d * std::pow(rho, d - 1);
        }
        best = std::max(best, s);
    }
    return best;
}

inline double max_norm(const Point& z) { return z.size() ? z.cwiseAbs().maxCoeff() : 0.0; }

} // namespace detail

// Output of the normal-form driver, with pointwise evaluators for h_n and f_n.
class ConjugacyResult {
public:
    DiscreteEvolutionFamily family;
    int order = 0;                 // jet order N >= l
    std::size_t window = 0;        // k_0..k_W, T_0..T_{W-1}
    std::vector<PolyJet> k;
    std::vector<TriangularJet> T;
    std::vector<PolyJet> T_inv;    // inverse one-step jets at order N
    Constants constants;
    ResonanceReport resonances;
    std::vector<AbsorbedTerm> absorbed;
    std::vector<double> residuals;  // per-step conjugacy defect through order N, relative
    double max_residual = 0;
    std::vector<ConvergenceEntry> convergence_log;
    double point_tol = 1e-14;
    std::size_t max_entry_steps = 2000;

    int dim() const { return family.dim(); }

    /// Rebuild the reduced copies used for fast pointwise work.
    void prepare() {
        T_fast_.clear();
        for (const auto& t : T) T_fast_.emplace_back(t.jet().with_order(std::max(1, t.jet().top_degree())));
        linear_T_ = TriangularJet(PolyJet::linear(family.A(), 1));
        k_fast_.clear();
        for (const auto& kk : k) k_fast_.push_back(kk.with_order(std::max(1, kk.top_degree())));
    }

    const TriangularJet& T_step(std::size_t n) const {
        if (n < T_fast_.size()) return T_fast_[n];
        return family.tail() == TailPolicy::Constant ? T_fast_.back() : linear_T_;
    }

    /// T_{n,m}(z).
    Point T_apply(std::size_t n, std::size_t m, Point z) const {
        for (std::size_t j = n; j < m; ++j) z = T_step(j).evaluate(z);
        return z;
    }

    /// T_{n,m}^{-1}(y) by back-substitution through one-step inverses.
    Point T_inverse(std::size_t n, std::size_t m, Point y) const {
        for (std::size_t j = m; j-- > n;) y = T_step(j).inverse_at(y);
        return y;
    }

    /// Jet of T_{n,m}^{-1} at order N, composed from one-step inverse jets.
    PolyJet T_inverse_jet(std::size_t n, std::size_t m) const {
        PolyJet r = PolyJet::identity(dim(), order);
        for (std::size_t j = n; j < m; ++j) {
            const PolyJet& inv = j < T_inv.size() ? T_inv[j]
                                 : family.tail() == TailPolicy::Constant ? T_inv.back()
                                                                         : linear_inverse();
            r = compose(r, inv, order);
        }
        return r;
    }

    /// Cauchy limit of T_{n,m}^{-1} k_m phi_{n,m}(w) for w in the r-ball.
    /// increments[t] = |x_{n+t+1} - x_{n+t}|_max.
    Point limit(std::size_t n, const Point& w, std::vector<double>* increments = nullptr) const {
        if (n >= window) throw precondition_error("intertwining map requested past the computed window");
        Point wm = w;
        Point x = k_fast_[n].evaluate(w);
        double inc = INFINITY;
        for (std::size_t m = n + 1; m <= window; ++m) {
            wm = family.apply(m - 1, wm);
            Point xn = T_inverse(n, m, k_fast_[m].evaluate(wm));
            inc = detail::max_norm(xn - x);
            if (increments) increments->push_back(inc);
            x = xn;
            if (inc <= point_tol * (1 + detail::max_norm(x))) return x;
        }
        if (inc <= 1e-10 * (1 + detail::max_norm(x))) return x;
        throw convergence_error("intertwining limit did not settle inside the window; increase pad");
    }

    struct Entry {
        Point value;
        std::size_t u;              // first time the orbit is in the r-ball
        std::vector<Point> orbit;   // phi_{n,n..u}(z)
    };

    /// h_n(z): push z into the r-ball, take the limit there, pull back with T_{n,u}^{-1}.
    Entry extend(std::size_t n, const Point& z, std::size_t extra = 0) const {
        const double r = constants.r;
        Entry e{Point(), n, {z}};
        Point w = z;
        while (w.norm() >= r) {
            w = family.apply(e.u, w);
            ++e.u;
            e.orbit.push_back(w);
            if (e.u - n > max_entry_steps || !w.allFinite())
                throw convergence_error("orbit did not enter the r-ball within the step limit");
        }
        for (std::size_t t = 0; t < extra; ++t) {
            w = family.apply(e.u, w);
            ++e.u;
            e.orbit.push_back(w);
        }
        e.value = T_inverse(n, e.u, limit(e.u, w));
        return e;
    }

    Point h(std::size_t n, const Point& z) const { return extend(n, z).value; }

    /// Discrete chain f_n = T_{0,n}^{-1} o h_n.
    Point chain(std::size_t n, const Point& z) const { return T_inverse(0, n, h(n, z)); }

    PolyJet chain_jet(std::size_t n) const { return compose(T_inverse_jet(0, n), k.at(n), order); }

private:
    PolyJet linear_inverse() const { return PolyJet::linear(family.A().inverse(), order); }

    std::vector<TriangularJet> T_fast_;
    std::vector<PolyJet> k_fast_;
    TriangularJet linear_T_;
};

namespace detail {

struct Stages {
    std::vector<PolyJet> k;
    std::vector<PolyJet> T;
    std::vector<AbsorbedTerm> absorbed;
};

// Degree-by-degree construction of k_n and T_n through order N over n in [0, W).
inline Stages run_stages(const DiscreteEvolutionFamily& fam, int N, std::size_t W, int p, double tau) {
    const int q = fam.dim();
    const Matrix& A = fam.A();
    const Matrix Ainv = A.inverse();
    Stages st;
    st.k.assign(W + 1, PolyJet::identity(q, N));
    st.T.assign(W, PolyJet::linear(A, N));
    std::vector<PolyJet> phi;
    for (std::size_t n = 0; n < W; ++n) phi.push_back(fam.step(n, N));
    const auto& lam = fam.form().eigenvalues;

    for (int i = 2; i <= N; ++i) {
        auto split = spectral_split(std::span<const cplx>(lam), i, tau);
        Matrix G = gamma_matrix(A, i);
        Matrix S = linear_substitution(Ainv, i);
        const auto n_i = S.rows();

        std::vector<HomogeneousMap> B;
        for (std::size_t n = 0; n < W; ++n) {
            PolyJet D = compose(st.k[n + 1], phi[n], i) - compose(st.T[n], st.k[n], i);
            HomogeneousMap P = homogeneous_part(D, i);
            auto parts = split_forcing(P, split);
            HomogeneousMap Nn = P;
            if (i < p && parts.resonant.max_abs() > 0) {
                st.T[n] = st.T[n] + parts.resonant.to_jet(N);
                Nn = P - parts.resonant;
                for (std::size_t b = 0; b < split.size(); ++b) {
                    cplx c = parts.resonant.coeffs()(static_cast<Eigen::Index>(b));
                    if (c == cplx{}) continue;
                    int comp = static_cast<int>(b / static_cast<std::size_t>(n_i));
                    MultiIndex I = P.basis_index(b);
                    auto it = std::find_if(st.absorbed.begin(), st.absorbed.end(), [&](const AbsorbedTerm& a) {
                        return a.component == comp && a.index == I;
                    });
                    if (it == st.absorbed.end()) st.absorbed.push_back({comp, I, c, std::abs(c)});
                    else it->sup = std::max(it->sup, std::abs(c));
                }
                if (!is_triangular(st.T[n]))
                    throw std::logic_error("resonant term breaks triangularity; spectrum ordering is inconsistent");
            }
            // B_n = -N_n o A^{-1}
            Eigen::VectorXcd b(Nn.coeffs().size());
            for (int j = 0; j < q; ++j)
                b.segment(j * n_i, n_i) = -(S * Nn.coeffs().segment(j * n_i, n_i));
            B.emplace_back(q, i, std::move(b));
        }
        ForcingSequence F{q, i, std::move(B), fam.tail(), {}};
        auto sol = solve_difference(G, split, F, static_cast<int>(W));
        for (std::size_t n = 0; n <= W; ++n) {
            if (sol.H[n].max_abs() == 0) continue;
            st.k[n] = st.k[n] + compose(sol.H[n].to_jet(N), st.k[n], N);
        }
    }
    return st;
}

} // namespace detail

/// alpha, r, beta, l from the family and its triangular normal form.
inline Constants estimate_constants(const DiscreteEvolutionFamily& fam, const std::vector<PolyJet>& T, int p) {
    Constants c;
    c.p = p;
    c.norm_bound = spectral_norm(fam.A());
    c.alpha = (c.norm_bound + 1) / 2;
    double C2 = 0;
    for (std::size_t n = 0; n < fam.horizon(); ++n) C2 = std::max(C2, detail::remainder_constant(fam.step(n), 0.5));
    for (const auto& t : T) C2 = std::max(C2, detail::remainder_constant(t, 0.5));
    c.C2 = C2;
    c.r = C2 > 0 ? std::min(0.5, (c.alpha - c.norm_bound) / C2) : 0.5;

    const int q = fam.dim();
    int tdeg = 1;
    for (const auto& t : T) tdeg = std::max(tdeg, t.top_degree());
    // a triangular inverse has degree at most tdeg^{q-1}
    int inv_order = 1;
    for (int j = 1; j < q; ++j) inv_order *= tdeg;
    c.beta_order = std::clamp(inv_order, 1, 16);
    double beta = 0;
    const PolyJet* prev = nullptr;
    double prev_lip = 0;
    for (const auto& t : T) {
        if (prev && *prev == t) {
            beta = std::max(beta, prev_lip);
            continue;
        }
        PolyJet tj = t.with_order(std::max(c.beta_order, 1));
        prev_lip = detail::lipschitz_polydisc(invert(tj, c.beta_order), 0.5);
        prev = &t;
        beta = std::max(beta, prev_lip);
    }
    if (T.empty()) beta = detail::lipschitz_polydisc(PolyJet::linear(fam.A().inverse(), 1), 0.5);
    c.beta = beta;
    c.ell = 2;
    while (std::pow(c.alpha, c.ell) * c.beta >= 1) {
        if (++c.ell > 10000) throw convergence_error("no l with alpha^l beta < 1");
    }
    return c;
}

/// Defect P_{n,n+1}: degree-i part of k_{n+1} o phi_n - T_n o k_n.
inline HomogeneousMap defect(const DiscreteEvolutionFamily& fam, const PolyJet& k_next, const PolyJet& k_n,
                             const PolyJet& T_n, std::size_t n, int i) {
    PolyJet D = compose(k_next, fam.step(n, i), i) - compose(T_n, k_n, i);
    for (int d = 2; d < i; ++d)
        if (homogeneous_part(D, d).max_abs() > 1e-10 * std::max(1.0, D.max_abs()))
            throw std::logic_error("defect: conjugacy identity fails below degree i");
    return homogeneous_part(D, i);
}

/// Full driver: normal form through max(l, requested order), constants, and convergence log.
inline ConjugacyResult build_normal_form(const DiscreteEvolutionFamily& fam, const NormalFormOptions& opt = {}) {
    const int q = fam.dim();
    auto rep = detect_resonances(std::span<const cplx>(fam.form().eigenvalues), ResonanceMode::Multiplicative, opt.tau);
    const int p = rep.p;
    const std::size_t W = fam.horizon() + static_cast<std::size_t>(std::max(opt.pad, 1));

    int N1 = std::max({opt.order, p - 1, 2});
    if (N1 > opt.max_order) throw precondition_error("normal form needs order above max_order");
    if (!fam.exact() && N1 > fam.order())
        throw insufficient_order_error("family jets are known only to order " + std::to_string(fam.order()), N1);
    auto st = detail::run_stages(fam, N1, W, p, opt.tau);
    Constants c = estimate_constants(fam, st.T, p);
    int N = std::max(N1, c.ell);
    if (N > opt.max_order)
        throw precondition_error("l = " + std::to_string(c.ell) + " exceeds max_order " + std::to_string(opt.max_order));
    if (N > N1) {
        if (!fam.exact() && N > fam.order())
            throw insufficient_order_error("family jets are known only to order " + std::to_string(fam.order()) + ", need " + std::to_string(N), N);
        st = detail::run_stages(fam, N, W, p, opt.tau);
    }

    ConjugacyResult res;
    res.family = fam;
    res.order = N;
    res.window = W;
    res.k = std::move(st.k);
    for (auto& t : st.T) res.T.emplace_back(std::move(t));
    res.resonances = rep;
    res.absorbed = std::move(st.absorbed);
    res.point_tol = opt.point_tol;
    res.max_entry_steps = opt.max_entry_steps;
    for (const auto& t : res.T) {
        bool same = !res.T_inv.empty() && res.T[res.T_inv.size() - 1].jet() == t.jet();
        res.T_inv.push_back(same ? res.T_inv.back() : invert(t.jet(), N));
    }

    for (std::size_t n = 0; n < W; ++n) {
        PolyJet lhs = compose(res.k[n + 1], fam.step(n, N), N), rhs = compose(res.T[n].jet(), res.k[n], N);
        double scale = std::max({1.0, lhs.max_abs(), rhs.max_abs()});
        res.residuals.push_back(max_difference(lhs, rhs) / scale);
        res.max_residual = std::max(res.max_residual, res.residuals.back());
    }
    res.prepare();

    // C from the sampled defect on the r-sphere
    auto sphere = halton_sphere(q, c.r, 40);
    double sup = 0;
    for (std::size_t n = 0; n < W; ++n)
        for (const auto& w : sphere) {
            Point g = res.T_step(n).inverse_at(res.k[n + 1].evaluate(fam.apply(n, w))) - res.k[n].evaluate(w);
            sup = std::max(sup, g.norm());
        }
    c.sup_defect = std::max(sup, 64 * std::numeric_limits<double>::epsilon() * c.r);
    c.C = c.sup_defect / std::pow(c.r, c.ell);

    // Koebe-type radius: |Dk - I| <= 1/2 on rho-ball, s = rho - sup |k - id|
    double rho = c.r;
    auto deriv = [&](double x) {
        double v = 0;
        for (const auto& kk : res.k)
            v = std::max(v, [&] {
                double t = 0;
                for (int d = 2; d <= N; ++d) t += d * detail::homogeneous_bound(kk, d) * std::pow(x, d - 1);
                return t;
            }());
        return v;
    };
    for (int it = 0; it < 60 && deriv(rho) > 0.5; ++it) rho /= 1.25;
    double dev = 0;
    for (const auto& kk : res.k) {
        double t = 0;
        for (int d = 2; d <= N; ++d) t += detail::homogeneous_bound(kk, d) * std::pow(rho, d);
        dev = std::max(dev, t);
    }
    c.s = std::max(0.0, rho - dev);
    res.constants = c;

    // convergence log over the supplied samples, at n = 0
    const double rate = c.beta * std::pow(c.alpha, c.ell);
    std::map<std::size_t, double> worst;
    std::vector<Point> log_points = opt.samples;
    if (log_points.empty() && opt.log_samples) log_points = halton_ball(q, c.r, opt.log_samples, opt.sample_skip);
    for (const auto& z : log_points) {
        if (z.size() != q) throw precondition_error("sample dimension mismatch");
        if (z.norm() > c.r) continue;
        std::vector<double> inc;
        res.limit(0, z, &inc);
        for (std::size_t t = 0; t < inc.size(); ++t) worst[t] = std::max(worst[t], inc[t]);
    }
    for (auto& [m, v] : worst)
        res.convergence_log.push_back({m, v, 2 * c.C * std::pow(c.r, c.ell) * std::pow(rate, static_cast<double>(m))});
    return res;
}

struct ExtensionReport {
    std::vector<Point> values;
    std::vector<std::size_t> entry;  // u per sample
    double u_gap = 0;                // max |value(u) - value(u+1)|
};

/// h_n on arbitrary samples, with the u-independence check.
inline ExtensionReport extend_intertwining(const ConjugacyResult& res, std::size_t n, std::span<const Point> K) {
    ExtensionReport rep;
    for (const auto& z : K) {
        auto e = res.extend(n, z);
        auto e1 = res.extend(n, z, 1);
        rep.values.push_back(e.value);
        rep.entry.push_back(e.u);
        rep.u_gap = std::max(rep.u_gap, detail::max_norm(e.value - e1.value));
    }
    return rep;
}

/// Largest relative mismatch of f_m o phi_{n,m} = f_n over the samples and index pairs.
inline double chain_identity_residual(const ConjugacyResult& res, std::span<const Point> K, std::size_t n_max) {
    double worst = 0;
    for (std::size_t n = 0; n < n_max; ++n)
        for (std::size_t m = n + 1; m <= n_max && m < res.window; ++m)
            for (const auto& z : K) {
                Point a = res.chain(m, res.family.apply(n, m, z)), b = res.chain(n, z);
                worst = std::max(worst, (a - b).norm() / std::max(1e-300, b.norm()));
            }
    return worst;
}

/// r_n = min over the s-sphere of |T_{0,n}^{-1}|, for n = 0..n_max.
inline std::vector<double> range_growth_check(const ConjugacyResult& res, double s, std::size_t n_max,
                                              std::size_t directions = 160) {
    const int q = res.dim();
    auto dirs = halton_sphere(q, s, directions);
    std::vector<double> out;
    auto radius = [&](std::size_t n, const Point& w) { return res.T_inverse(0, n, w).norm(); };
    auto project = [&](Point w) { return Point(w * (s / w.norm())); };
    for (std::size_t n = 0; n <= n_max; ++n) {
        std::vector<std::pair<double, std::size_t>> vals;
        for (std::size_t d = 0; d < dirs.size(); ++d) vals.push_back({radius(n, dirs[d]), d});
        std::sort(vals.begin(), vals.end());
        double best = vals.front().first;
        // pattern search on the sphere from the best few starts
        for (std::size_t c = 0; c < std::min<std::size_t>(4, vals.size()); ++c) {
            Point w = dirs[vals[c].second];
            double f = vals[c].first, step = 0.25 * s;
            while (step > 1e-12 * s) {
                bool moved = false;
                for (int k = 0; k < q && !moved; ++k)
                    for (cplx e : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
                        Point t = w;
                        t(k) += step * e;
                        t = project(t);
                        double ft = radius(n, t);
                        if (ft < f) {
                            f = ft;
                            w = t;
                            moved = true;
                            break;
                        }
                    }
                if (!moved) step /= 2;
            }
            best = std::min(best, f);
        }
        out.push_back(best);
    }
    return out;
}

struct UnivalenceReport {
    bool jacobian_ok = true;
    bool injective_ok = true;
    bool critical_ok = true;
    double jacobian_defect = 0;
    std::vector<std::pair<std::size_t, std::size_t>> collisions;
    std::vector<std::size_t> critical;
    bool passed() const { return jacobian_ok && injective_ok && critical_ok; }
};

/// Sample-based univalence evidence: linear part at 0, pairwise injectivity, no critical points.
inline UnivalenceReport univalence_check(const std::function<Point(const Point&)>& map, const PolyJet* jet,
                                         std::span<const Point> samples, double delta, double eta = 1e-10,
                                         std::optional<Matrix> expected_linear = {}) {
    UnivalenceReport r;
    if (jet) {
        Matrix L = jet->linear_part();
        Matrix E = expected_linear.value_or(Matrix::Identity(L.rows(), L.cols()));
        r.jacobian_defect = max_abs(Matrix(L - E)) / std::max(1.0, max_abs(E));
        r.jacobian_ok = r.jacobian_defect <= 1e-8;
        cplx d0 = L.determinant();
        for (std::size_t a = 0; a < samples.size(); ++a) {
            cplx d = jet->jacobian(samples[a]).determinant();
            if (std::abs(d) <= 1e-8 * std::max(std::abs(d0), 1e-300)) {
                r.critical.push_back(a);
                r.critical_ok = false;
            }
        }
    }
    std::vector<Point> img;
    for (const auto& z : samples) img.push_back(map(z));
    for (std::size_t a = 0; a < samples.size(); ++a)
        for (std::size_t b = a + 1; b < samples.size(); ++b)
            if ((samples[a] - samples[b]).norm() >= delta && (img[a] - img[b]).norm() <= eta) {
                r.collisions.push_back({a, b});
                r.injective_ok = false;
            }
    return r;
}

} // namespace loewner
