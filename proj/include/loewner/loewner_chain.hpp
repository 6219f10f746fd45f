#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "herglotz.hpp"
#include "normal_form.hpp"

namespace loewner {

struct ChainOptions {
    int order = 6;
    double tol = 1e-10;        // jet integration tolerance
    double tau = 1e-9;
    int pad = 32;
    int max_order = 16;
    int steps_per_unit = 256;  // pointwise RK4
    double grid_step = 0.5;    // t-grid of the boundedness certificate
    std::size_t certificate_samples = 12;
};

struct BoundednessCertificate {
    double radius = 0;
    std::vector<double> times;
    std::vector<double> sup;       // max_z |e^{Lambda t} f_t(z)| per grid time
    double sup_max = 0;
    double discrete_bound = 0;     // max over the same points of |e^{Lambda m} f_m(phi_{t,m} z)|
    double declared_bound = 0;     // discrete_bound * max_{0<=u<=1} |e^{-Lambda u}|
    bool within_bound = false;
    bool trend_ok = false;         // no growth between the halves of the grid
    bool passed() const { return within_bound && trend_ok; }
};

// Continuous Loewner chain f_t = f_{ceil t} o phi_{t, ceil t} in original coordinates.
class LoewnerChain {
public:
    HerglotzFieldSpec field;
    ConjugacyResult result;
    int steps_per_unit = 256;
    double tol = 1e-10;
    std::optional<BoundednessCertificate> certificate;

    int dim() const { return field.q; }
    int order() const { return result.order; }
    const Matrix& Lambda() const { return field.Lambda; }
    std::size_t horizon() const { return result.family.horizon(); }
    double t_max() const { return static_cast<double>(horizon()); }

    /// Radius of a ball in original coordinates mapped into the r-ball of optimal coordinates.
    double validity_radius() const { return result.constants.r / spectral_norm(result.family.form().M); }

    Point phi(double s, double t, const Point& z) const {
        return integrate_point(field, *compiled_, s, t, z, steps_per_unit);
    }
    PolyJet phi_jet(double s, double t) const { return integrate_jet(field, s, t, order(), tol); }

    Point f(double t, const Point& z) const {
        std::size_t m = anchor(t);
        const auto& form = result.family.form();
        return form.M_inv * result.chain(m, Point(form.M * phi(t, static_cast<double>(m), z)));
    }

    PolyJet f_jet(double t) const {
        std::size_t m = anchor(t);
        const auto& form = result.family.form();
        const int N = order();
        PolyJet inner = compose(PolyJet::linear(form.M, N), phi_jet(t, static_cast<double>(m)), N);
        return compose(PolyJet::linear(form.M_inv, N), compose(chain_jets_.at(m), inner, N), N);
    }

    std::size_t anchor(double t) const {
        if (!(t >= 0) || t > t_max() + 1e-12) throw precondition_error("chain time outside [0, horizon]");
        return static_cast<std::size_t>(std::ceil(t - 1e-12));
    }

    void prepare() {
        compiled_ = std::make_shared<const CompiledField>(field);
        chain_jets_.clear();
        for (std::size_t m = 0; m <= horizon(); ++m) chain_jets_.push_back(result.chain_jet(m));
    }

private:
    std::shared_ptr<const CompiledField> compiled_;
    std::vector<PolyJet> chain_jets_;
};

inline double max_exp_norm(const Matrix& L, double sign) {
    double g = 0;
    for (int k = 0; k <= 64; ++k) g = std::max(g, spectral_norm(matrix_exp(Matrix(sign * (k / 64.0) * L))));
    return g;
}

/// Sampled sup of |e^{Lambda t} f_t| over a t-grid, with the bound inherited from integer times.
inline BoundednessCertificate boundedness_certificate(const LoewnerChain& ch, double radius, std::size_t count,
                                                      double grid_step) {
    BoundednessCertificate c;
    c.radius = radius;
    auto K = halton_ball(ch.dim(), radius, count);
    const auto& form = ch.result.family.form();
    const int steps = static_cast<int>(std::round(ch.t_max() / grid_step));
    for (int g = 0; g <= steps; ++g) {
        double t = std::min(ch.t_max(), g * grid_step);
        std::size_t m = ch.anchor(t);
        Matrix Et = matrix_exp(Matrix(t * ch.Lambda())), Em = matrix_exp(Matrix(static_cast<double>(m) * ch.Lambda()));
        double sup = 0;
        for (const auto& z : K) {
            Point w = ch.phi(t, static_cast<double>(m), z);
            Point fm = form.M_inv * ch.result.chain(m, Point(form.M * w));
            sup = std::max(sup, (Et * fm).norm());
            c.discrete_bound = std::max(c.discrete_bound, (Em * fm).norm());
        }
        c.times.push_back(t);
        c.sup.push_back(sup);
        c.sup_max = std::max(c.sup_max, sup);
    }
    c.declared_bound = c.discrete_bound * max_exp_norm(ch.Lambda(), -1.0) * (1 + 1e-9);
    c.within_bound = c.sup_max <= c.declared_bound;
    const std::size_t half = c.sup.size() / 2;
    double first = *std::max_element(c.sup.begin(), c.sup.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(half, 1)));
    double second = *std::max_element(c.sup.begin() + static_cast<std::ptrdiff_t>(half), c.sup.end());
    c.trend_ok = std::isfinite(c.sup_max) && second <= 2 * first;
    return c;
}

/// discretize -> normal form, raising the jet order until it covers l.
inline ConjugacyResult field_normal_form(const HerglotzFieldSpec& field, int T, const ChainOptions& opt,
                                         std::size_t log_samples = 0, std::size_t sample_skip = 0) {
    field.validate();
    int N = std::max(opt.order, 2);
    for (int attempt = 0; attempt < 4; ++attempt) {
        auto fam = discretize(field, T, N, opt.tol, opt.steps_per_unit);
        NormalFormOptions nf;
        nf.order = N;
        nf.tau = opt.tau;
        nf.pad = opt.pad;
        nf.max_order = opt.max_order;
        nf.log_samples = log_samples;
        nf.sample_skip = sample_skip;
        try {
            return build_normal_form(fam, nf);
        } catch (const insufficient_order_error& e) {
            N = e.needed;
        }
    }
    throw convergence_error("jet order did not settle");
}

/// discretize -> normal form -> discrete chain -> continuous extension.
inline LoewnerChain build_chain(const HerglotzFieldSpec& field, int T, const ChainOptions& opt = {}) {
    LoewnerChain ch;
    ch.field = field;
    ch.steps_per_unit = opt.steps_per_unit;
    ch.tol = opt.tol;
    ch.result = field_normal_form(field, T, opt);
    ch.prepare();
    if (ch.result.resonances.empty() && opt.certificate_samples > 0)
        ch.certificate = boundedness_certificate(ch, 0.5 * ch.validity_radius(), opt.certificate_samples, opt.grid_step);
    return ch;
}

// ---- evaluator view shared by live chains and chain documents ----

struct ChainView {
    Matrix Lambda;
    double radius = 0;                     // sample ball
    double bound = INFINITY;               // declared bound on |e^{Lambda t} f_t| over the ball
    std::vector<double> times;             // t-grid
    std::vector<PolyJet> jets;             // f_t jets on the grid
    std::function<Point(double, const Point&)> f;
    std::function<Point(double, double, const Point&)> phi;
    std::function<PolyJet(double, double)> phi_jet;
};

inline std::vector<double> time_grid(double t_max, double step) {
    std::vector<double> g;
    const int n = static_cast<int>(std::round(t_max / step));
    for (int k = 0; k <= n; ++k) g.push_back(std::min(t_max, k * step));
    return g;
}

inline ChainView chain_view(const LoewnerChain& ch, const std::vector<double>& times) {
    ChainView v;
    v.Lambda = ch.Lambda();
    v.radius = 0.5 * ch.validity_radius();
    if (ch.certificate) v.bound = ch.certificate->declared_bound;
    v.times = times;
    for (double t : times) v.jets.push_back(ch.f_jet(t));
    v.f = [&ch](double t, const Point& z) { return ch.f(t, z); };
    v.phi = [&ch](double s, double t, const Point& z) { return ch.phi(s, t, z); };
    v.phi_jet = [&ch](double s, double t) { return ch.phi_jet(s, t); };
    return v;
}

/// f_t(z) = f_g(phi_{t,g}(z)) with g the first grid time >= t.
inline std::function<Point(double, const Point&)> grid_evaluator(const ChainView& v) {
    return [times = v.times, jets = v.jets, phi = v.phi](double t, const Point& z) {
        auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
        if (it == times.end()) throw precondition_error("time past the end of the chain grid");
        auto g = static_cast<std::size_t>(it - times.begin());
        return jets[g].evaluate(phi(t, std::max(t, times[g]), z));
    };
}

struct PdeResidual {
    double max_abs = 0;
    double max_rel = 0;  // relative to |df_t H|
    std::size_t count = 0;
};

/// |d/dt f_t(z) + df_t(z) H(z,t)| with a central time difference of step h.
/// df_t(z) H is a four-point holomorphic difference along H, accurate to O(eps^4).
inline PdeResidual pde_residual(const std::function<Point(double, const Point&)>& f, const HerglotzFieldSpec& field,
                                const std::vector<std::pair<double, Point>>& samples, double h, double t_max,
                                double radius) {
    if (samples.empty()) throw precondition_error("pde_residual: empty sample set");
    if (!(h > 0)) throw precondition_error("pde_residual: time step must be positive");
    CompiledField H(field);
    PdeResidual r;
    for (const auto& [t, z] : samples) {
        if (t < 0 || t > t_max) throw precondition_error("pde_residual: sample time outside [0, T-1]");
        if (!(z.norm() <= radius)) throw precondition_error("pde_residual: sample outside the validity ball");
        Point dt;
        if (t - h >= 0) dt = (f(t + h, z) - f(t - h, z)) / (2 * h);
        else dt = (-3.0 * f(t, z) + 4.0 * f(t + h, z) - f(t + 2 * h, z)) / (2 * h);
        Point v = H(z, t);
        const double vn = v.norm();
        Point dfv = Point::Zero(z.size());
        if (vn > 0) {
            const double eps = 1e-3 * std::max(z.norm(), 1e-3) / vn;
            const cplx rot[4] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
            for (int k = 0; k < 4; ++k) dfv += std::conj(rot[k]) * f(t, Point(z + eps * rot[k] * v));
            dfv /= 4 * eps;
        }
        double e = (dt + dfv).norm();
        r.max_abs = std::max(r.max_abs, e);
        r.max_rel = std::max(r.max_rel, e / std::max(dfv.norm(), 1e-300));
        ++r.count;
    }
    return r;
}

inline PdeResidual pde_residual(const LoewnerChain& ch, const std::vector<std::pair<double, Point>>& samples, double h) {
    return pde_residual([&ch](double t, const Point& z) { return ch.f(t, z); }, ch.field, samples, h,
                        ch.t_max() - 1, ch.validity_radius());
}

struct SubordinationReport {
    bool linear_ok = true;
    bool transitions_ok = true;
    bool bounded_ok = true;
    bool univalent_ok = true;
    double linear_defect = 0;
    double transition_sup = 0;   // max |phi_{s,t}(z)| / radius
    double sup_normalized = 0;   // max |e^{Lambda t} f_t(z)|
    std::optional<double> offending_t;
    std::vector<double> non_univalent_t;
    bool passed() const { return linear_ok && transitions_ok && bounded_ok && univalent_ok; }
};

/// (a) transitions invert(f_t) o f_s map the ball into itself, (b) |e^{Lambda t} f_t| stays below the
/// declared bound, (c) each f_t passes the univalence check. Linear parts must be e^{-Lambda t}.
inline SubordinationReport verify_subordination_chain(const ChainView& v, std::span<const Point> samples,
                                                      double delta = 1e-3) {
    if (samples.empty()) throw precondition_error("verify_subordination_chain: empty sample set");
    if (v.jets.size() != v.times.size()) throw precondition_error("chain view: one jet per grid time required");
    SubordinationReport r;
    const auto G = v.times.size();
    std::vector<Matrix> lin;
    for (std::size_t g = 0; g < G; ++g) {
        Matrix E = matrix_exp(Matrix(-v.times[g] * v.Lambda));
        lin.push_back(E);
        double d = max_abs(Matrix(v.jets[g].linear_part() - E)) / std::max(1.0, max_abs(E));
        r.linear_defect = std::max(r.linear_defect, d);
    }
    r.linear_ok = r.linear_defect <= 1e-8;
    if (!r.linear_ok) r.transitions_ok = r.univalent_ok = r.bounded_ok = false;
    if (!r.linear_ok) return r;

    const int N = v.jets[0].order();
    for (std::size_t g = 0; g + 1 < G; ++g) {
        PolyJet tr = compose(invert(v.jets[g + 1], N), v.jets[g], N);
        for (const auto& z : samples) r.transition_sup = std::max(r.transition_sup, tr.evaluate(z).norm() / v.radius);
    }
    r.transitions_ok = r.transition_sup <= 1 + 1e-9;

    for (std::size_t g = 0; g < G; ++g) {
        Matrix Et = lin[g].inverse();
        double sup = 0;
        for (const auto& z : samples) sup = std::max(sup, (Et * v.f(v.times[g], z)).norm());
        r.sup_normalized = std::max(r.sup_normalized, sup);
        if (!(sup <= v.bound) && !r.offending_t) r.offending_t = v.times[g];
    }
    r.bounded_ok = !r.offending_t;

    for (std::size_t g = 0; g < G; ++g) {
        const double t = v.times[g];
        auto u = univalence_check([&](const Point& z) { return v.f(t, z); }, &v.jets[g], samples, delta, 1e-10, lin[g]);
        if (!u.passed()) r.non_univalent_t.push_back(t);
    }
    r.univalent_ok = r.non_univalent_t.empty();
    return r;
}

struct ChainIdentityReport {
    double jet_residual = 0;    // |f_t o phi_{s,t} - f_s| on jets, relative
    double point_residual = 0;  // same on samples
    bool passed(double tol = 1e-8) const { return jet_residual <= tol && point_residual <= tol; }
};

/// Two-path check f_s = f_t o phi_{s,t} over consecutive grid pairs.
inline ChainIdentityReport chain_identity_check(const ChainView& v, std::span<const Point> samples) {
    ChainIdentityReport r;
    for (std::size_t g = 0; g + 1 < v.times.size(); ++g) {
        const double s = v.times[g], t = v.times[g + 1];
        const int N = v.jets[g].order();
        PolyJet lhs = compose(v.jets[g + 1], v.phi_jet(s, t), N);
        r.jet_residual = std::max(r.jet_residual, max_difference(lhs, v.jets[g]) / std::max(1.0, v.jets[g].max_abs()));
        for (const auto& z : samples) {
            Point a = v.f(t, v.phi(s, t, z)), b = v.f(s, z);
            r.point_residual = std::max(r.point_residual, (a - b).norm() / std::max(b.norm(), 1e-300));
        }
    }
    return r;
}

struct AttractionEntry {
    std::size_t steps = 0;  // m - n
    bool converged = false;
    double final_norm = 0;
};

/// Iterate phi_{n,m} on original-coordinate samples until the max-norm drops below tol.
inline std::vector<AttractionEntry> attraction_check(const DiscreteEvolutionFamily& fam, std::span<const Point> K,
                                                     double tol, std::size_t n = 0, std::size_t max_steps = 10000) {
    std::vector<AttractionEntry> out;
    for (const auto& z : K) {
        AttractionEntry e;
        Point w = fam.to_optimal(z);
        Point x = z;
        std::size_t m = n;
        while (detail::max_norm(x) >= tol && m - n < max_steps && x.allFinite()) {
            w = fam.apply(m++, w);
            x = fam.from_optimal(w);
        }
        e.steps = m - n;
        e.final_norm = detail::max_norm(x);
        e.converged = e.final_norm < tol;
        out.push_back(e);
    }
    return out;
}

} // namespace loewner
