#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "evolution_family.hpp"
#include "jet_json.hpp"

namespace loewner {

// Scalar coefficient c(t): constant, piecewise constant on [t_k, t_{k+1}), or
// sampled with linear interpolation. Both non-constant kinds hold their end
// values outside the sampled range.
class TimeFunction {
public:
    enum class Kind { Constant, Piecewise, Sampled };

    TimeFunction() = default;

    static TimeFunction constant(cplx v) {
        TimeFunction f;
        f.times_ = {0.0};
        f.values_ = {v};
        return f;
    }
    static TimeFunction piecewise(std::vector<double> times, std::vector<cplx> values) {
        return make(Kind::Piecewise, std::move(times), std::move(values));
    }
    static TimeFunction sampled(std::vector<double> times, std::vector<cplx> values) {
        return make(Kind::Sampled, std::move(times), std::move(values));
    }

    Kind kind() const { return kind_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<cplx>& values() const { return values_; }
    bool is_constant() const { return kind_ == Kind::Constant; }

    cplx operator()(double t) const {
        if (kind_ == Kind::Constant) return values_[0];
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return values_.front();
        auto k = static_cast<std::size_t>(it - times_.begin()) - 1;
        if (kind_ == Kind::Piecewise || k + 1 == times_.size()) return values_[k];
        double u = (t - times_[k]) / (times_[k + 1] - times_[k]);
        return (1 - u) * values_[k] + u * values_[k + 1];
    }

    /// Times where c is not smooth.
    std::vector<double> breakpoints() const { return kind_ == Kind::Constant ? std::vector<double>{} : times_; }

    double sup() const {
        double s = 0;
        for (auto v : values_) s = std::max(s, std::abs(v));
        return s;
    }

private:
    static TimeFunction make(Kind kind, std::vector<double> times, std::vector<cplx> values) {
        if (times.empty() || times.size() != values.size())
            throw precondition_error("time function needs matching, nonempty times and values");
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!std::isfinite(times[k]) || !std::isfinite(values[k].real()) || !std::isfinite(values[k].imag()))
                throw precondition_error("time function has a non-finite entry");
            if (k && !(times[k] > times[k - 1])) throw precondition_error("time function times must increase strictly");
        }
        TimeFunction f;
        f.kind_ = kind;
        f.times_ = std::move(times);
        f.values_ = std::move(values);
        return f;
    }

    Kind kind_ = Kind::Constant;
    std::vector<double> times_{0.0};
    std::vector<cplx> values_{cplx(0)};
};

struct FieldTerm {
    int component;  // 0-based
    MultiIndex index;
    TimeFunction coeff;
};

// H(z, t) = Lambda z + sum_k c_k(t) z^{I_k} e_{j_k}.
struct HerglotzFieldSpec {
    int q = 1;
    Matrix Lambda;
    int order = 2;
    std::vector<FieldTerm> terms;
    int horizon = 1;

    void validate() const {
        if (q < 1) throw precondition_error("field dimension must be positive");
        if (Lambda.rows() != q || Lambda.cols() != q) throw precondition_error("Lambda must be q x q");
        if (!Lambda.allFinite()) throw precondition_error("Lambda has a non-finite entry");
        if (order < 2) throw precondition_error("field order must be at least 2");
        if (horizon < 1) throw precondition_error("horizon must be at least 1");
        Eigen::ComplexEigenSolver<Matrix> es(Lambda, false);
        for (Eigen::Index k = 0; k < q; ++k) {
            cplx ev = es.eigenvalues()(k);
            if (ev.real() >= 0) {
                std::ostringstream os;
                os << "Lambda is not dissipative: eigenvalue " << ev.real() << (ev.imag() < 0 ? " - " : " + ")
                   << std::abs(ev.imag()) << "i has nonnegative real part";
                throw precondition_error(os.str());
            }
        }
        for (const auto& t : terms) {
            if (t.component < 0 || t.component >= q) throw precondition_error("field term component out of range");
            if (t.index.dim() != q) throw precondition_error("field term index has wrong length");
            for (int e : t.index.entries())
                if (e < 0) throw precondition_error("field term index has a negative entry");
            int d = t.index.degree();
            if (d < 2) throw precondition_error("field terms must have degree at least 2 (H = Lambda z + O(|z|^2))");
            if (d > order) throw precondition_error("field term degree exceeds the declared order");
        }
    }

    bool autonomous() const {
        return std::all_of(terms.begin(), terms.end(), [](const FieldTerm& t) { return t.coeff.is_constant(); });
    }

    double last_breakpoint() const {
        double b = 0;
        for (const auto& t : terms)
            for (double x : t.coeff.breakpoints()) b = std::max(b, x);
        return b;
    }

    /// Sorted breakpoints strictly inside (s, t).
    std::vector<double> breakpoints(double s, double t) const {
        std::vector<double> b;
        for (const auto& term : terms)
            for (double x : term.coeff.breakpoints())
                if (x > s && x < t) b.push_back(x);
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    /// Uniform coefficient bound, the declared local integrability constant.
    double coefficient_bound() const {
        double c = max_abs(Lambda);
        for (const auto& t : terms) c = std::max(c, t.coeff.sup());
        return c;
    }

    /// Jet of H(., t) at order N.
    PolyJet jet(double t, int N) const {
        PolyJet h = PolyJet::linear(Lambda, N);
        for (const auto& term : terms)
            if (term.index.degree() <= N) {
                auto pos = static_cast<std::size_t>(h.table().position(term.index));
                h.at(term.component, pos) += term.coeff(t);
            }
        return h;
    }
};

// Flat evaluator of H(z, t) for pointwise integration.
class CompiledField {
public:
    explicit CompiledField(const HerglotzFieldSpec& f) : q_(f.q), Lambda_(f.Lambda) {
        for (const auto& t : f.terms) {
            Term c{t.component, {}, t.coeff};
            for (int k = 0; k < f.q; ++k)
                for (int e = 0; e < t.index[k]; ++e) c.factors.push_back(k);
            terms_.push_back(std::move(c));
        }
    }

    int dim() const { return q_; }

    void eval(const cplx* z, double t, cplx* out) const {
        for (int j = 0; j < q_; ++j) {
            cplx s = 0;
            for (int k = 0; k < q_; ++k) s += Lambda_(j, k) * z[k];
            out[j] = s;
        }
        for (const auto& term : terms_) {
            cplx m = term.coeff(t);
            for (int k : term.factors) m *= z[k];
            out[term.component] += m;
        }
    }

    Point operator()(const Point& z, double t) const {
        Point out(q_);
        eval(z.data(), t, out.data());
        return out;
    }

private:
    struct Term {
        int component;
        std::vector<int> factors;
        TimeFunction coeff;
    };
    int q_;
    Matrix Lambda_;
    std::vector<Term> terms_;
};

namespace detail {

// [s, t] cut at the field breakpoints
inline std::vector<double> segments(const HerglotzFieldSpec& f, double s, double t) {
    std::vector<double> cuts{s};
    for (double b : f.breakpoints(s, t)) cuts.push_back(b);
    cuts.push_back(t);
    return cuts;
}

inline std::size_t step_count(double len, double h) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / h - 1e-9)));
}

// classical RK4 on the coefficient ODE dJ/dt = jet_N(H(., t) o J)
inline PolyJet rk4_jet(const HerglotzFieldSpec& f, double s, double t, int N, double h) {
    PolyJet J = PolyJet::identity(f.q, N);
    auto cuts = segments(f, s, t);
    const bool autonomous = f.autonomous();
    std::optional<PolyJet> H0;
    if (autonomous) H0 = f.jet(s, N);
    auto field_at = [&](double x) { return autonomous ? *H0 : f.jet(x, N); };
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double a = cuts[c], len = cuts[c + 1] - a;
        const std::size_t n = step_count(len, h);
        const double dt = len / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            // sample inside the segment so piecewise coefficients see their own piece
            double x0 = a + dt * static_cast<double>(k), xm = x0 + dt / 2, x1 = x0 + dt;
            if (k + 1 == n) x1 = std::nextafter(cuts[c + 1], a);
            PolyJet Hm = field_at(xm);
            PolyJet k1 = compose(field_at(x0), J, N);
            PolyJet k2 = compose(Hm, J + cplx(dt / 2) * k1, N);
            PolyJet k3 = compose(Hm, J + cplx(dt / 2) * k2, N);
            PolyJet k4 = compose(field_at(x1), J + cplx(dt) * k3, N);
            J = J + cplx(dt / 6) * (k1 + cplx(2) * k2 + cplx(2) * k3 + k4);
        }
    }
    return J;
}

} // namespace detail

struct JetFlow {
    PolyJet jet;
    double residual = 0;  // midpoint-split cocycle mismatch at the accepted step
    double step = 0;
};

/// Jet of phi_{s,t} at order N by RK4 with step halving.
///
/// A step h is accepted once phi_{s,t} at step h and phi_{m,t} o phi_{s,m} at
/// step h/2 (m the midpoint) agree within tol, relative to 1 + |J|.
inline JetFlow integrate_jet_report(const HerglotzFieldSpec& f, double s, double t, int N, double tol = 1e-10,
                                    double h_min = 1.0 / 16384) {
    if (!(s <= t)) throw precondition_error("integrate_jet needs s <= t");
    if (N < 1) throw precondition_error("integrate_jet needs order >= 1");
    if (!(tol > 0)) throw precondition_error("integration tolerance must be positive");
    if (s == t) return {PolyJet::identity(f.q, N), 0, 0};
    const double mid = 0.5 * (s + t);
    double h = std::min(0.125, 0.125 / std::max(1.0, f.coefficient_bound()));
    double last = INFINITY;
    while (true) {
        PolyJet full = detail::rk4_jet(f, s, t, N, h);
        PolyJet split = compose(detail::rk4_jet(f, mid, t, N, h / 2), detail::rk4_jet(f, s, mid, N, h / 2), N);
        last = max_difference(full, split) / (1 + split.max_abs());
        if (last <= tol) return {split, last, h / 2};
        h /= 2;
        if (h < h_min) {
            std::ostringstream os;
            os << "integrate_jet: tolerance " << tol << " unreachable at minimum step, residual " << last;
            throw convergence_error(os.str());
        }
    }
}

inline PolyJet integrate_jet(const HerglotzFieldSpec& f, double s, double t, int N, double tol = 1e-10) {
    return integrate_jet_report(f, s, t, N, tol).jet;
}

/// phi_{s,t}(z) by fixed-step RK4, steps aligned to breakpoints.
inline Point integrate_point(const HerglotzFieldSpec& spec, const CompiledField& f, double s, double t, Point z,
                             int steps_per_unit = 256) {
    if (!(s <= t)) throw precondition_error("integrate_point needs s <= t");
    if (s == t) return z;
    const int q = f.dim();
    std::vector<cplx> k1(q), k2(q), k3(q), k4(q), tmp(q);
    const double h = 1.0 / steps_per_unit;
    auto cuts = detail::segments(spec, s, t);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double a = cuts[c], len = cuts[c + 1] - a;
        const std::size_t n = detail::step_count(len, h);
        const double dt = len / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            double x0 = a + dt * static_cast<double>(k), xm = x0 + dt / 2, x1 = x0 + dt;
            if (k + 1 == n) x1 = std::nextafter(cuts[c + 1], a);
            f.eval(z.data(), x0, k1.data());
            for (int j = 0; j < q; ++j) tmp[j] = z(j) + (dt / 2) * k1[j];
            f.eval(tmp.data(), xm, k2.data());
            for (int j = 0; j < q; ++j) tmp[j] = z(j) + (dt / 2) * k2[j];
            f.eval(tmp.data(), xm, k3.data());
            for (int j = 0; j < q; ++j) tmp[j] = z(j) + dt * k3[j];
            f.eval(tmp.data(), x1, k4.data());
            for (int j = 0; j < q; ++j) z(j) += (dt / 6) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    return z;
}

inline Point integrate_point(const HerglotzFieldSpec& spec, double s, double t, const Point& z, int steps_per_unit = 256) {
    return integrate_point(spec, CompiledField(spec), s, t, z, steps_per_unit);
}

/// Horizon actually used: the requested one, extended to cover the last breakpoint.
inline std::size_t effective_horizon(const HerglotzFieldSpec& f, int T) {
    return std::max<std::size_t>(static_cast<std::size_t>(std::max(T, 1)),
                                 static_cast<std::size_t>(std::ceil(f.last_breakpoint() - 1e-12)));
}

/// Discretized family phi_{n,n+1}, n < T, with linear part e^Lambda and a Constant tail.
/// Pointwise steps integrate the field itself, so the family is exact away from 0 as well.
inline DiscreteEvolutionFamily discretize(const HerglotzFieldSpec& f, int T, int N, double tol = 1e-10,
                                          int steps_per_unit = 256) {
    f.validate();
    const std::size_t Te = effective_horizon(f, T);
    const Matrix E = matrix_exp(f.Lambda);
    const bool autonomous = f.autonomous();
    const double settle = f.last_breakpoint();
    std::vector<PolyJet> steps;
    for (std::size_t n = 0; n < Te; ++n) {
        // after the last breakpoint the field is autonomous and the steps repeat
        if (!steps.empty() && (autonomous || static_cast<double>(n) - 1 >= settle)) {
            steps.push_back(steps.back());
            continue;
        }
        PolyJet J = integrate_jet(f, static_cast<double>(n), static_cast<double>(n + 1), N, tol);
        for (int j = 0; j < f.q; ++j)
            for (int k = 0; k < f.q; ++k) J.at(j, 1 + static_cast<std::size_t>(k)) = E(j, k);
        steps.push_back(std::move(J));
    }
    auto fam = DiscreteEvolutionFamily::from_steps(std::move(steps), TailPolicy::Constant, false);
    auto compiled = std::make_shared<const CompiledField>(f);
    auto spec = std::make_shared<const HerglotzFieldSpec>(f);
    fam.set_pointwise([compiled, spec, steps_per_unit](std::size_t n, const Point& z) {
        return integrate_point(*spec, *compiled, static_cast<double>(n), static_cast<double>(n + 1), z, steps_per_unit);
    });
    return fam;
}

// ---- JSON ----

inline json time_function_to_json(const TimeFunction& f) {
    if (f.kind() == TimeFunction::Kind::Constant) return json{{"kind", "constant"}, {"value", complex_to_json(f.values()[0])}};
    json vals = json::array();
    for (auto v : f.values()) vals.push_back(complex_to_json(v));
    return json{{"kind", f.kind() == TimeFunction::Kind::Piecewise ? "piecewise" : "sampled"},
                {"times", f.times()},
                {"values", vals}};
}

inline TimeFunction time_function_from_json(const json& j) {
    try {
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "constant") return TimeFunction::constant(complex_from_json(j.at("value")));
        auto times = j.at("times").get<std::vector<double>>();
        std::vector<cplx> values;
        for (const auto& v : j.at("values")) values.push_back(complex_from_json(v));
        if (kind == "piecewise") return TimeFunction::piecewise(std::move(times), std::move(values));
        if (kind == "sampled") return TimeFunction::sampled(std::move(times), std::move(values));
        throw format_error("unknown time function kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw format_error(std::string("time function: ") + e.what());
    }
}

inline json field_to_json(const HerglotzFieldSpec& f) {
    json terms = json::array();
    for (const auto& t : f.terms)
        terms.push_back({{"component", t.component + 1}, {"index", t.index.entries()}, {"time", time_function_to_json(t.coeff)}});
    return json{{"q", f.q}, {"Lambda", matrix_to_json(f.Lambda)}, {"order", f.order}, {"terms", terms}, {"horizon", f.horizon}};
}

/// Parses the field file; shape errors are format_error, contract violations surface from validate().
inline HerglotzFieldSpec field_from_json(const json& j) {
    HerglotzFieldSpec f;
    try {
        f.q = j.at("q").get<int>();
        if (f.q < 1) throw format_error("field: q must be positive");
        f.Lambda = matrix_from_json(j.at("Lambda"));
        f.order = j.value("order", 2);
        f.horizon = j.value("horizon", 8);
        for (const auto& t : j.value("terms", json::array())) {
            FieldTerm term{t.at("component").get<int>() - 1, index_from_json(t.at("index"), f.q),
                           time_function_from_json(t.at("time"))};
            f.terms.push_back(std::move(term));
        }
    } catch (const json::exception& e) {
        throw format_error(std::string("field: ") + e.what());
    }
    return f;
}

} // namespace loewner
