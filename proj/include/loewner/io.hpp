#pragma once

#include <string>
#include <vector>

#include "loewner_chain.hpp"

namespace loewner {

inline constexpr const char* schema_version = "loewner/1";

inline json constants_to_json(const Constants& c) {
    return json{{"norm_bound", c.norm_bound}, {"alpha", c.alpha}, {"C2", c.C2},     {"r", c.r},
                {"beta", c.beta},             {"ell", c.ell},     {"p", c.p},       {"sup_defect", c.sup_defect},
                {"C", c.C},                   {"s", c.s},         {"beta_order", c.beta_order}};
}

inline json optimal_form_to_json(const OptimalForm& f) {
    json ev = json::array();
    for (auto v : f.eigenvalues) ev.push_back(complex_to_json(v));
    return json{{"A", matrix_to_json(f.A)}, {"M", matrix_to_json(f.M)}, {"M_inv", matrix_to_json(f.M_inv)},
                {"eigenvalues", ev},        {"epsilon", f.epsilon},    {"residual", f.residual}};
}

// ---- discrete family documents: {"q", "tail": "constant"|"zero", "steps": [jet, ...]} ----

inline bool is_family_document(const json& j) { return j.is_object() && j.contains("steps"); }

inline json family_to_json(const std::vector<PolyJet>& steps, TailPolicy tail) {
    json s = json::array();
    for (const auto& f : steps) s.push_back(jet_to_json(f));
    return json{{"q", steps.empty() ? 0 : steps[0].dim()},
                {"tail", tail == TailPolicy::Constant ? "constant" : "zero"},
                {"steps", s}};
}

/// Steps are read as exact polynomial maps.
inline DiscreteEvolutionFamily family_from_json(const json& j) {
    std::vector<PolyJet> steps;
    TailPolicy tail = TailPolicy::Constant;
    try {
        std::string t = j.value("tail", std::string("constant"));
        if (t == "zero") tail = TailPolicy::Zero;
        else if (t != "constant") throw format_error("family: tail must be 'constant' or 'zero'");
        for (const auto& s : j.at("steps")) steps.push_back(jet_from_json(s));
        if (j.contains("q"))
            for (const auto& s : steps)
                if (s.dim() != j.at("q").get<int>()) throw format_error("family: step dimension differs from q");
    } catch (const json::exception& e) {
        throw format_error(std::string("family: ") + e.what());
    }
    if (steps.empty()) throw format_error("family: no steps");
    for (const auto& s : steps) {
        for (int j2 = 0; j2 < s.dim(); ++j2)
            if (s.at(j2, 0) != cplx(0)) throw precondition_error("family steps must fix the origin");
    }
    const Matrix A = steps[0].linear_part();
    if (spectral_radius(A) >= 1) throw precondition_error("family linear part is not contracting (spectral radius >= 1)");
    if (std::abs(A.determinant()) == 0) throw precondition_error("family linear part is singular");
    return DiscreteEvolutionFamily::from_steps(std::move(steps), tail, true);
}

inline json conjugacy_to_json(const ConjugacyResult& r) {
    json k = json::array(), T = json::array(), absorbed = json::array(), log = json::array();
    for (const auto& x : r.k) k.push_back(jet_to_json(x));
    for (const auto& x : r.T) T.push_back(jet_to_json(x.jet()));
    for (const auto& a : r.absorbed)
        absorbed.push_back({{"component", a.component + 1}, {"index", a.index.entries()},
                            {"first", complex_to_json(a.first)}, {"sup", a.sup}});
    for (const auto& e : r.convergence_log) log.push_back({{"m", e.m}, {"increment", e.increment}, {"bound", e.bound}});
    return json{{"order", r.order},
                {"horizon", r.family.horizon()},
                {"window", r.window},
                {"tail", r.family.tail() == TailPolicy::Constant ? "constant" : "zero"},
                {"optimal_form", optimal_form_to_json(r.family.form())},
                {"constants", constants_to_json(r.constants)},
                {"resonances", resonance_report_to_json(r.resonances)},
                {"absorbed", absorbed},
                {"max_residual", r.max_residual},
                {"residuals", r.residuals},
                {"k", k},
                {"T", T},
                {"convergence_log", log}};
}

inline json certificate_to_json(const BoundednessCertificate& c) {
    return json{{"radius", c.radius},
                {"times", c.times},
                {"sup", c.sup},
                {"sup_max", c.sup_max},
                {"discrete_bound", c.discrete_bound},
                {"declared_bound", c.declared_bound},
                {"within_bound", c.within_bound},
                {"trend_ok", c.trend_ok}};
}

// ---- chain documents: self-contained (field + f_t jets on a t-grid) ----

/// Largest radius (halving from half the validity radius) on which the grid jets reproduce
/// the pointwise chain to the given relative accuracy.
inline double jet_accuracy_radius(const LoewnerChain& ch, const std::vector<double>& times,
                                  const std::vector<PolyJet>& jets, double accuracy = 1e-10) {
    double rho = 0.5 * ch.validity_radius();
    for (int it = 0; it < 40; ++it, rho /= 2) {
        bool ok = true;
        for (std::size_t g = 0; g < times.size() && ok; ++g)
            for (const auto& z : halton_sphere(ch.dim(), rho, 4)) {
                Point a = jets[g].evaluate(z), b = ch.f(times[g], z);
                if ((a - b).norm() > accuracy * b.norm()) {
                    ok = false;
                    break;
                }
            }
        if (ok) return rho;
    }
    return rho;
}

inline json chain_to_json(const LoewnerChain& ch, const std::vector<double>& times) {
    json jets = json::array();
    std::vector<PolyJet> J;
    for (double t : times) J.push_back(ch.f_jet(t));
    for (const auto& x : J) jets.push_back(jet_to_json(x));
    json doc{{"field", field_to_json(ch.field)},
             {"order", ch.order()},
             {"tol", ch.tol},
             {"steps_per_unit", ch.steps_per_unit},
             {"horizon", ch.horizon()},
             {"validity_radius", ch.validity_radius()},
             {"radius", jet_accuracy_radius(ch, times, J)},
             {"times", times},
             {"jets", jets},
             {"constants", constants_to_json(ch.result.constants)},
             {"resonances", resonance_report_to_json(ch.result.resonances)},
             {"certificate", ch.certificate ? certificate_to_json(*ch.certificate) : json(nullptr)},
             {"bound", ch.certificate ? json(ch.certificate->declared_bound) : json(nullptr)}};
    return doc;
}

struct ChainDocument {
    HerglotzFieldSpec field;
    ChainView view;
    std::size_t horizon = 0;
    int steps_per_unit = 256;
    double tol = 1e-10;
};

/// View over a chain document: f_t from the stored jets, phi from the stored field.
inline ChainDocument chain_from_json(const json& j) {
    ChainDocument d;
    try {
        d.field = field_from_json(j.at("field"));
        d.tol = j.value("tol", 1e-10);
        d.steps_per_unit = j.value("steps_per_unit", 256);
        d.horizon = j.at("horizon").get<std::size_t>();
        d.view.radius = j.at("radius").get<double>();
        d.view.bound = j.at("bound").is_null() ? INFINITY : j.at("bound").get<double>();
        d.view.times = j.at("times").get<std::vector<double>>();
        for (const auto& s : j.at("jets")) d.view.jets.push_back(jet_from_json(s));
    } catch (const json::exception& e) {
        throw format_error(std::string("chain: ") + e.what());
    }
    if (d.view.times.empty() || d.view.times.size() != d.view.jets.size())
        throw format_error("chain: one jet per grid time required");
    for (const auto& J : d.view.jets)
        if (J.dim() != d.field.q) throw format_error("chain: jet dimension differs from the field");
    d.field.validate();
    d.view.Lambda = d.field.Lambda;
    auto spec = std::make_shared<const HerglotzFieldSpec>(d.field);
    auto compiled = std::make_shared<const CompiledField>(d.field);
    const int spu = d.steps_per_unit, N = d.view.jets[0].order();
    const double tol = d.tol;
    d.view.phi = [spec, compiled, spu](double s, double t, const Point& z) {
        return integrate_point(*spec, *compiled, s, t, z, spu);
    };
    d.view.phi_jet = [spec, N, tol](double s, double t) { return integrate_jet(*spec, s, t, N, tol); };
    d.view.f = grid_evaluator(d.view);
    return d;
}

} // namespace loewner
