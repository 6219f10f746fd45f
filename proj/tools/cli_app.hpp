#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <loewner/loewner.hpp>

namespace loewner::cli {

// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_check_failed = 1;
inline constexpr int exit_malformed = 2;
inline constexpr int exit_precondition = 3;
inline constexpr int exit_numerical = 4;

struct RunConfig {
    std::string command;
    std::string input, output;
    int order = 0;          // 0: take the input's own order
    double tol = 1e-10;     // integration tolerance
    double tau = 1e-9;      // classification tolerance
    double residual = 1e-8; // verification tolerance
    long samples = 16;
    unsigned long seed = 0;
    int horizon = 0;        // 0: take the input's own horizon
};

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open input file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw format_error(std::string("input is not valid JSON: ") + e.what());
    }
}

inline std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

inline std::string fmt(cplx z, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
    return os.str();
}

inline std::string index_string(const MultiIndex& I) {
    std::ostringstream os;
    os << I;
    return os.str();
}

inline json base_report(const RunConfig& c) { return json{{"schema", schema_version}, {"command", c.command}}; }

inline ChainOptions chain_options(const RunConfig& c, const HerglotzFieldSpec& f) {
    ChainOptions o;
    o.order = c.order > 0 ? c.order : std::max(f.order, 6);
    o.tol = c.tol;
    o.tau = c.tau;
    return o;
}

inline int field_horizon(const RunConfig& c, const HerglotzFieldSpec& f) { return c.horizon > 0 ? c.horizon : f.horizon; }

/// Eigenvalues of Lambda in coordinate order when it is triangular, otherwise by decreasing real part.
inline std::vector<cplx> field_eigenvalues(const Matrix& L, bool& diagonal_order) {
    const auto q = L.rows();
    bool lower = true, upper = true;
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) {
            if (j > i && L(i, j) != cplx(0)) lower = false;
            if (j < i && L(i, j) != cplx(0)) upper = false;
        }
    std::vector<cplx> ev;
    diagonal_order = lower || upper;
    if (diagonal_order) {
        for (Eigen::Index i = 0; i < q; ++i) ev.push_back(L(i, i));
        return ev;
    }
    Eigen::ComplexEigenSolver<Matrix> es(L, false);
    for (Eigen::Index i = 0; i < q; ++i) ev.push_back(es.eigenvalues()(i));
    std::stable_sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
    return ev;
}

inline void print_resonances(std::ostream& out, const ResonanceReport& r, const std::string& label) {
    out << label << " resonances (tolerance " << fmt(r.tolerance) << ", degree bound p = " << r.p << "): ";
    if (r.empty()) {
        out << "none\n";
        return;
    }
    out << r.resonances.size() << "\n";
    for (const auto& x : r.resonances)
        out << "  l = " << x.component + 1 << ", k = " << index_string(x.index) << "\n";
}

inline void print_constants(std::ostream& out, const Constants& c) {
    out << "constants:\n"
        << "  l     = " << c.ell << "\n"
        << "  p     = " << c.p << "\n"
        << "  alpha = " << fmt(c.alpha) << "\n"
        << "  beta  = " << fmt(c.beta) << "\n"
        << "  r     = " << fmt(c.r) << "\n"
        << "  s     = " << fmt(c.s) << "\n"
        << "  C     = " << fmt(c.C) << "\n";
}

inline ConjugacyResult normal_form_of(const RunConfig& c, const json& in, json& report) {
    NormalFormOptions nf;
    nf.tau = c.tau;
    nf.log_samples = static_cast<std::size_t>(std::max(0L, c.samples));
    nf.sample_skip = c.seed;
    if (is_family_document(in)) {
        auto fam = family_from_json(in);
        report["input_kind"] = "family";
        nf.order = c.order > 0 ? c.order : std::max(fam.order(), 2);
        return build_normal_form(fam, nf);
    }
    auto field = field_from_json(in);
    report["input_kind"] = "field";
    auto opt = chain_options(c, field);
    return field_normal_form(field, field_horizon(c, field), opt, nf.log_samples, nf.sample_skip);
}

inline int cmd_analyze(const RunConfig& c, json& report, std::ostream& out) {
    json in = read_json(c.input);
    if (!is_family_document(in)) {
        auto field = field_from_json(in);
        field.validate();
        bool diag = false;
        auto ev = field_eigenvalues(field.Lambda, diag);
        auto add = detect_resonances(std::span<const cplx>(ev), ResonanceMode::Additive, c.tau);
        json evj = json::array();
        for (auto v : ev) evj.push_back(complex_to_json(v));
        report["eigenvalues"] = evj;
        report["eigenvalue_order"] = diag ? "coordinates" : "decreasing real part";
        report["additive_resonances"] = resonance_report_to_json(add);
        out << "field: q = " << field.q << ", order " << field.order << ", " << field.terms.size() << " terms, "
            << (field.autonomous() ? "autonomous" : "time dependent") << "\n";
        out << "Lambda eigenvalues:";
        for (auto v : ev) out << "  " << fmt(v);
        out << "\n";
        print_resonances(out, add, "additive");
    }
    auto res = normal_form_of(c, in, report);
    report["resonances"] = resonance_report_to_json(res.resonances);
    report["constants"] = constants_to_json(res.constants);
    report["order"] = res.order;
    print_resonances(out, res.resonances, "multiplicative (one-step)");
    print_constants(out, res.constants);
    return exit_ok;
}

inline int cmd_normalform(const RunConfig& c, json& report, std::ostream& out) {
    json in = read_json(c.input);
    auto res = normal_form_of(c, in, report);
    report["result"] = conjugacy_to_json(res);
    out << "normal form: order N = " << res.order << ", window " << res.window << "\n";
    out << "  l = " << res.constants.ell << ", p = " << res.constants.p << ", alpha = " << fmt(res.constants.alpha)
        << ", beta = " << fmt(res.constants.beta) << "\n";
    out << "  max residual = " << fmt(res.max_residual, 3) << "\n";
    bool T_linear = true, k_identity = true;
    for (const auto& t : res.T) T_linear &= t.jet().top_degree() <= 1;
    for (const auto& k : res.k) k_identity &= k == PolyJet::identity(res.dim(), res.order);
    if (T_linear && k_identity) out << "  T = A, h = id\n";
    else if (T_linear) out << "  T = A (no resonant terms)\n";
    if (res.absorbed.empty()) out << "  resonant terms absorbed into T: none\n";
    for (const auto& a : res.absorbed)
        out << "  absorbed into T: component " << a.component + 1 << ", z^" << index_string(a.index) << ", first "
            << fmt(a.first) << "\n";
    if (!k_identity) {
        out << "  k_0 nonlinear coefficients (optimal coordinates):\n";
        const auto& k0 = res.k[0];
        const auto& tab = k0.table();
        int shown = 0;
        for (int j = 0; j < k0.dim(); ++j)
            for (std::size_t m = tab.offset(2); m < k0.row_size() && shown < 24; ++m)
                if (std::abs(k0.at(j, m)) > 1e-14) {
                    out << "    component " << j + 1 << ", z^" << index_string(tab.index(m)) << ": " << fmt(k0.at(j, m), 10)
                        << "\n";
                    ++shown;
                }
    }
    return exit_ok;
}

inline int cmd_chain(const RunConfig& c, json& report, std::ostream& out) {
    json in = read_json(c.input);
    if (is_family_document(in)) throw precondition_error("chain needs a field specification, not a discrete family");
    auto field = field_from_json(in);
    auto opt = chain_options(c, field);
    auto ch = build_chain(field, field_horizon(c, field), opt);
    auto grid = time_grid(static_cast<double>(ch.horizon()), 0.5);
    report["chain"] = chain_to_json(ch, grid);
    out << "chain: horizon " << ch.horizon() << ", order " << ch.order() << ", " << grid.size() << " grid times\n";
    print_resonances(out, ch.result.resonances, "multiplicative (one-step)");
    if (ch.certificate)
        out << "local boundedness certificate: sup |e^{Lambda t} f_t| = " << fmt(ch.certificate->sup_max)
            << " <= " << fmt(ch.certificate->declared_bound) << (ch.certificate->passed() ? " (ok)" : " (FAILED)") << "\n";
    else
        out << "local boundedness certificate: withheld (resonances present)\n";
    return exit_ok;
}

inline int cmd_verify(const RunConfig& c, json& report, std::ostream& out) {
    if (c.samples <= 0) throw precondition_error("verify needs a nonempty sample set (--samples > 0)");
    json in = read_json(c.input);
    const json& doc = in.contains("chain") ? in.at("chain") : in;
    auto d = chain_from_json(doc);
    const auto& v = d.view;
    const int q = d.field.q;
    auto K = halton_ball(q, v.radius, static_cast<std::size_t>(c.samples), c.seed);

    json checks = json::object();
    std::vector<std::string> failed;
    auto record = [&](const std::string& name, bool ok, json detail) {
        detail["passed"] = ok;
        checks[name] = detail;
        out << "  " << std::left << std::setw(18) << name << (ok ? "pass" : "FAIL") << "\n";
        if (!ok) failed.push_back(name);
    };
    out << "verify: " << v.times.size() << " grid times, " << K.size() << " samples, radius " << fmt(v.radius) << "\n";

    auto id = chain_identity_check(v, K);
    record("chain_identity", id.passed(c.residual),
           {{"jet_residual", id.jet_residual}, {"point_residual", id.point_residual}, {"tolerance", c.residual}});

    // PDE residual on samples spread over [0, T-1]
    std::vector<std::pair<double, Point>> S;
    const double t_end = std::min(v.times.back(), static_cast<double>(d.horizon) - 1);
    for (std::size_t k = 0; k < K.size(); ++k)
        S.push_back({t_end * (static_cast<double>(k) + 0.5) / static_cast<double>(K.size()), K[k]});
    auto pde = pde_residual(v.f, d.field, S, 1e-3, t_end, v.radius);
    record("pde_residual", pde.max_abs <= 1e-6, {{"max_abs", pde.max_abs}, {"max_rel", pde.max_rel}, {"h", 1e-3}});

    auto sub = verify_subordination_chain(v, K);
    json subj{{"linear_ok", sub.linear_ok},         {"linear_defect", sub.linear_defect},
              {"transitions_ok", sub.transitions_ok}, {"transition_sup", sub.transition_sup},
              {"bounded_ok", sub.bounded_ok},       {"sup_normalized", sub.sup_normalized},
              {"bound", std::isfinite(v.bound) ? json(v.bound) : json(nullptr)},
              {"univalent_ok", sub.univalent_ok},   {"non_univalent_t", sub.non_univalent_t}};
    if (sub.offending_t) subj["offending_t"] = *sub.offending_t;
    record("subordination", sub.passed(), subj);

    // range growth and attraction on the family rebuilt from the stored field
    ChainOptions opt;
    opt.order = v.jets[0].order();
    opt.tol = d.tol;
    opt.tau = c.tau;
    opt.steps_per_unit = d.steps_per_unit;
    auto res = field_normal_form(d.field, static_cast<int>(d.horizon), opt);
    const double s = res.constants.s > 0 ? res.constants.s : 0.25 * res.constants.r;
    const std::size_t n_max = std::min<std::size_t>(res.window - 1, 12);
    auto radii = range_growth_check(res, s, n_max, 48);
    bool monotone = true;
    for (std::size_t n = 1; n < radii.size(); ++n) monotone &= radii[n] >= radii[n - 1] * (1 - 1e-9);
    record("range_growth", monotone && radii.back() > radii.front(), {{"s", s}, {"radii", radii}});

    auto att = attraction_check(res.family, K, 1e-8);
    json steps = json::array();
    bool all = true;
    for (const auto& e : att) {
        steps.push_back(e.steps);
        all &= e.converged;
    }
    record("attraction", all, {{"tol", 1e-8}, {"steps", steps}});

    report["checks"] = checks;
    report["passed"] = failed.empty();
    report["failed"] = failed;
    if (!failed.empty()) {
        out << "failed checks:";
        for (const auto& f : failed) out << " " << f;
        out << "\n";
        return exit_check_failed;
    }
    out << "all checks passed\n";
    return exit_ok;
}

/// Entry point; returns the process exit code.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Non-autonomous normal forms and Loewner chains for dilation evolution families"};
    app.require_subcommand(1);
    RunConfig c;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input,-i", c.input, "input JSON (field specification, discrete family or chain)")->required();
        sub->add_option("--output,-o", c.output, "write the JSON report here instead of stdout");
        sub->add_option("--order", c.order, "jet order override (>= 2)")->check(CLI::Range(2, 16));
        sub->add_option("--tol", c.tol, "integration tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--tau", c.tau, "resonance classification tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--samples", c.samples, "sample count");
        sub->add_option("--seed", c.seed, "offset into the deterministic sample sequence");
        sub->add_option("--horizon", c.horizon, "horizon override")->check(CLI::PositiveNumber);
    };
    auto* analyze = app.add_subcommand("analyze", "resonances and constants");
    auto* normalform = app.add_subcommand("normalform", "triangular normal form and intertwining maps");
    auto* chain = app.add_subcommand("chain", "Loewner chain document from a field");
    auto* verify = app.add_subcommand("verify", "check a chain document");
    for (auto* s : {analyze, normalform, chain, verify}) add_common(s);
    verify->add_option("--residual", c.residual, "chain identity tolerance")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_malformed;
    }
    c.command = app.get_subcommands().front()->get_name();

    json report = base_report(c);
    std::ostringstream summary;
    int code = exit_ok;
    try {
        if (c.command == "analyze") code = cmd_analyze(c, report, summary);
        else if (c.command == "normalform") code = cmd_normalform(c, report, summary);
        else if (c.command == "chain") code = cmd_chain(c, report, summary);
        else code = cmd_verify(c, report, summary);
    } catch (const format_error& e) {
        err << "error: malformed input: " << e.what() << "\n";
        return exit_malformed;
    } catch (const precondition_error& e) {
        err << "error: precondition violated: " << e.what() << "\n";
        return exit_precondition;
    } catch (const convergence_error& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }

    const std::string text = report.dump(2) + "\n";
    if (c.output.empty()) {
        out << text;
        err << summary.str();
    } else {
        std::ofstream f(c.output, std::ios::binary);
        if (!f) {
            err << "error: cannot write '" << c.output << "'\n";
            return exit_malformed;
        }
        f << text;
        out << summary.str();
    }
    return code;
}

} // namespace loewner::cli
