#pragma once

#include <json.hpp>

#include "poly_jet.hpp"

namespace loewner {

using json = nlohmann::json;

inline json complex_to_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline cplx complex_from_json(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_object() || !j.contains("re")) throw format_error("expected {\"re\", \"im\"} object");
    return {j.at("re").get<double>(), j.value("im", 0.0)};
}

inline json matrix_to_json(const Matrix& A) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < A.cols(); ++k) row.push_back(complex_to_json(A(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw format_error("matrix must be a non-empty array of rows");
    auto n = static_cast<Eigen::Index>(j.size());
    Matrix A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
            throw format_error("matrix must be square");
        for (Eigen::Index k = 0; k < n; ++k) A(i, k) = complex_from_json(row[static_cast<std::size_t>(k)]);
    }
    return A;
}

inline json point_to_json(const Point& z) {
    json a = json::array();
    for (Eigen::Index k = 0; k < z.size(); ++k) a.push_back(complex_to_json(z(k)));
    return a;
}

inline Point point_from_json(const json& j) {
    if (!j.is_array()) throw format_error("point must be an array");
    Point z(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) z(static_cast<Eigen::Index>(k)) = complex_from_json(j[k]);
    return z;
}

/// Canonical form: nonzero terms only, 1-based components, sorted by (component, graded-lex).
inline json jet_to_json(const PolyJet& f) {
    json terms = json::array();
    const auto& T = f.table();
    for (int j = 0; j < f.dim(); ++j)
        for (std::size_t m = 1; m < f.row_size(); ++m) {
            cplx c = f.at(j, m);
            if (c == cplx{}) continue;
            terms.push_back({{"component", j + 1}, {"index", T.index(m).entries()},
                             {"re", c.real()}, {"im", c.imag()}});
        }
    return json{{"q", f.dim()}, {"order", f.order()}, {"terms", std::move(terms)}};
}

inline MultiIndex index_from_json(const json& j, int q) {
    if (!j.is_array() || static_cast<int>(j.size()) != q) throw format_error("index must have q entries");
    std::vector<int> e;
    for (auto& v : j) {
        if (!v.is_number_integer() || v.get<int>() < 0) throw format_error("index entries must be integers >= 0");
        e.push_back(v.get<int>());
    }
    return MultiIndex(std::move(e));
}

inline PolyJet jet_from_json(const json& j) {
    try {
        int q = j.at("q").get<int>(), N = j.at("order").get<int>();
        if (q < 1 || N < 1) throw format_error("jet needs q >= 1 and order >= 1");
        PolyJet f(q, N);
        for (const auto& t : j.at("terms")) {
            int comp = t.at("component").get<int>();
            if (comp < 1 || comp > q) throw format_error("component out of range");
            MultiIndex I = index_from_json(t.at("index"), q);
            if (I.degree() < 1 || I.degree() > N) throw format_error("term degree outside 1..order");
            f.set(comp - 1, I, {t.at("re").get<double>(), t.value("im", 0.0)});
        }
        return f;
    } catch (const json::exception& e) {
        throw format_error(std::string("malformed jet: ") + e.what());
    }
}

} // namespace loewner
