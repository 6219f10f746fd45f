#pragma once

#include <cstddef>
#include <numeric>
#include <ostream>
#include <vector>

#include "error.hpp"

namespace loewner {

// Exponent vector (i_1..i_q) of a monomial z^I.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> e) : e_(std::move(e)) {
        for (int v : e_)
            if (v < 0) throw precondition_error("multi-index entries must be >= 0");
    }
    MultiIndex(std::initializer_list<int> e) : MultiIndex(std::vector<int>(e)) {}

    static MultiIndex unit(int q, int k) {
        std::vector<int> e(static_cast<std::size_t>(q), 0);
        e[static_cast<std::size_t>(k)] = 1;
        return MultiIndex(std::move(e));
    }

    int dim() const { return static_cast<int>(e_.size()); }
    int degree() const { return std::accumulate(e_.begin(), e_.end(), 0); }
    int operator[](int k) const { return e_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& entries() const { return e_; }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

    // graded-lex: lower degree first, then larger leading exponent first
    friend bool graded_before(const MultiIndex& a, const MultiIndex& b) {
        int da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        return a.e_ > b.e_;
    }

    friend std::ostream& operator<<(std::ostream& os, const MultiIndex& I) {
        os << '(';
        for (std::size_t k = 0; k < I.e_.size(); ++k) os << (k ? "," : "") << I.e_[k];
        return os << ')';
    }

private:
    std::vector<int> e_;
};

namespace detail {
inline void fill_indices(int q, int left, std::vector<int>& cur, int pos,
                         std::vector<MultiIndex>& out) {
    if (pos == q - 1) {
        cur[static_cast<std::size_t>(pos)] = left;
        out.emplace_back(cur);
        return;
    }
    for (int v = left; v >= 0; --v) {
        cur[static_cast<std::size_t>(pos)] = v;
        fill_indices(q, left - v, cur, pos + 1, out);
    }
}
} // namespace detail

/// All I with |I| = i, graded-lex order: (2,0),(1,1),(0,2) for q=2.
inline std::vector<MultiIndex> enumerate_indices(int q, int i) {
    if (q < 1 || i < 0) throw precondition_error("enumerate_indices: need q >= 1, i >= 0");
    std::vector<MultiIndex> out;
    std::vector<int> cur(static_cast<std::size_t>(q), 0);
    detail::fill_indices(q, i, cur, 0, out);
    return out;
}

/// C(n, k) in exact integer arithmetic (small arguments only).
inline std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::size_t r = 1;
    for (int t = 1; t <= k; ++t) r = r * static_cast<std::size_t>(n - k + t) / static_cast<std::size_t>(t);
    return r;
}

/// Number of monomials of degree exactly i in q variables.
inline std::size_t count_indices(int q, int i) { return binomial(i + q - 1, q - 1); }

} // namespace loewner
