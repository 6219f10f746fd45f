#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "multi_index.hpp"

namespace loewner {

// All monomials of degree 0..N in q variables, graded-lex, with a rank lookup.
// Position 0 is the constant monomial.
class MonomialTable {
public:
    MonomialTable(int q, int N) : q_(q), N_(N) {
        if (q < 1 || N < 0) throw precondition_error("MonomialTable: need q >= 1, N >= 0");
        base_ = static_cast<std::size_t>(N) + 1;
        std::size_t codes = 1;
        for (int k = 0; k < q; ++k) codes *= base_;
        pos_.assign(codes, -1);
        offset_.push_back(0);
        for (int d = 0; d <= N; ++d) {
            for (auto& I : enumerate_indices(q, d)) {
                std::size_t c = encode(I);
                pos_[c] = static_cast<int>(idx_.size());
                code_.push_back(c);
                deg_.push_back(d);
                idx_.push_back(std::move(I));
            }
            offset_.push_back(idx_.size());
        }
        // parent[m] = (m - e_k, k) for the last nonzero k
        parent_.assign(idx_.size(), {-1, -1});
        for (std::size_t m = 1; m < idx_.size(); ++m) {
            auto e = idx_[m].entries();
            int k = q - 1;
            while (e[static_cast<std::size_t>(k)] == 0) --k;
            --e[static_cast<std::size_t>(k)];
            parent_[m] = {pos_[encode_raw(e)], k};
        }
        lower_.assign(idx_.size() * static_cast<std::size_t>(q), -1);
        for (std::size_t m = 1; m < idx_.size(); ++m) {
            auto e = idx_[m].entries();
            for (int k = 0; k < q; ++k) {
                auto& ek = e[static_cast<std::size_t>(k)];
                if (ek == 0) continue;
                --ek;
                lower_[m * static_cast<std::size_t>(q) + static_cast<std::size_t>(k)] = pos_[encode_raw(e)];
                ++ek;
            }
        }
    }

    int dim() const { return q_; }
    int order() const { return N_; }
    std::size_t size() const { return idx_.size(); }
    std::size_t offset(int d) const { return offset_[static_cast<std::size_t>(d)]; }
    std::size_t end_of(int d) const { return offset_[static_cast<std::size_t>(d) + 1]; }
    const MultiIndex& index(std::size_t m) const { return idx_[m]; }
    int degree(std::size_t m) const { return deg_[m]; }
    std::pair<int, int> parent(std::size_t m) const { return parent_[m]; }

    /// Position of I - e_k, or -1 when I_k = 0.
    int lower(std::size_t m, int k) const {
        return lower_[m * static_cast<std::size_t>(q_) + static_cast<std::size_t>(k)];
    }

    /// Position of I, or -1 when |I| > N.
    long position(const MultiIndex& I) const {
        if (I.dim() != q_) throw precondition_error("multi-index dimension mismatch");
        if (I.degree() > N_) return -1;
        return pos_[encode(I)];
    }

    /// Position of the product monomial, or -1 past the truncation order.
    long product(std::size_t a, std::size_t b) const {
        if (deg_[a] + deg_[b] > N_) return -1;
        return pos_[code_[a] + code_[b]];
    }

private:
    std::size_t encode(const MultiIndex& I) const { return encode_raw(I.entries()); }
    std::size_t encode_raw(const std::vector<int>& e) const {
        std::size_t c = 0;
        for (int v : e) c = c * base_ + static_cast<std::size_t>(v);
        return c;
    }

    int q_, N_;
    std::size_t base_ = 1;
    std::vector<MultiIndex> idx_;
    std::vector<std::size_t> code_;
    std::vector<int> deg_;
    std::vector<std::size_t> offset_;
    std::vector<int> pos_;
    std::vector<std::pair<int, int>> parent_;
    std::vector<int> lower_;
};

/// Shared, lazily built table for (q, N).
inline const MonomialTable& monomial_table(int q, int N) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<MonomialTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{q, N}];
    if (!slot) slot = std::make_unique<MonomialTable>(q, N);
    return *slot;
}

} // namespace loewner
