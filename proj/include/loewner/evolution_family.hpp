#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "homological.hpp"

namespace loewner {

// One-step maps phi_{n,n+1}, n = 0..T-1, with a shared contracting linear part.
//
// Steps are stored in optimal coordinates w = M z, so their linear part is the
// optimal form A exactly. Beyond the horizon the last step repeats (Constant)
// or the map is A itself (Zero).
class DiscreteEvolutionFamily {
public:
    DiscreteEvolutionFamily() = default;

    /// exact: the steps are polynomial maps, so zero padding to any order is exact.
    static DiscreteEvolutionFamily from_steps(std::vector<PolyJet> steps, TailPolicy tail, bool exact = true,
                                              std::optional<double> target_norm = {}, double linear_tol = 1e-12) {
        if (steps.empty()) throw precondition_error("evolution family needs at least one step");
        const int q = steps[0].dim();
        Matrix A0 = steps[0].linear_part();
        for (const auto& s : steps) {
            if (s.dim() != q) throw precondition_error("evolution family steps differ in dimension");
            if (max_abs(Matrix(s.linear_part() - A0)) > linear_tol * std::max(1.0, max_abs(A0)))
                throw precondition_error("evolution family steps must share one linear part");
        }
        DiscreteEvolutionFamily f;
        f.form_ = to_optimal_form(A0, target_norm);
        f.tail_ = tail;
        f.exact_ = exact;
        f.order_ = steps[0].order();
        for (const auto& s : steps) f.order_ = std::min(f.order_, s.order());
        const bool identity = f.form_.M == Matrix::Identity(q, q);
        for (auto& s : steps) {
            PolyJet w = identity ? s.with_order(f.order_)
                                 : compose(PolyJet::linear(f.form_.M, f.order_),
                                           compose(s, PolyJet::linear(f.form_.M_inv, f.order_), f.order_), f.order_);
            for (int j = 0; j < q; ++j)
                for (int k = 0; k < q; ++k) w.at(j, 1 + static_cast<std::size_t>(k)) = f.form_.A(j, k);
            f.steps_.push_back(std::move(w));
        }
        f.original_ = std::move(steps);
        f.linear_ = PolyJet::linear(f.form_.A, f.order_);
        return f;
    }

    int dim() const { return form_.A.rows(); }
    const Matrix& A() const { return form_.A; }
    const OptimalForm& form() const { return form_; }
    std::size_t horizon() const { return steps_.size(); }
    TailPolicy tail() const { return tail_; }
    int order() const { return order_; }
    bool exact() const { return exact_; }
    const std::vector<PolyJet>& steps() const { return steps_; }
    const std::vector<PolyJet>& original_steps() const { return original_; }

    const PolyJet& step(std::size_t n) const {
        if (n < steps_.size()) return steps_[n];
        return tail_ == TailPolicy::Constant ? steps_.back() : linear_;
    }

    /// phi_{n,n+1} viewed at the given order.
    PolyJet step(std::size_t n, int order) const {
        if (order > order_ && !exact_) throw precondition_error("family jets are not known to the requested order");
        return step(n).with_order(order);
    }

    using PointStep = std::function<Point(std::size_t, const Point&)>;

    /// Replace jet evaluation by an exact one-step map given in original coordinates.
    void set_pointwise(PointStep original_step) {
        if (!original_step) {
            pointwise_ = nullptr;
            return;
        }
        pointwise_ = [f = std::move(original_step), M = form_.M, Mi = form_.M_inv](std::size_t n, const Point& w) {
            return Point(M * f(n, Point(Mi * w)));
        };
    }
    bool has_pointwise() const { return static_cast<bool>(pointwise_); }

    Point apply(std::size_t n, const Point& z) const { return pointwise_ ? pointwise_(n, z) : step(n).evaluate(z); }

    /// phi_{n,m}(z) for n <= m.
    Point apply(std::size_t n, std::size_t m, Point z) const {
        for (std::size_t k = n; k < m; ++k) z = apply(k, z);
        return z;
    }

    PolyJet jet(std::size_t n, std::size_t m, int order) const {
        PolyJet r = PolyJet::identity(dim(), order);
        for (std::size_t k = n; k < m; ++k) r = compose(step(k, order), r, order);
        return r;
    }

    /// Largest coefficient over all steps (the uniform bound M).
    double coefficient_bound() const {
        double b = 0;
        for (const auto& s : steps_) b = std::max(b, s.max_abs());
        return b;
    }

    Point to_optimal(const Point& z) const { return form_.M * z; }
    Point from_optimal(const Point& w) const { return form_.M_inv * w; }

private:
    OptimalForm form_;
    TailPolicy tail_ = TailPolicy::Zero;
    bool exact_ = true;
    int order_ = 1;
    std::vector<PolyJet> steps_, original_;
    PolyJet linear_;
    PointStep pointwise_;
};

} // namespace loewner
