#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sectrain::distill {

inline constexpr double kSimplexTolerance = 1e-9;

class CategoricalDist {
public:
    explicit CategoricalDist(std::vector<double> p) : p_(std::move(p)) {
        if (p_.empty()) throw std::invalid_argument("empty distribution");
        double sum = 0.0;
        for (double x : p_) {
            if (!(x >= 0.0)) throw std::invalid_argument("negative probability");
            sum += x;
        }
        if (std::abs(sum - 1.0) > kSimplexTolerance) {
            throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
        }
    }

    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t k) const { return p_[k]; }
    const std::vector<double>& probs() const noexcept { return p_; }

private:
    std::vector<double> p_;
};

struct AbkdParams {
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const {
        if (alpha == 0.0 || beta == 0.0 || alpha + beta == 0.0) {
            throw std::invalid_argument("need alpha != 0, beta != 0, alpha + beta != 0");
        }
    }
};

namespace detail {

/// x^e with 0^e = 0 for e > 0; zero base with a negative exponent is a domain error.
inline double power(double x, double e) {
    if (x == 0.0) {
        if (e > 0.0) return 0.0;
        throw std::domain_error("zero probability raised to a nonpositive power");
    }
    return std::pow(x, e);
}

}  // namespace detail

/// Alpha-beta divergence between teacher p and student q on aligned supports.
inline double abkd_divergence(const CategoricalDist& p, const CategoricalDist& q, const AbkdParams& params) {
    params.validate();
    if (p.size() != q.size()) throw std::invalid_argument("distributions have different supports");
    const double a = params.alpha, b = params.beta, ab = a + b;
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        sum += detail::power(p[k], a) * detail::power(q[k], b) - a / ab * detail::power(p[k], ab) -
               b / ab * detail::power(q[k], ab);
    }
    return -sum / (a * b);
}

struct TopK {
    std::vector<std::size_t> indices;  // ascending; the K most probable, ties to the lower index
    CategoricalDist teacher;

    /// Student restricted to the same support and renormalized.
    CategoricalDist restrict(const CategoricalDist& student) const {
        std::vector<double> q;
        q.reserve(indices.size());
        double mass = 0.0;
        for (const auto k : indices) {
            if (k >= student.size()) throw std::invalid_argument("student support smaller than teacher");
            q.push_back(student[k]);
            mass += student[k];
        }
        if (mass <= 0.0) throw std::domain_error("student has no mass on the teacher's top-K support");
        if (indices.size() == student.size()) return student;
        for (double& x : q) x /= mass;
        return CategoricalDist(std::move(q));
    }
};

/// Top-K support of the teacher (K clamped to n) with the teacher renormalized on it.
inline TopK topk_mask(const CategoricalDist& teacher, std::size_t k) {
    if (k == 0) throw std::invalid_argument("K must be >= 1");
    k = std::min(k, teacher.size());
    std::vector<std::size_t> order(teacher.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return teacher[a] > teacher[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    std::vector<double> p;
    double mass = 0.0;
    for (const auto i : order) {
        p.push_back(teacher[i]);
        mass += teacher[i];
    }
    if (mass <= 0.0) throw std::domain_error("teacher has no mass on its top-K support");
    if (k < teacher.size()) {
        for (double& x : p) x /= mass;
    }
    return {std::move(order), CategoricalDist(std::move(p))};
}

/// Divergence restricted to the teacher's top-K support.
inline double topk_abkd(const CategoricalDist& teacher, const CategoricalDist& student, std::size_t k,
                        const AbkdParams& params) {
    const auto mask = topk_mask(teacher, k);
    return abkd_divergence(mask.teacher, mask.restrict(student), params);
}

}  // namespace sectrain::distill
