#include "stochint/spaces.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochint {

std::string_view to_string(Space s) {
    switch (s) {
    case Space::V: return "V";
    case Space::H: return "H";
    case Space::U: return "U";
    case Space::X: return "X";
    }
    return "?";
}

Space parse_space(std::string_view name) {
    if (name == "V") return Space::V;
    if (name == "H") return Space::H;
    if (name == "U") return Space::U;
    if (name == "X") return Space::X;
    throw std::invalid_argument("unknown space '" + std::string(name) + "'");
}

SpaceScale::SpaceScale(std::vector<double> weights_v, std::vector<double> weights_h,
                       std::vector<double> weights_u, std::vector<double> weights_x)
    : dim_(weights_v.size()),
      weights_{std::move(weights_v), std::move(weights_h), std::move(weights_u),
               std::move(weights_x)} {
    if (dim_ == 0) throw std::invalid_argument("SpaceScale: dim must be at least 1");
    for (const auto& w : weights_) {
        if (w.size() != dim_) throw std::invalid_argument("SpaceScale: weight lengths differ");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
        const double v = weights_[0][i], h = weights_[1][i], u = weights_[2][i],
                     x = weights_[3][i];
        if (!(v >= h && h >= u && u >= x && x > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("SpaceScale: weights must satisfy V >= H >= U >= X > 0 at index " +
                                        std::to_string(i));
        }
    }
}

SpaceScale SpaceScale::uniform(std::size_t dim) {
    std::vector<double> ones(dim, 1.0);
    return SpaceScale(ones, ones, ones, ones);
}

namespace {

void check_conform(const SpaceScale& scale, std::size_t n, const char* what) {
    if (n != scale.dim()) {
        throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(n) +
                                    " does not match scale dim " + std::to_string(scale.dim()));
    }
}

}  // namespace

double inner(const SpaceScale& scale, Space space, std::span<const double> x,
             std::span<const double> y) {
    check_conform(scale, x.size(), "inner");
    check_conform(scale, y.size(), "inner");
    const auto w = scale.weights(space);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i] * y[i];
    return s;
}

double norm(const SpaceScale& scale, Space space, std::span<const double> x) {
    return std::sqrt(inner(scale, space, x, x));
}

double hs_norm(const SpaceScale& scale, Space target, std::span<const double> columns,
               std::size_t n_columns) {
    if (n_columns == 0) return 0.0;
    const std::size_t d = scale.dim();
    if (columns.size() != d * n_columns) {
        throw std::invalid_argument("hs_norm: column block does not match dim x columns");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n_columns; ++i) {
        const auto col = columns.subspan(i * d, d);
        s += inner(scale, target, col, col);
    }
    return std::sqrt(s);
}

double embedding_constant(const SpaceScale& scale, Space from, Space to) {
    if (static_cast<int>(from) > static_cast<int>(to)) {
        throw std::invalid_argument("embedding_constant: " + std::string(to_string(from)) +
                                    " does not embed into " + std::string(to_string(to)));
    }
    const auto wf = scale.weights(from);
    const auto wt = scale.weights(to);
    double c = 0.0;
    for (std::size_t i = 0; i < scale.dim(); ++i) c = std::max(c, std::sqrt(wt[i] / wf[i]));
    return c;
}

LinearOp::LinearOp(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), a_(std::move(row_major)) {
    if (dim_ == 0) throw std::invalid_argument("LinearOp: dim must be at least 1");
    if (a_.size() != dim_ * dim_) throw std::invalid_argument("LinearOp: expected dim*dim entries");
}

LinearOp LinearOp::identity(std::size_t dim) { return scaled_identity(dim, 1.0); }

LinearOp LinearOp::zero(std::size_t dim) { return LinearOp(dim, std::vector<double>(dim * dim, 0.0)); }

LinearOp LinearOp::scaled_identity(std::size_t dim, double factor) {
    std::vector<double> a(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] = factor;
    return LinearOp(dim, std::move(a));
}

LinearOp LinearOp::diagonal(std::span<const double> entries) {
    const std::size_t d = entries.size();
    std::vector<double> a(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) a[i * d + i] = entries[i];
    return LinearOp(d, std::move(a));
}

void LinearOp::apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_ || out.size() != dim_) {
        throw std::invalid_argument("LinearOp::apply: dimension mismatch");
    }
    for (std::size_t r = 0; r < dim_; ++r) {
        const double* row = &a_[r * dim_];
        double s = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) s += row[c] * x[c];
        out[r] = s;
    }
}

Vec LinearOp::apply(std::span<const double> x) const {
    Vec out(dim_);
    apply(x, out);
    return out;
}

LinearOp LinearOp::compose(const LinearOp& inner_op) const {
    if (inner_op.dim_ != dim_) throw std::invalid_argument("LinearOp::compose: dimension mismatch");
    std::vector<double> c(dim_ * dim_, 0.0);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t k = 0; k < dim_; ++k)
            for (std::size_t j = 0; j < dim_; ++j) c[r * dim_ + j] += a_[r * dim_ + k] * inner_op.a_[k * dim_ + j];
    return LinearOp(dim_, std::move(c));
}

double LinearOp::operator_norm(const SpaceScale& scale, Space source, Space target) const {
    check_conform(scale, dim_, "operator_norm");
    const auto ws = scale.weights(source);
    const auto wt = scale.weights(target);
    Eigen::MatrixXd m(dim_, dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c)
            m(r, c) = std::sqrt(wt[r]) * a_[r * dim_ + c] / std::sqrt(ws[c]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

LinearOp LinearOp::with_bound(const SpaceScale& scale, double bound, Space source,
                              Space target) const {
    if (!(bound > 0.0)) throw std::invalid_argument("LinearOp::with_bound: bound must be positive");
    check_conform(scale, dim_, "with_bound");
    constexpr double slack = 1e-12;
    Vec e(dim_, 0.0), img(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        e.assign(dim_, 0.0);
        e[i] = 1.0;
        apply(e, img);
        if (norm(scale, target, img) > bound * norm(scale, source, e) * (1.0 + slack)) {
            throw std::invalid_argument("LinearOp::with_bound: bound violated on basis vector " +
                                        std::to_string(i));
        }
    }
    if (operator_norm(scale, source, target) > bound * (1.0 + slack)) {
        throw std::invalid_argument("LinearOp::with_bound: bound below exact operator norm");
    }
    LinearOp out = *this;
    out.bound_ = Bound{bound, source, target};
    return out;
}

}  // namespace stochint
