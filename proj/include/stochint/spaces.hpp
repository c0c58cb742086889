#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace stochint {

/// Coordinates of an element of one of the emulated spaces.
using Vec = std::vector<double>;

/// The four nested spaces V ↪ H ↪ U ↪ X, finest first.
enum class Space { V = 0, H = 1, U = 2, X = 3 };

std::string_view to_string(Space s);
Space parse_space(std::string_view name);

/// Weighted inner products on a shared finite coordinate basis.
///
/// Each space carries a positive weight per coordinate; ⟨x,y⟩_S = Σ w_S[i]·x_i·y_i.
/// The chain requires w_V[i] ≥ w_H[i] ≥ w_U[i] ≥ w_X[i] > 0 so that every
/// embedding constant along the chain is at most 1. Checked once here.
class SpaceScale {
public:
    SpaceScale(std::vector<double> weights_v, std::vector<double> weights_h,
               std::vector<double> weights_u, std::vector<double> weights_x);

    /// All four spaces share the Euclidean weights.
    static SpaceScale uniform(std::size_t dim);

    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> weights(Space s) const noexcept {
        return weights_[static_cast<std::size_t>(s)];
    }

private:
    std::size_t dim_;
    std::array<std::vector<double>, 4> weights_;
};

double inner(const SpaceScale& scale, Space space, std::span<const double> x,
             std::span<const double> y);

double norm(const SpaceScale& scale, Space space, std::span<const double> x);

/// Hilbert–Schmidt norm of an operator given by its images of the basis.
///
/// `columns` holds n_columns consecutive blocks of length dim, block i being
/// B(e_i). An empty operator has norm 0.
double hs_norm(const SpaceScale& scale, Space target, std::span<const double> columns,
               std::size_t n_columns);

/// Smallest c with ‖x‖_to ≤ c‖x‖_from for all x. Requires `from` finer than or
/// equal to `to` in the chain.
double embedding_constant(const SpaceScale& scale, Space from, Space to);

/// Dense square matrix acting on coordinates, optionally carrying a certified
/// bound ‖Tφ‖_target ≤ bound·‖φ‖_source.
class LinearOp {
public:
    struct Bound {
        double value;
        Space source;
        Space target;
    };

    /// Row-major dim×dim entries.
    LinearOp(std::size_t dim, std::vector<double> row_major);

    static LinearOp identity(std::size_t dim);
    static LinearOp zero(std::size_t dim);
    static LinearOp scaled_identity(std::size_t dim, double factor);
    static LinearOp diagonal(std::span<const double> entries);

    std::size_t dim() const noexcept { return dim_; }
    double operator()(std::size_t row, std::size_t col) const { return a_[row * dim_ + col]; }
    std::span<const double> entries() const noexcept { return a_; }

    void apply(std::span<const double> x, std::span<double> out) const;
    Vec apply(std::span<const double> x) const;

    LinearOp compose(const LinearOp& inner_op) const;  // this ∘ inner_op

    /// Exact operator norm between weighted spaces, from the largest singular
    /// value of W_target^{1/2}·A·W_source^{-1/2}.
    double operator_norm(const SpaceScale& scale, Space source, Space target) const;

    /// Attaches a bound after spot-checking it on every basis vector and against
    /// the exact operator norm. Throws if the claimed bound is violated.
    LinearOp with_bound(const SpaceScale& scale, double bound, Space source, Space target) const;

    const std::optional<Bound>& bound() const noexcept { return bound_; }

private:
    std::size_t dim_;
    std::vector<double> a_;
    std::optional<Bound> bound_;
};

}  // namespace stochint
