#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kanoise/core.hpp"

namespace kanoise {

/// Uniform B-spline knot grid over [range_lo, range_hi] with `grid_count`
/// interior intervals and `order` extension knots on each side. The extension
/// knots continue the interior spacing, so every knot is range_lo + (i - order) * h.
class SplineGrid {
public:
    SplineGrid() = default;

    double range_lo() const noexcept { return lo_; }
    double range_hi() const noexcept { return hi_; }
    int grid_count() const noexcept { return grid_count_; }
    int order() const noexcept { return order_; }
    double spacing() const noexcept { return h_; }
    std::size_t num_basis() const noexcept { return static_cast<std::size_t>(grid_count_ + order_); }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Knot i of the infinite uniform extension; i may be negative or past the stored knots.
    double virtual_knot(long i) const noexcept { return lo_ + static_cast<double>(i - order_) * h_; }

    bool contains(double x) const noexcept { return x >= lo_ && x <= hi_; }

    friend bool operator==(const SplineGrid&, const SplineGrid&) = default;

    friend SplineGrid build_grid(double range_lo, double range_hi, int grid_count, int order);

private:
    double lo_ = 0.0;
    double hi_ = 1.0;
    int grid_count_ = 1;
    int order_ = 0;
    double h_ = 1.0;
    std::vector<double> knots_;
};

inline SplineGrid build_grid(double range_lo, double range_hi, int grid_count, int order) {
    if (!(range_lo < range_hi) || !std::isfinite(range_lo) || !std::isfinite(range_hi))
        throw InvalidArgument("build_grid: need finite range_lo < range_hi");
    if (grid_count < 1) throw InvalidArgument("build_grid: grid_count must be >= 1");
    if (order < 0) throw InvalidArgument("build_grid: order must be >= 0");

    SplineGrid g;
    g.lo_ = range_lo;
    g.hi_ = range_hi;
    g.grid_count_ = grid_count;
    g.order_ = order;
    g.h_ = (range_hi - range_lo) / grid_count;
    const int n_knots = grid_count + 2 * order + 1;
    g.knots_.resize(static_cast<std::size_t>(n_knots));
    for (int i = 0; i < n_knots; ++i) g.knots_[static_cast<std::size_t>(i)] = g.virtual_knot(i);
    g.knots_[static_cast<std::size_t>(order)] = range_lo;
    g.knots_[static_cast<std::size_t>(order + grid_count)] = range_hi;
    return g;
}

namespace detail {

// Knot span index m (t_m <= x < t_{m+1}) in the infinite uniform extension.
// The closed right endpoint of the range is assigned to the last interior span.
// Spans beyond the extended knots are clamped to one past either end (no grid
// function is nonzero there); NaN lands on the left one.
inline long knot_span(const SplineGrid& grid, double x) noexcept {
    const int k = grid.order(), G = grid.grid_count();
    if (x == grid.range_hi()) return k + G - 1;
    const double u = std::floor((x - grid.range_lo()) / grid.spacing()) + k;
    if (!(u >= -1.0)) return -1;
    if (u > static_cast<double>(G + 2 * k)) return G + 2 * k;
    return static_cast<long>(u);
}

// Cox-de Boor triangle (uniform knots) for the `degree + 1` functions of the given
// degree that are nonzero on span m: out[t] = N_{m-degree+t, degree}(x).
inline void local_basis(const SplineGrid& grid, long m, int degree, double x, double* out) noexcept {
    out[0] = 1.0;
    for (int d = 1; d <= degree; ++d) {
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double right = grid.virtual_knot(m + r + 1) - x;
            const double left = x - grid.virtual_knot(m + r + 1 - d);
            const double temp = out[r] / (right + left);
            out[r] = saved + right * temp;
            saved = left * temp;
        }
        out[d] = saved;
    }
}

}  // namespace detail

/// Writes the order+1 nonzero basis values around x (and optionally their derivatives)
/// into caller storage and returns the global index of values[0]. Indices outside
/// [0, num_basis) belong to functions of the infinite extension; see `basis_eval`.
inline long basis_local(const SplineGrid& grid, double x, std::span<double> values,
                        std::span<double> derivs = {}) noexcept {
    const int k = grid.order();
    const long m = detail::knot_span(grid, x);
    detail::local_basis(grid, m, k, x, values.data());
    if (!derivs.empty()) {
        if (k == 0) {
            derivs[0] = 0.0;
        } else {
            // dN_{i,k} = (N_{i,k-1} - N_{i+1,k-1}) / h on uniform knots.
            double lower[64];
            double* low = k <= 64 ? lower : nullptr;
            std::vector<double> heap;
            if (!low) {
                heap.resize(static_cast<std::size_t>(k));
                low = heap.data();
            }
            detail::local_basis(grid, m, k - 1, x, low);
            const double inv_h = 1.0 / grid.spacing();
            for (int t = 0; t <= k; ++t) {
                const double a = t >= 1 ? low[t - 1] : 0.0;
                const double b = t < k ? low[t] : 0.0;
                derivs[static_cast<std::size_t>(t)] = (a - b) * inv_h;
            }
        }
    }
    return m - k;
}

/// All G+k basis values at x. Outside the grid range the values come from the
/// extended knots and need not sum to one.
inline std::vector<double> basis_eval(const SplineGrid& grid, double x) {
    const std::size_t nb = grid.num_basis();
    const auto k1 = static_cast<std::size_t>(grid.order() + 1);
    std::vector<double> local(k1);
    const long first = basis_local(grid, x, local);
    std::vector<double> out(nb, 0.0);
    for (std::size_t t = 0; t < k1; ++t) {
        const long idx = first + static_cast<long>(t);
        if (idx >= 0 && idx < static_cast<long>(nb)) out[static_cast<std::size_t>(idx)] = local[t];
    }
    return out;
}

/// Derivatives of all G+k basis functions at x (right-limit at knots).
inline std::vector<double> basis_deriv(const SplineGrid& grid, double x) {
    const std::size_t nb = grid.num_basis();
    const auto k1 = static_cast<std::size_t>(grid.order() + 1);
    std::vector<double> local(k1), deriv(k1);
    const long first = basis_local(grid, x, local, deriv);
    std::vector<double> out(nb, 0.0);
    for (std::size_t t = 0; t < k1; ++t) {
        const long idx = first + static_cast<long>(t);
        if (idx >= 0 && idx < static_cast<long>(nb)) out[static_cast<std::size_t>(idx)] = deriv[t];
    }
    return out;
}

}  // namespace kanoise
