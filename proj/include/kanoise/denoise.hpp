#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "kanoise/core.hpp"
#include "kanoise/data.hpp"

namespace kanoise {

/// Gaussian smoothing kernel exp(-|x - y|^2 / (2 sigma^2)), rows normalized to one.
struct KernelFilterConfig {
    double sigma = 0.1;
    // Unnormalized weights below this value are dropped before normalization.
    double cutoff = 1e-12;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("kernel filter: sigma must be > 0");
        if (!(cutoff >= 0.0 && cutoff < 1.0)) throw InvalidArgument("kernel filter: cutoff must lie in [0, 1)");
    }

    /// Distance beyond which every weight falls under the cutoff (infinite for cutoff 0).
    double support_radius() const {
        if (cutoff <= 0.0) return std::numeric_limits<double>::infinity();
        return sigma * std::sqrt(-2.0 * std::log(cutoff));
    }
};

/// Row-stochastic sparse matrix in compressed-row form.
struct KernelMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_start{0};
    std::vector<std::size_t> col;
    std::vector<double> val;

    std::size_t nnz() const noexcept { return val.size(); }

    double at(std::size_t r, std::size_t c) const {
        for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k)
            if (col[k] == c) return val[k];
        return 0.0;
    }

    std::vector<double> apply(std::span<const double> v) const {
        if (v.size() != n) throw DimensionMismatch("KernelMatrix::apply: size mismatch");
        std::vector<double> out(n, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            double acc = 0.0;
            for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) acc += val[k] * v[col[k]];
            out[r] = acc;
        }
        return out;
    }
};

namespace detail {

/// Uniform cell index over a point cloud; cells are at least `radius` wide so all
/// points within `radius` of a query lie in the 3^d surrounding cells.
class CellIndex {
public:
    CellIndex(const Matrix& pts, double radius) : d_(pts.cols()) {
        const std::size_t n = pts.rows();
        lo_.assign(d_, std::numeric_limits<double>::infinity());
        std::vector<double> hi(d_, -std::numeric_limits<double>::infinity());
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d_; ++c) {
                lo_[c] = std::min(lo_[c], pts(r, c));
                hi[c] = std::max(hi[c], pts(r, c));
            }
        double extent = 0.0;
        for (std::size_t c = 0; c < d_; ++c) extent = std::max(extent, hi[c] - lo_[c]);
        // Keep the cell count near the point count.
        const double cap = std::max(1.0, static_cast<double>(n));
        const double min_width = extent > 0.0 ? extent / std::pow(cap, 1.0 / static_cast<double>(std::max<std::size_t>(d_, 1))) : 1.0;
        width_ = std::isfinite(radius) ? std::max(radius, min_width) : std::numeric_limits<double>::infinity();
        dims_.assign(d_, 1);
        if (std::isfinite(width_) && width_ > 0.0)
            for (std::size_t c = 0; c < d_; ++c)
                dims_[c] = static_cast<std::size_t>(std::floor((hi[c] - lo_[c]) / width_)) + 1;
        stride_.assign(d_, 1);
        std::size_t cells = 1;
        for (std::size_t c = 0; c < d_; ++c) {
            stride_[c] = cells;
            cells *= dims_[c];
        }
        start_.assign(cells + 1, 0);
        cell_of_.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            cell_of_[r] = cell_index(pts.row(r));
            ++start_[cell_of_[r] + 1];
        }
        for (std::size_t k = 0; k < cells; ++k) start_[k + 1] += start_[k];
        order_.resize(n);
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t r = 0; r < n; ++r) order_[fill[cell_of_[r]]++] = r;
    }

    /// Calls fn(index) for every point in the cells adjacent to point `r`'s cell.
    template <class Fn>
    void for_each_candidate(std::size_t r, Fn&& fn) const {
        std::vector<long> base(d_);
        std::size_t cell = cell_of_[r];
        for (std::size_t c = d_; c-- > 0;) {
            base[c] = static_cast<long>(cell / stride_[c]);
            cell %= stride_[c];
        }
        std::vector<int> off(d_, -1);
        while (true) {
            bool valid = true;
            std::size_t idx = 0;
            for (std::size_t c = 0; c < d_; ++c) {
                const long v = base[c] + off[c];
                if (v < 0 || v >= static_cast<long>(dims_[c])) {
                    valid = false;
                    break;
                }
                idx += static_cast<std::size_t>(v) * stride_[c];
            }
            if (valid)
                for (std::size_t k = start_[idx]; k < start_[idx + 1]; ++k) fn(order_[k]);
            std::size_t c = 0;
            while (c < d_ && off[c] == 1) off[c++] = -1;
            if (c == d_) break;
            ++off[c];
        }
    }

private:
    std::size_t cell_index(std::span<const double> x) const {
        std::size_t idx = 0;
        for (std::size_t c = 0; c < d_; ++c) {
            std::size_t v = 0;
            if (std::isfinite(width_)) v = std::min(dims_[c] - 1, static_cast<std::size_t>((x[c] - lo_[c]) / width_));
            idx += v * stride_[c];
        }
        return idx;
    }

    std::size_t d_;
    double width_ = 1.0;
    std::vector<double> lo_;
    std::vector<std::size_t> dims_, stride_, start_, cell_of_, order_;
};

/// Calls fn(column, weight) for every unnormalized kernel weight of row r that survives
/// the cutoff. Visit order follows the cell index, not the column.
template <class Fn>
void kernel_row(const Matrix& pts, const CellIndex& index, const KernelFilterConfig& cfg, std::size_t r, Fn&& fn) {
    const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    const auto xr = pts.row(r);
    index.for_each_candidate(r, [&](std::size_t c) {
        const auto xc = pts.row(c);
        double d2 = 0.0;
        for (std::size_t k = 0; k < xr.size(); ++k) {
            const double diff = xr[k] - xc[k];
            d2 += diff * diff;
        }
        const double w = std::exp(-d2 * inv);
        if (w > 0.0 && w >= cfg.cutoff) fn(c, w);
    });
}

/// Runs fn(begin, end) over contiguous row blocks on up to `threads` threads.
template <class Fn>
void parallel_rows(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n / 256, 1))));
    if (threads == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t block = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = t * block, e = std::min(n, b + block);
        if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
}

}  // namespace detail

/// Sparse row-normalized Gaussian kernel over the rows of `inputs`.
inline KernelMatrix build_kernel(const Matrix& inputs, const KernelFilterConfig& cfg) {
    cfg.validate();
    if (inputs.rows() == 0) throw InvalidArgument("build_kernel: need at least one point");
    const detail::CellIndex index(inputs, cfg.support_radius());
    KernelMatrix k;
    k.n = inputs.rows();
    k.row_start.assign(1, 0);
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t r = 0; r < k.n; ++r) {
        row.clear();
        detail::kernel_row(inputs, index, cfg, r, [&](std::size_t c, double w) { row.emplace_back(c, w); });
        std::sort(row.begin(), row.end());
        double sum = 0.0;
        for (const auto& [c, w] : row) sum += w;
        for (const auto& [c, w] : row) {
            k.col.push_back(c);
            k.val.push_back(w / sum);
        }
        k.row_start.push_back(k.col.size());
    }
    return k;
}

/// Replaces each training label by its kernel-weighted average. Rows are computed
/// independently without materializing the matrix; the result does not depend on
/// `threads`.
inline LabeledDataset kernel_filter(const LabeledDataset& ds, const KernelFilterConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    if (ds.size() == 0) throw InvalidArgument("kernel_filter: empty dataset");
    const detail::CellIndex index(ds.inputs, cfg.support_radius());
    LabeledDataset out = ds;
    detail::parallel_rows(ds.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            double sum = 0.0, acc = 0.0;
            detail::kernel_row(ds.inputs, index, cfg, r, [&](std::size_t c, double w) {
                sum += w;
                acc += w * ds.labels[c];
            });
            out.labels[r] = acc / sum;
        }
    });
    out.filter_sigma = cfg.sigma;
    out.filter_cutoff = cfg.cutoff;
    return out;
}

inline double sinc(double u) noexcept {
    if (u == 0.0) return 1.0;
    const double x = std::numbers::pi * u;
    return std::sin(x) / x;
}

/// One sample (t_k, f_k) of a band-limited signal.
struct Sample {
    double t;
    double value;
};

/// Oversampled reconstruction f(t) = T * sum_k f_k sinc(2 Omega (t - t_k)) from samples on
/// the grid t_k = k T / (2 Omega), where Omega is the band limit in cycles per unit
/// and 0 < T <= 1 is the oversampling spacing factor. T = 1 is the Shannon series.
inline double sinc_reconstruct(std::span<const Sample> samples, double bandwidth, double spacing, double t) {
    if (!(spacing > 0.0 && spacing <= 1.0)) throw InvalidArgument("sinc_reconstruct: spacing T must lie in (0, 1]");
    if (!(bandwidth > 0.0)) throw InvalidArgument("sinc_reconstruct: bandwidth must be > 0");
    const double step = spacing / (2.0 * bandwidth);
    double acc = 0.0;
    for (const auto& s : samples) {
        const double k = s.t / step;
        if (std::abs(k - std::round(k)) > 1e-6 * std::max(1.0, std::abs(k)))
            throw InvalidArgument("sinc_reconstruct: sample at t=" + std::to_string(s.t) + " is off the uniform grid");
        acc += s.value * sinc(2.0 * bandwidth * (t - s.t));
    }
    return spacing * acc;
}

}  // namespace kanoise
