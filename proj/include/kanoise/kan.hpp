#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kanoise/core.hpp"
#include "kanoise/splines.hpp"

namespace kanoise {

/// Shape and spline configuration of a network, e.g. widths {2, 5, 1}.
struct KanSpec {
    std::vector<int> widths;
    int grid_count = 5;
    int order = 3;
    double range_lo = -1.0;
    double range_hi = 1.0;

    void validate() const {
        if (widths.size() < 2) throw InvalidArgument("KanSpec: need at least two layer widths");
        for (int w : widths)
            if (w < 1) throw InvalidArgument("KanSpec: widths must be positive");
        if (grid_count < 1) throw InvalidArgument("KanSpec: grid_count must be >= 1");
        if (order < 0) throw InvalidArgument("KanSpec: order must be >= 0");
        if (!(range_lo < range_hi)) throw InvalidArgument("KanSpec: need range_lo < range_hi");
    }

    std::size_t num_layers() const noexcept { return widths.size() - 1; }
    std::size_t num_basis() const noexcept { return static_cast<std::size_t>(grid_count + order); }

    friend bool operator==(const KanSpec&, const KanSpec&) = default;
};

/// "2,5,1" style shape string.
inline std::string format_widths(const std::vector<int>& widths, char sep = ',') {
    std::string s;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(widths[i]);
    }
    return s;
}

inline std::vector<int> parse_widths(const std::string& text) {
    std::vector<int> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        try {
            std::size_t used = 0;
            const int w = std::stoi(token, &used);
            if (used != token.size()) throw ParseError("bad width '" + token + "'");
            out.push_back(w);
        } catch (const std::logic_error&) {
            throw ParseError("bad network shape '" + text + "'");
        }
    }
    if (out.size() < 2) throw ParseError("network shape needs at least two widths: '" + text + "'");
    return out;
}

/// SiLU base function x / (1 + e^-x).
inline double silu(double x) noexcept {
    if (x >= 0.0) return x / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return x * e / (1.0 + e);
}

inline double silu_deriv(double x) noexcept {
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return s * (1.0 + x * (1.0 - s));
}

/// Non-owning view of one edge activation phi(x) = w * (silu(x) + spline(x)).
struct KanEdge {
    double weight = 0.0;
    std::span<const double> coeffs;
    const SplineGrid* grid = nullptr;
};

namespace detail {

// sum_t coeffs[first + t] * local[t] over indices that exist on the grid.
inline double spline_dot(std::span<const double> coeffs, long first, const double* local, int k1) noexcept {
    const long nb = static_cast<long>(coeffs.size());
    const int t0 = first < 0 ? static_cast<int>(-first) : 0;
    const int t1 = first + k1 > nb ? static_cast<int>(nb - first) : k1;
    double acc = 0.0;
    for (int t = t0; t < t1; ++t) acc += coeffs[static_cast<std::size_t>(first + t)] * local[t];
    return acc;
}

}  // namespace detail

inline double edge_forward(const KanEdge& edge, double x) {
    const int k1 = edge.grid->order() + 1;
    std::vector<double> local(static_cast<std::size_t>(k1));
    const long first = basis_local(*edge.grid, x, local);
    return edge.weight * (silu(x) + detail::spline_dot(edge.coeffs, first, local.data(), k1));
}

/// Offsets of every parameter in the flat parameter vector. Layer l stores its
/// d_in*d_out edge weights first, then d_in*d_out coefficient blocks of num_basis.
/// Edge (i, j) connects input node i to output node j and has index i*d_out + j.
class ParameterLayout {
public:
    ParameterLayout() = default;
    explicit ParameterLayout(const KanSpec& spec) : widths_(spec.widths), nb_(spec.num_basis()) {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const std::size_t edges = edge_count(l);
            weight_off_.push_back(off);
            off += edges;
            coeff_off_.push_back(off);
            off += edges * nb_;
        }
        size_ = off;
    }

    std::size_t size() const noexcept { return size_; }
    std::size_t num_layers() const noexcept { return weight_off_.size(); }
    std::size_t num_basis() const noexcept { return nb_; }
    std::size_t in_width(std::size_t l) const noexcept { return static_cast<std::size_t>(widths_[l]); }
    std::size_t out_width(std::size_t l) const noexcept { return static_cast<std::size_t>(widths_[l + 1]); }
    std::size_t edge_count(std::size_t l) const noexcept { return in_width(l) * out_width(l); }

    std::size_t weight_offset(std::size_t l, std::size_t i, std::size_t j) const noexcept {
        return weight_off_[l] + i * out_width(l) + j;
    }
    std::size_t coeff_offset(std::size_t l, std::size_t i, std::size_t j) const noexcept {
        return coeff_off_[l] + (i * out_width(l) + j) * nb_;
    }

    friend bool operator==(const ParameterLayout&, const ParameterLayout&) = default;

private:
    std::vector<int> widths_;
    std::size_t nb_ = 0;
    std::vector<std::size_t> weight_off_;
    std::vector<std::size_t> coeff_off_;
    std::size_t size_ = 0;
};

/// Partial derivatives for every network parameter, laid out like the network.
struct GradientBundle {
    ParameterLayout layout;
    std::vector<double> values;

    double weight(std::size_t l, std::size_t i, std::size_t j) const { return values[layout.weight_offset(l, i, j)]; }
    std::span<const double> coeffs(std::size_t l, std::size_t i, std::size_t j) const {
        return {values.data() + layout.coeff_offset(l, i, j), layout.num_basis()};
    }
};

class KanNetwork {
public:
    KanNetwork() = default;

    /// Network with all weights one and all coefficients zero.
    explicit KanNetwork(KanSpec spec, std::uint64_t seed = 0) : spec_(std::move(spec)), seed_(seed) {
        spec_.validate();
        layout_ = ParameterLayout(spec_);
        for (std::size_t l = 0; l < spec_.num_layers(); ++l)
            grids_.push_back(build_grid(spec_.range_lo, spec_.range_hi, spec_.grid_count, spec_.order));
        params_.assign(layout_.size(), 0.0);
        for (std::size_t l = 0; l < layout_.num_layers(); ++l)
            for (std::size_t i = 0; i < layout_.in_width(l); ++i)
                for (std::size_t j = 0; j < layout_.out_width(l); ++j) weight(l, i, j) = 1.0;
    }

    const KanSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const ParameterLayout& layout() const noexcept { return layout_; }
    const SplineGrid& grid(std::size_t l) const { return grids_[l]; }
    std::size_t num_layers() const noexcept { return layout_.num_layers(); }
    std::size_t input_width() const noexcept { return static_cast<std::size_t>(spec_.widths.front()); }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    double& weight(std::size_t l, std::size_t i, std::size_t j) { return params_[layout_.weight_offset(l, i, j)]; }
    double weight(std::size_t l, std::size_t i, std::size_t j) const {
        return params_[layout_.weight_offset(l, i, j)];
    }
    std::span<double> coeffs(std::size_t l, std::size_t i, std::size_t j) {
        return {params_.data() + layout_.coeff_offset(l, i, j), layout_.num_basis()};
    }
    std::span<const double> coeffs(std::size_t l, std::size_t i, std::size_t j) const {
        return {params_.data() + layout_.coeff_offset(l, i, j), layout_.num_basis()};
    }

    KanEdge edge(std::size_t l, std::size_t i, std::size_t j) const {
        return KanEdge{weight(l, i, j), coeffs(l, i, j), &grids_[l]};
    }

    friend bool operator==(const KanNetwork& a, const KanNetwork& b) {
        return a.spec_ == b.spec_ && a.seed_ == b.seed_ && a.params_ == b.params_;
    }

private:
    KanSpec spec_;
    std::uint64_t seed_ = 0;
    ParameterLayout layout_;
    std::vector<SplineGrid> grids_;
    std::vector<double> params_;
};

/// Coefficients ~ N(0, (0.1 / sqrt(G + k))^2), weights 1; deterministic in `seed`.
inline KanNetwork init_network(const KanSpec& spec, std::uint64_t seed) {
    KanNetwork net(spec, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.1 / std::sqrt(static_cast<double>(spec.num_basis())));
    const auto& layout = net.layout();
    for (std::size_t l = 0; l < layout.num_layers(); ++l)
        for (std::size_t i = 0; i < layout.in_width(l); ++i)
            for (std::size_t j = 0; j < layout.out_width(l); ++j)
                for (double& c : net.coeffs(l, i, j)) c = normal(rng);
    return net;
}

namespace detail {

/// Per-sample scratch space holding every intermediate needed by the backward pass.
class Evaluator {
public:
    explicit Evaluator(const KanNetwork& net) : net_(&net), k1_(net.spec().order + 1) {
        const auto& layout = net.layout();
        const std::size_t L = layout.num_layers();
        node_.resize(L + 1);
        grad_node_.resize(L + 1);
        first_.resize(L);
        basis_.resize(L);
        dbasis_.resize(L);
        base_.resize(L);
        dbase_.resize(L);
        pre_.resize(L);
        for (std::size_t l = 0; l <= L; ++l) {
            const std::size_t w = static_cast<std::size_t>(net.spec().widths[l]);
            node_[l].resize(w);
            grad_node_[l].resize(w);
        }
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t in = layout.in_width(l);
            first_[l].resize(in);
            basis_[l].resize(in * static_cast<std::size_t>(k1_));
            dbasis_[l].resize(in * static_cast<std::size_t>(k1_));
            base_[l].resize(in);
            dbase_[l].resize(in);
            pre_[l].resize(layout.edge_count(l));
        }
    }

    /// Forward pass for one row. `with_derivs` also records what backward() needs.
    double forward(std::span<const double> x, bool with_derivs) {
        const auto& layout = net_->layout();
        const std::size_t L = layout.num_layers();
        std::copy(x.begin(), x.end(), node_[0].begin());
        for (std::size_t l = 0; l < L; ++l) {
            eval_inputs(l, with_derivs && l > 0);
            propagate(l);
        }
        return node_[L][0];
    }

    /// Layer-0 evaluation from precomputed basis data (training inputs are fixed).
    double forward_cached_input(const long* first0, const double* basis0, const double* base0) {
        const auto& layout = net_->layout();
        const std::size_t L = layout.num_layers();
        const std::size_t in0 = layout.in_width(0);
        const std::size_t k1 = static_cast<std::size_t>(k1_);
        std::copy(first0, first0 + in0, first_[0].begin());
        std::copy(basis0, basis0 + in0 * k1, basis_[0].begin());
        std::copy(base0, base0 + in0, base_[0].begin());
        propagate(0);
        for (std::size_t l = 1; l < L; ++l) {
            eval_inputs(l, true);
            propagate(l);
        }
        return node_[L][0];
    }

    /// Accumulates d(loss)/d(params) for the last forward row given d(loss)/d(output).
    void backward(double dout, std::span<double> grad) {
        const auto& layout = net_->layout();
        const auto params = net_->parameters();
        const std::size_t L = layout.num_layers();
        const std::size_t nb = layout.num_basis();
        grad_node_[L][0] = dout;
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = layout.in_width(l);
            const std::size_t out = layout.out_width(l);
            const bool need_input_grad = l > 0;
            for (std::size_t i = 0; i < in; ++i) {
                const long first = first_[l][i];
                const double* b = &basis_[l][i * static_cast<std::size_t>(k1_)];
                const double* db = &dbasis_[l][i * static_cast<std::size_t>(k1_)];
                const int t0 = first < 0 ? static_cast<int>(-first) : 0;
                const int t1 = first + k1_ > static_cast<long>(nb) ? static_cast<int>(static_cast<long>(nb) - first) : k1_;
                double gin = 0.0;
                for (std::size_t j = 0; j < out; ++j) {
                    const double g = grad_node_[l + 1][j];
                    const std::size_t woff = layout.weight_offset(l, i, j);
                    const std::size_t coff = layout.coeff_offset(l, i, j);
                    const double w = params[woff];
                    grad[woff] += g * pre_[l][i * out + j];
                    const double gw = g * w;
                    double dspline = 0.0;
                    for (int t = t0; t < t1; ++t) {
                        const std::size_t c = coff + static_cast<std::size_t>(first + t);
                        grad[c] += gw * b[t];
                        if (need_input_grad) dspline += params[c] * db[t];
                    }
                    if (need_input_grad) gin += gw * (dbase_[l][i] + dspline);
                }
                if (need_input_grad) grad_node_[l][i] = gin;
            }
        }
    }

    const std::vector<double>& nodes(std::size_t l) const { return node_[l]; }

private:
    void eval_inputs(std::size_t l, bool with_derivs) {
        const SplineGrid& grid = net_->grid(l);
        const std::size_t k1 = static_cast<std::size_t>(k1_);
        for (std::size_t i = 0; i < node_[l].size(); ++i) {
            const double x = node_[l][i];
            std::span<double> b(&basis_[l][i * k1], k1);
            if (with_derivs) {
                std::span<double> db(&dbasis_[l][i * k1], k1);
                first_[l][i] = basis_local(grid, x, b, db);
                dbase_[l][i] = silu_deriv(x);
            } else {
                first_[l][i] = basis_local(grid, x, b);
            }
            base_[l][i] = silu(x);
        }
    }

    void propagate(std::size_t l) {
        const auto& layout = net_->layout();
        const auto params = net_->parameters();
        const std::size_t in = layout.in_width(l);
        const std::size_t out = layout.out_width(l);
        const std::size_t nb = layout.num_basis();
        auto& next = node_[l + 1];
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < in; ++i) {
            const double* b = &basis_[l][i * static_cast<std::size_t>(k1_)];
            const long first = first_[l][i];
            for (std::size_t j = 0; j < out; ++j) {
                std::span<const double> c(params.data() + layout.coeff_offset(l, i, j), nb);
                const double pre = base_[l][i] + spline_dot(c, first, b, k1_);
                pre_[l][i * out + j] = pre;
                next[j] += params[layout.weight_offset(l, i, j)] * pre;
            }
        }
    }

    const KanNetwork* net_;
    int k1_;
    std::vector<std::vector<double>> node_, grad_node_;
    std::vector<std::vector<long>> first_;
    std::vector<std::vector<double>> basis_, dbasis_, base_, dbase_, pre_;
};

inline void check_input_width(const KanNetwork& net, std::size_t width, const char* who) {
    if (width != net.input_width())
        throw DimensionMismatch(std::string(who) + ": network expects " + std::to_string(net.input_width()) +
                                " inputs, got " + std::to_string(width));
}

}  // namespace detail

inline double forward(const KanNetwork& net, std::span<const double> input) {
    detail::check_input_width(net, input.size(), "forward");
    detail::Evaluator ev(net);
    return ev.forward(input, false);
}

/// Row-wise forward pass; bit-identical to calling forward() per row.
inline std::vector<double> forward_batch(const KanNetwork& net, const Matrix& inputs) {
    std::vector<double> out(inputs.rows());
    if (inputs.rows() == 0) return out;
    detail::check_input_width(net, inputs.cols(), "forward_batch");
    detail::Evaluator ev(net);
    for (std::size_t r = 0; r < inputs.rows(); ++r) out[r] = ev.forward(inputs.row(r), false);
    return out;
}

/// Exact gradient of 0.5 * mean(residual^2), with residual = prediction - label.
inline GradientBundle backward(const KanNetwork& net, const Matrix& inputs, std::span<const double> residuals) {
    if (inputs.rows() != residuals.size())
        throw DimensionMismatch("backward: " + std::to_string(inputs.rows()) + " rows but " +
                                std::to_string(residuals.size()) + " residuals");
    GradientBundle g{net.layout(), std::vector<double>(net.parameter_count(), 0.0)};
    if (inputs.rows() == 0) return g;
    detail::check_input_width(net, inputs.cols(), "backward");
    detail::Evaluator ev(net);
    const double scale = 1.0 / static_cast<double>(inputs.rows());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        ev.forward(inputs.row(r), true);
        ev.backward(residuals[r] * scale, g.values);
    }
    return g;
}

/// Fraction of hidden-layer node values that fall outside the spline grid range.
inline double out_of_range_fraction(const KanNetwork& net, const Matrix& inputs) {
    if (net.num_layers() < 2 || inputs.rows() == 0) return 0.0;
    detail::check_input_width(net, inputs.cols(), "out_of_range_fraction");
    detail::Evaluator ev(net);
    std::size_t outside = 0, total = 0;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        ev.forward(inputs.row(r), false);
        for (std::size_t l = 1; l < net.num_layers(); ++l) {
            const SplineGrid& grid = net.grid(l);
            for (double v : ev.nodes(l)) {
                ++total;
                if (!grid.contains(v)) ++outside;
            }
        }
    }
    return static_cast<double>(outside) / static_cast<double>(total);
}

// Checkpoint format (text, one token group per line):
//   kanoise-checkpoint 1
//   widths 2 5 1
//   grid_count 5
//   order 3
//   range -1 1
//   seed 7
//   params 135
//   <135 lines, one parameter each, %.17g, in ParameterLayout order>

inline void save_checkpoint(const KanNetwork& net, std::ostream& out) {
    const auto& s = net.spec();
    out << "kanoise-checkpoint 1\n";
    out << "widths " << format_widths(s.widths, ' ') << '\n';
    out << "grid_count " << s.grid_count << '\n';
    out << "order " << s.order << '\n';
    out << std::setprecision(17);
    out << "range " << s.range_lo << ' ' << s.range_hi << '\n';
    out << "seed " << net.seed() << '\n';
    out << "params " << net.parameter_count() << '\n';
    for (double p : net.parameters()) out << p << '\n';
}

inline KanNetwork load_checkpoint(std::istream& in) {
    auto expect_key = [&](const std::string& key) -> std::istringstream {
        std::string line;
        if (!std::getline(in, line)) throw ParseError("checkpoint: missing '" + key + "' line");
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) throw ParseError("checkpoint: expected '" + key + "', got '" + k + "'");
        return ls;
    };
    {
        auto ls = expect_key("kanoise-checkpoint");
        int version = 0;
        ls >> version;
        if (version != 1) throw ParseError("checkpoint: unsupported version");
    }
    KanSpec spec;
    {
        auto ls = expect_key("widths");
        int w;
        while (ls >> w) spec.widths.push_back(w);
    }
    expect_key("grid_count") >> spec.grid_count;
    expect_key("order") >> spec.order;
    expect_key("range") >> spec.range_lo >> spec.range_hi;
    std::uint64_t seed = 0;
    expect_key("seed") >> seed;
    std::size_t count = 0;
    expect_key("params") >> count;
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    KanNetwork net(spec, seed);
    if (count != net.parameter_count())
        throw ParseError("checkpoint: parameter count " + std::to_string(count) + " does not match shape");
    for (double& p : net.parameters()) {
        std::string tok;
        if (!(in >> tok)) throw ParseError("checkpoint: truncated parameter list");
        try {
            p = std::stod(tok);
        } catch (const std::logic_error&) {
            throw ParseError("checkpoint: bad parameter '" + tok + "'");
        }
    }
    return net;
}

inline void save_checkpoint(const KanNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    save_checkpoint(net, out);
}

inline KanNetwork load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace kanoise
