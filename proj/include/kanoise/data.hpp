#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kanoise/core.hpp"

namespace kanoise {

enum class FunctionId { f1, f2, f3, f4, f5, f6 };

/// Benchmark target: formula, arity and the reference network shape.
struct TargetFunction {
    FunctionId id;
    std::string_view name;
    int arity;
    std::vector<int> default_shape;
    std::string_view formula;
    double (*evaluator)(std::span<const double>);
};

namespace detail {

inline double eval_f1(std::span<const double> x) {
    return std::exp(std::sin(std::numbers::pi * x[0]) + x[1] * x[1]);
}
inline double eval_f2(std::span<const double> x) { return x[0] * x[1]; }
inline double eval_f3(std::span<const double> x) {
    const double pi = std::numbers::pi;
    const double a = std::sin(pi * x[0] * x[0] + pi * x[1] * x[1]);
    const double b = std::sin(pi * x[2] * x[2] + pi * x[3] * x[3]);
    return std::exp(0.5 * (a + b));
}
inline double eval_f4(std::span<const double> x) { return 1.0 + x[0] * std::sin(x[1]); }
inline double eval_f5(std::span<const double> x) { return std::asin(x[0] * std::sin(x[1])); }
inline double eval_f6(std::span<const double> x) { return x[0] * std::sqrt(x[1] * x[1] + x[2] * x[2]); }

}  // namespace detail

inline const std::array<TargetFunction, 6>& function_registry() {
    static const std::array<TargetFunction, 6> registry{{
        {FunctionId::f1, "f1", 2, {2, 5, 1}, "exp(sin(pi*x)+y^2)", &detail::eval_f1},
        {FunctionId::f2, "f2", 2, {2, 5, 1}, "x*y", &detail::eval_f2},
        {FunctionId::f3, "f3", 4, {4, 2, 1, 1}, "exp(0.5*(sin(pi*(x1^2+x2^2))+sin(pi*(x3^2+x4^2))))",
         &detail::eval_f3},
        {FunctionId::f4, "f4", 2, {2, 2, 1}, "1+x*sin(y)", &detail::eval_f4},
        {FunctionId::f5, "f5", 2, {2, 2, 1}, "asin(x*sin(y))", &detail::eval_f5},
        {FunctionId::f6, "f6", 3, {3, 2, 2, 1}, "x*sqrt(y^2+z^2)", &detail::eval_f6},
    }};
    return registry;
}

inline const TargetFunction& target(FunctionId id) { return function_registry()[static_cast<std::size_t>(id)]; }

inline const TargetFunction& target(std::string_view name) {
    for (const auto& fn : function_registry())
        if (fn.name == name) return fn;
    throw InvalidArgument("unknown function '" + std::string(name) + "' (expected f1..f6)");
}

inline double eval_target(const TargetFunction& fn, std::span<const double> x) {
    if (static_cast<int>(x.size()) != fn.arity)
        throw DimensionMismatch(std::string(fn.name) + " takes " + std::to_string(fn.arity) + " arguments, got " +
                                std::to_string(x.size()));
    return fn.evaluator(x);
}

/// Inputs with (possibly noisy) training labels and the retained ground truth.
struct LabeledDataset {
    Matrix inputs;
    std::vector<double> labels;
    std::vector<double> clean_labels;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> filter_sigma;
    std::optional<double> filter_cutoff;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return inputs.cols(); }
};

/// n points drawn i.i.d. uniform on [-1, 1]^arity with clean labels.
inline LabeledDataset sample_dataset(const TargetFunction& fn, long n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("sample_dataset: n must be >= 1");
    LabeledDataset ds;
    ds.seed = seed;
    ds.inputs = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(fn.arity));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (auto& v : ds.inputs.data()) v = unif(rng);
    ds.clean_labels.resize(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < ds.inputs.rows(); ++r) ds.clean_labels[r] = fn.evaluator(ds.inputs.row(r));
    ds.labels = ds.clean_labels;
    return ds;
}

struct NoiseSpec {
    enum class Mode { fixed_sigma, target_snr };
    Mode mode = Mode::fixed_sigma;
    double value = 0.0;

    static NoiseSpec sigma(double s) { return {Mode::fixed_sigma, s}; }
    static NoiseSpec snr(double db) { return {Mode::target_snr, db}; }
};

inline double mean_square(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc / static_cast<double>(v.size());
}

/// Noise standard deviation that yields `snr_db` against the given clean labels.
inline double sigma_for_snr(std::span<const double> clean_labels, double snr_db) {
    return std::sqrt(mean_square(clean_labels) / std::pow(10.0, snr_db / 10.0));
}

/// Adds i.i.d. N(0, sigma^2) to the clean labels. Inputs are left untouched.
inline LabeledDataset add_noise(const LabeledDataset& ds, const NoiseSpec& spec, std::uint64_t seed) {
    double sigma = spec.value;
    if (spec.mode == NoiseSpec::Mode::target_snr) {
        if (!std::isfinite(spec.value)) throw InvalidArgument("add_noise: target SNR must be finite");
        sigma = sigma_for_snr(ds.clean_labels, spec.value);
    }
    if (!(sigma >= 0.0)) throw InvalidArgument("add_noise: negative noise sigma");
    LabeledDataset out = ds;
    out.noise_sigma = sigma;
    out.labels = ds.clean_labels;
    if (sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, sigma);
        for (double& y : out.labels) y += normal(rng);
    }
    return out;
}

/// 10 log10(mean(clean^2) / mean((labels - clean)^2)).
inline double snr_db(const LabeledDataset& ds) {
    double noise = 0.0;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        const double e = ds.labels[i] - ds.clean_labels[i];
        noise += e * e;
    }
    if (noise == 0.0) throw InvalidArgument("snr_db: dataset carries no noise");
    noise /= static_cast<double>(ds.labels.size());
    return 10.0 * std::log10(mean_square(ds.clean_labels) / noise);
}

// CSV layout: header "x1,...,xd,label,clean_label". Filtered datasets carry a
// leading "# filter_sigma=<s>,cutoff=<c>" metadata line.

inline void write_dataset_csv(const LabeledDataset& ds, std::ostream& out) {
    out << std::setprecision(17);
    if (ds.filter_sigma)
        out << "# filter_sigma=" << *ds.filter_sigma << ",cutoff=" << ds.filter_cutoff.value_or(0.0) << '\n';
    for (std::size_t c = 0; c < ds.dim(); ++c) out << 'x' << c + 1 << ',';
    out << "label,clean_label\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.inputs.row(r)) out << v << ',';
        out << ds.labels[r] << ',' << ds.clean_labels[r] << '\n';
    }
}

inline void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_dataset_csv(ds, out);
}

inline LabeledDataset read_dataset_csv(std::istream& in) {
    LabeledDataset ds;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("dataset csv: empty input");
    if (line.rfind("# ", 0) == 0) {
        double s = 0.0, c = 0.0;
        if (std::sscanf(line.c_str(), "# filter_sigma=%lf,cutoff=%lf", &s, &c) != 2)
            throw ParseError("dataset csv: bad metadata line '" + line + "'");
        ds.filter_sigma = s;
        ds.filter_cutoff = c;
        if (!std::getline(in, line)) throw ParseError("dataset csv: missing header");
    }
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "clean_label")
        throw ParseError("dataset csv: header must be x1..xd,label,clean_label");
    const std::size_t d = header.size() - 2;
    for (std::size_t c = 0; c < d; ++c)
        if (header[c] != "x" + std::to_string(c + 1)) throw ParseError("dataset csv: bad column '" + header[c] + "'");
    ds.inputs = Matrix(0, d);
    std::vector<double> row(d);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::logic_error&) {
                throw ParseError("dataset csv: bad number '" + cell + "' on line " + std::to_string(lineno));
            }
        }
        if (vals.size() != d + 2) throw ParseError("dataset csv: wrong column count on line " + std::to_string(lineno));
        ds.inputs.append_row(std::span<const double>(vals.data(), d));
        ds.labels.push_back(vals[d]);
        ds.clean_labels.push_back(vals[d + 1]);
    }
    if (ds.labels.empty()) throw ParseError("dataset csv: no rows");
    double noise = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) noise += (ds.labels[i] - ds.clean_labels[i]) * (ds.labels[i] - ds.clean_labels[i]);
    ds.noise_sigma = std::sqrt(noise / static_cast<double>(ds.size()));
    return ds;
}

inline LabeledDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_dataset_csv(in);
}

}  // namespace kanoise
