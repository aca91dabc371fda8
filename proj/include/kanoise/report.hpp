#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kanoise/core.hpp"
#include "kanoise/experiments.hpp"
#include "kanoise/kan.hpp"

namespace kanoise {

/// Fixed-format number for CSV cells; identical inputs always give identical text.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

/// Header plus string rows; written with ',' separators and '\n' line ends.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != header.size()) throw DimensionMismatch("CsvTable: row width does not match header");
        rows.push_back(std::move(row));
    }

    void write(std::ostream& out) const {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
            out << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open " + path + " for writing");
        write(out);
    }
};

/// Per-record table. Wall time is kept out so reruns produce identical bytes;
/// see timings_table.
inline CsvTable records_table(const std::vector<ExperimentRecord>& recs) {
    CsvTable t;
    t.header = {"study",       "arm",          "function",        "shape",        "seed",
                "n_train",     "n_base",       "r",               "snr_db",       "realized_snr_db",
                "noise_sigma", "filter_sigma", "test_rmse",       "final_train_rmse", "out_of_range_fraction"};
    for (const auto& r : recs)
        t.add({r.study, r.arm, r.function_id, format_widths(r.network_shape, '-'), std::to_string(r.seed),
               std::to_string(r.n_train), std::to_string(r.n_base), fmt(r.oversample_factor), fmt(r.snr_db),
               fmt(r.realized_snr_db), fmt(r.noise_sigma), fmt(r.filter_sigma), fmt(r.test_rmse),
               fmt(r.final_train_rmse), fmt(r.out_of_range_fraction)});
    return t;
}

inline CsvTable timings_table(const std::vector<ExperimentRecord>& recs) {
    CsvTable t;
    t.header = {"record", "function", "arm", "seed", "n_train", "wall_time_s"};
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        t.add({std::to_string(i), r.function_id, r.arm, std::to_string(r.seed), std::to_string(r.n_train), fmt(r.wall_time_s)});
    }
    return t;
}

/// Mean/std/count of test RMSE per distinct (study, arm, function, n_train, r, snr, filter sigma).
inline CsvTable aggregate_table(const std::vector<ExperimentRecord>& recs) {
    using Key = std::tuple<std::string, std::string, std::string, std::string, long, double, std::optional<double>,
                           std::optional<double>>;
    std::vector<Key> keys;
    std::vector<std::vector<double>> values;
    for (const auto& r : recs) {
        Key k{r.study, r.arm, r.function_id, format_widths(r.network_shape, '-'), r.n_train, r.oversample_factor, r.snr_db,
              r.filter_sigma};
        auto it = std::find(keys.begin(), keys.end(), k);
        if (it == keys.end()) {
            keys.push_back(k);
            values.emplace_back();
            it = keys.end() - 1;
        }
        values[static_cast<std::size_t>(it - keys.begin())].push_back(r.test_rmse);
    }
    CsvTable t;
    t.header = {"study", "arm", "function", "shape", "n_train", "r", "snr_db", "filter_sigma", "mean_test_rmse",
                "std_test_rmse", "count"};
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& [study, arm, fn, shape, n, r, snr, fs] = keys[i];
        const MeanStd m = mean_std(values[i]);
        t.add({study, arm, fn, shape, std::to_string(n), fmt(r), fmt(snr), fmt(fs), fmt(m.mean), fmt(m.std),
               std::to_string(m.count)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Minimal static SVG line charts

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<ChartSeries> series;

    void write(std::ostream& out) const {
        const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
        auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
        auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        for (const auto& s : series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if ((log_x && s.x[i] <= 0) || (log_y && s.y[i] <= 0) || !std::isfinite(s.y[i])) continue;
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
        if (!(x0 <= x1)) x0 = 0, x1 = 1;
        if (!(y0 <= y1)) y0 = 0, y1 = 1;
        if (x1 == x0) x0 -= 0.5, x1 += 0.5;
        if (y1 == y0) y0 -= 0.5, y1 += 0.5;
        auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
        auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
        out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
            const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
            out << "<text x=\"" << px(vx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
                << fmt(std::round(vx * 1e4) / 1e4) << "</text>\n";
            out << "<text x=\"" << L - 6 << "\" y=\"" << py(vy) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
                << fmt(std::round(vy * 1e6) / 1e6) << "</text>\n";
        }
        out << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
            << x_label << (log_x ? " (log)" : "") << "</text>\n";
        out << "<text x=\"16\" y=\"" << T + (H - T - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
            << T + (H - T - B) / 2 << ")\">" << y_label << (log_y ? " (log)" : "") << "</text>\n";
        for (std::size_t s = 0; s < series.size(); ++s) {
            const char* c = colors[s % 8];
            out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < series[s].x.size(); ++i) {
                if ((log_x && series[s].x[i] <= 0) || (log_y && series[s].y[i] <= 0) || !std::isfinite(series[s].y[i])) continue;
                out << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
            }
            out << "\"/>\n";
            out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 + 18 * static_cast<double>(s) << "\" font-size=\"12\" fill=\""
                << c << "\">" << series[s].name << "</text>\n";
        }
        out << "</svg>\n";
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open " + path + " for writing");
        write(out);
    }
};

}  // namespace kanoise
