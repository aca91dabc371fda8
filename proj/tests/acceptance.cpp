// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers as arguments to run a subset.
// Study records are written under $KANOISE_ACCEPTANCE_OUT (default: acceptance-out).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kanoise/denoise.hpp"
#include "kanoise/experiments.hpp"
#include "kanoise/kan.hpp"
#include "kanoise/report.hpp"
#include "kanoise/splines.hpp"

using namespace kanoise;
namespace fs = std::filesystem;

namespace {

// Tolerances and study sizes.
constexpr int kSeeds = 5;
constexpr long kBaseSamples = 3000;
constexpr double kNoiseSigma = 0.2;

constexpr double kCleanRmseMax = 1e-2;
constexpr double kCleanRuntimeMax = 120.0;
constexpr double kNoiseRatioMin = 4.0;

constexpr double kSnrF2 = 4.44, kSnrF2Tol = 0.5;
constexpr double kSnrF1 = 21.5, kSnrF3 = 18.7, kSnrTol = 1.5;
constexpr long kSnrMonteCarlo = 1'000'000;

constexpr double kFilterSigma = 0.1;
const std::vector<double> kCrossoverGrid{-10, -6, -4, -2, 0, 2, 4, 6, 10, 15};
constexpr double kCrossF2Lo = -4, kCrossF2Hi = 4, kCrossF3Lo = -6, kCrossF3Hi = 2;

const std::vector<double> kSweepSigmas{0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
const std::vector<double> kSweepSnrs{-5, 0, 15};
constexpr long kSweepSamples = 500;

const std::vector<double> kOversampleR{1, 5, 10, 15, 20, 25};
constexpr long kOversampleBase = 1000;
constexpr double kOversampleSnr = 5.0;
constexpr double kExponentLo = -0.7, kExponentHi = -0.3, kR2Min = 0.8;
constexpr double kOversampleRuntimeMax = 3600.0;

constexpr double kCombinedSnrF2 = 4.46;
constexpr double kCombinedR = 25;

constexpr double kPartitionTol = 1e-9;
constexpr double kGradientRelTol = 1e-4;
constexpr int kGradientNetworks = 12;
constexpr double kRowSumTol = 1e-10;
constexpr double kIdentityTol = 1e-9;
constexpr double kFixpointTol = 1e-12;
constexpr double kPowerLawTol = 1e-12;
constexpr int kSincDraws = 20;

struct Outcome {
    bool pass;
    std::string detail;
};

fs::path out_dir() {
    const char* env = std::getenv("KANOISE_ACCEPTANCE_OUT");
    fs::path p = env && *env ? env : "acceptance-out";
    fs::create_directories(p);
    return p;
}

StudyOptions options() {
    StudyOptions o = StudyOptions::standard();
    o.threads = std::max(1u, std::thread::hardware_concurrency());
    o.progress = [](const ExperimentRecord& r) {
        std::fprintf(stderr, "  %s %s %s seed=%llu n=%ld rmse=%.4g (%.1fs)\n", r.study.c_str(), r.function_id.c_str(),
                     r.arm.c_str(), static_cast<unsigned long long>(r.seed), r.n_train, r.test_rmse, r.wall_time_s);
    };
    return o;
}

void save(const std::string& name, const std::vector<ExperimentRecord>& recs) {
    records_table(recs).write(out_dir() / (name + "_records.csv"));
    aggregate_table(recs).write(out_dir() / (name + "_aggregate.csv"));
}

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Noise table shared by criteria 1 and 2.
const NoiseTableResult& noise_table() {
    static const NoiseTableResult res = [] {
        auto r = run_noise_table({&target("f1"), &target("f2"), &target("f3")}, kBaseSamples, kNoiseSigma,
                                 seed_range(kSeeds), options());
        save("noise_table", r.records);
        return r;
    }();
    return res;
}

Outcome clean_baseline() {
    const auto& res = noise_table();
    const auto& row = res.rows[1];
    double slowest = 0.0;
    for (const auto& r : res.records)
        if (r.function_id == "f2" && r.arm == "clean") slowest = std::max(slowest, r.wall_time_s);
    const bool ok = row.clean.mean <= kCleanRmseMax && slowest <= kCleanRuntimeMax;
    return {ok, "f2 clean mean rmse " + g(row.clean.mean) + " (<= " + g(kCleanRmseMax) + "), slowest run " + g(slowest) +
                    "s (<= " + g(kCleanRuntimeMax) + "s)"};
}

Outcome noise_degradation() {
    bool ok = true;
    std::string detail;
    for (const auto& row : noise_table().rows) {
        const double ratio = row.noisy.mean / row.clean.mean;
        ok = ok && ratio >= kNoiseRatioMin;
        detail += row.function_id + " noisy/clean " + g(ratio) + "; ";
    }
    return {ok, detail + "need >= " + g(kNoiseRatioMin)};
}

double monte_carlo_snr(const char* name) {
    const auto ds = sample_dataset(target(name), kSnrMonteCarlo, 20240601);
    return 10.0 * std::log10(mean_square(ds.clean_labels) / (kNoiseSigma * kNoiseSigma));
}

Outcome snr_convention() {
    const double f1 = monte_carlo_snr("f1"), f2 = monte_carlo_snr("f2"), f3 = monte_carlo_snr("f3");
    const bool ok = std::abs(f2 - kSnrF2) <= kSnrF2Tol && std::abs(f1 - kSnrF1) <= kSnrTol && std::abs(f3 - kSnrF3) <= kSnrTol;
    return {ok, "f1 " + g(f1) + " dB, f2 " + g(f2) + " dB, f3 " + g(f3) + " dB"};
}

Outcome filtering_crossover() {
    bool ok = true;
    std::string detail;
    for (auto [name, lo, hi] : {std::tuple{"f2", kCrossF2Lo, kCrossF2Hi}, std::tuple{"f3", kCrossF3Lo, kCrossF3Hi}}) {
        const auto res = run_filter_crossover(target(name), kCrossoverGrid, kFilterSigma, seed_range(kSeeds), kBaseSamples,
                                              options());
        save(std::string("crossover_") + name, res.records);
        const auto& top = res.points.back();
        const bool worse_at_top = top.filtered.mean > top.raw.mean;
        const bool in_window = res.crossover_snr_db && *res.crossover_snr_db >= lo && *res.crossover_snr_db <= hi;
        ok = ok && worse_at_top && in_window;
        detail += std::string(name) + " crossover " + (res.crossover_snr_db ? g(*res.crossover_snr_db) + " dB (interp " +
                                                                               g(*res.crossover_interp_db) + ")"
                                                                         : std::string("none")) +
                  " want [" + g(lo) + "," + g(hi) + "], at " + g(top.snr_db) + " dB filtered " + g(top.filtered.mean) +
                  " vs raw " + g(top.raw.mean) + "; ";
    }
    return {ok, detail};
}

Outcome optimal_sigma() {
    bool ok = true;
    std::string detail;
    for (const char* name : {"f4", "f5", "f6"}) {
        const auto res = run_sigma_sweep(target(name), kSweepSigmas, kSweepSnrs, kSweepSamples, seed_range(kSeeds), options());
        save(std::string("sigma_sweep_") + name, res.records);
        detail += std::string(name) + ":";
        for (std::size_t i = 0; i < res.snr_grid.size(); ++i) {
            if (res.snr_grid[i] <= 0.0) ok = ok && res.interior_argmin(i);
            detail += " " + g(res.snr_grid[i]) + "dB argmin " + g(res.argmin_sigma[i]) + (res.interior_argmin(i) ? "*" : "") +
                      " seed-mean " + g(res.mean_seed_argmin_sigma[i]);
        }
        ok = ok && res.mean_seed_argmin_sigma.front() >= res.mean_seed_argmin_sigma.back();
        detail += "; ";
    }
    return {ok, detail + "(* = interior)"};
}

Outcome scaling_law() {
    bool ok = true;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    for (const char* name : {"f1", "f2"}) {
        const auto res = run_oversampling(target(name), {}, kOversampleBase, kOversampleR, {kOversampleSnr}, seed_range(kSeeds),
                                          options());
        save(std::string("oversample_") + name, res.records);
        const auto& fit = res.series.front().fit;
        ok = ok && fit && fit->exponent >= kExponentLo && fit->exponent <= kExponentHi && fit->r2 >= kR2Min;
        detail += std::string(name) + (fit ? " exponent " + g(fit->exponent) + " r2 " + g(fit->r2) : " no fit") + "; ";
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ok = ok && elapsed <= kOversampleRuntimeMax;
    return {ok, detail + "total " + g(elapsed) + "s"};
}

Outcome combined_ordering() {
    const auto res = run_combined_study({{&target("f2"), kCombinedSnrF2}}, {kCombinedR}, kFilterSigma, kBaseSamples,
                                        seed_range(kSeeds), options());
    save("combined", res.records);
    auto mean = [&](const std::string& arm) {
        for (std::size_t i = 0; i < res.arms.size(); ++i)
            if (res.arms[i].name == arm) return res.rows[0].arms[i].mean;
        throw InvalidArgument("missing arm " + arm);
    };
    const double filtered = mean("filtered"), over = mean("25x"), both = mean("25x+filter");
    return {over < filtered && both > over,
            "filter-only " + g(filtered) + ", 25x " + g(over) + ", 25x+filter " + g(both)};
}

Outcome property_suites() {
    std::vector<std::string> failed;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    const auto grid = build_grid(-1, 1, 5, 3);
    double worst_pou = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const auto b = basis_eval(grid, unit(rng));
        worst_pou = std::max(worst_pou, std::abs(std::accumulate(b.begin(), b.end(), 0.0) - 1.0));
    }
    if (!(worst_pou < kPartitionTol)) failed.push_back("partition of unity " + g(worst_pou));

    double worst_grad = 0.0;
    const std::vector<std::vector<int>> shapes{{2, 5, 1}, {2, 3, 1}, {3, 2, 2, 1}, {4, 2, 1, 1}};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int n = 0; n < kGradientNetworks; ++n) {
        KanNetwork net({shapes[static_cast<std::size_t>(n) % shapes.size()]});
        for (auto& p : net.parameters()) p = 0.4 * normal(rng);
        const auto& L = net.layout();
        for (std::size_t l = 0; l < L.num_layers(); ++l)
            for (std::size_t i = 0; i < L.in_width(l); ++i)
                for (std::size_t j = 0; j < L.out_width(l); ++j) net.weight(l, i, j) = 0.5 + 0.5 * normal(rng);
        Matrix x(16, L.in_width(0));
        for (auto& v : x.data()) v = unit(rng);
        std::vector<double> y(16);
        for (auto& v : y) v = normal(rng);
        auto loss = [&](const KanNetwork& m) {
            const auto p = forward_batch(m, x);
            double acc = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - y[i]) * (p[i] - y[i]);
            return 0.5 * acc / static_cast<double>(p.size());
        };
        const auto pred = forward_batch(net, x);
        std::vector<double> res(16);
        for (std::size_t i = 0; i < 16; ++i) res[i] = pred[i] - y[i];
        const auto grad = backward(net, x, res);
        KanNetwork probe = net;
        auto p = probe.parameters();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double saved = p[k], h = 1e-5;
            p[k] = saved + h;
            const double up = loss(probe);
            p[k] = saved - h;
            const double down = loss(probe);
            p[k] = saved;
            const double fd = (up - down) / (2 * h);
            worst_grad = std::max(worst_grad, std::abs(fd - grad.values[k]) /
                                                  std::max(1e-6, std::max(std::abs(fd), std::abs(grad.values[k]))));
        }
    }
    if (!(worst_grad < kGradientRelTol)) failed.push_back("gradient check " + g(worst_grad));

    const auto pts = sample_dataset(target("f2"), 400, 5);
    const auto km = build_kernel(pts.inputs, {0.1, 1e-12});
    double worst_row = 0.0;
    bool negative = false;
    for (std::size_t r = 0; r < km.n; ++r) {
        double s = 0.0;
        for (std::size_t e = km.row_start[r]; e < km.row_start[r + 1]; ++e) {
            s += km.val[e];
            negative = negative || km.val[e] < 0.0;
        }
        worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    if (!(worst_row < kRowSumTol) || negative) failed.push_back("row-stochastic " + g(worst_row));

    auto noisy = add_noise(pts, {NoiseSpec::Mode::fixed_sigma, 0.3}, 6);
    const auto ident = kernel_filter(noisy, {1e-4, 1e-12});
    double worst_ident = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) worst_ident = std::max(worst_ident, std::abs(ident.labels[i] - noisy.labels[i]));
    if (!(worst_ident < kIdentityTol)) failed.push_back("sigma->0 identity " + g(worst_ident));

    auto constant = pts;
    for (auto& v : constant.labels) v = 2.75;
    const auto fixed = kernel_filter(constant, {0.3, 0.0});
    double worst_fix = 0.0;
    for (double v : fixed.labels) worst_fix = std::max(worst_fix, std::abs(v - 2.75));
    if (!(worst_fix <= kFixpointTol)) failed.push_back("constant fixpoint " + g(worst_fix));

    std::vector<std::pair<double, double>> law;
    for (double r : kOversampleR) law.emplace_back(r, 0.04 / std::sqrt(r));
    const auto fit = fit_power_law(law, 5.0);
    const double law_err = std::max(std::abs(fit.exponent + 0.5), std::abs(fit.amplitude - 0.04));
    if (!(law_err < kPowerLawTol)) failed.push_back("power-law recovery " + g(law_err));

    const auto sinc = run_sinc_demo({1.0, 0.25}, kNoiseSigma, kSincDraws, 11);
    if (!(sinc[1].rmse.mean < sinc[0].rmse.mean)) failed.push_back("sinc averaging");

    std::string detail = "pou " + g(worst_pou) + ", grad " + g(worst_grad) + " over " + std::to_string(kGradientNetworks) +
                         " nets, rows " + g(worst_row) + ", identity " + g(worst_ident) + ", fixpoint " + g(worst_fix) +
                         ", power law " + g(law_err) + ", sinc T=0.25 " + g(sinc[1].rmse.mean) + " < T=1 " +
                         g(sinc[0].rmse.mean);
    for (const auto& f : failed) detail += "; FAILED " + f;
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, clean_baseline}, {2, noise_degradation}, {3, snr_convention}, {4, filtering_crossover},
        {5, optimal_sigma},  {6, scaling_law},       {7, combined_ordering}, {8, property_suites}};
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    std::vector<std::string> lines;
    for (const auto& [id, check] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("harness error: ") + e.what()};
        }
        failures += !o.pass;
        std::ostringstream line;
        line << "AC" << id << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail;
        lines.push_back(line.str());
        std::printf("%s\n", lines.back().c_str());
        std::fflush(stdout);
    }
    std::printf("\nsummary:\n");
    for (const auto& l : lines) std::printf("%s\n", l.c_str());
    std::printf("evaluated %zu criteria: %zu passed, %d failed\n", lines.size(), lines.size() - failures, failures);
    return failures == 0 ? 0 : 1;
}
