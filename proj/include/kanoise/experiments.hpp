#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "kanoise/core.hpp"
#include "kanoise/data.hpp"
#include "kanoise/denoise.hpp"
#include "kanoise/kan.hpp"
#include "kanoise/training.hpp"

namespace kanoise {

inline constexpr int kRecordSchemaVersion = 1;

enum class OversampleMode { fresh, duplicate };

inline std::string to_string(OversampleMode m) { return m == OversampleMode::fresh ? "fresh" : "duplicate"; }

inline OversampleMode parse_oversample_mode(const std::string& s) {
    if (s == "fresh") return OversampleMode::fresh;
    if (s == "duplicate") return OversampleMode::duplicate;
    throw ParseError("unknown oversampling mode '" + s + "' (expected fresh or duplicate)");
}

/// One trained-and-evaluated configuration.
struct ExperimentRecord {
    std::string study;
    std::string arm;
    std::string function_id;
    std::vector<int> network_shape;
    std::uint64_t seed = 0;
    long n_train = 0;
    long n_base = 0;
    double oversample_factor = 1.0;
    std::optional<double> snr_db;           // requested SNR, if noise was specified that way
    std::optional<double> realized_snr_db;  // measured on the training labels
    double noise_sigma = 0.0;
    std::optional<double> filter_sigma;
    double test_rmse = 0.0;
    double final_train_rmse = 0.0;
    double out_of_range_fraction = 0.0;
    double wall_time_s = 0.0;
};

/// What to run for a single record.
struct RunSpec {
    std::string study;
    std::string arm;
    const TargetFunction* fn = nullptr;
    std::vector<int> shape;
    std::uint64_t seed = 0;
    long n_base = 0;
    double r = 1.0;
    std::optional<double> snr_db;       // noise given as a target SNR...
    std::optional<double> noise_sigma;  // ...or as a fixed standard deviation
    std::optional<double> filter_sigma;
    OversampleMode mode = OversampleMode::fresh;

    long n_train() const { return static_cast<long>(std::llround(r * static_cast<double>(n_base))); }
};

/// Settings shared by every record of a study.
struct StudyOptions {
    TrainConfig train;
    int grid_count = 5;
    int order = 3;
    long n_test = 1000;
    double filter_cutoff = 1e-12;
    unsigned threads = 1;
    // Called after each finished record (serialized across workers).
    std::function<void(const ExperimentRecord&)> progress;

    /// Training profile used by all studies: a short Adam phase from the best of a few
    /// screened initializations, then L-BFGS refinement.
    static StudyOptions standard() {
        StudyOptions o;
        o.train.steps = 500;
        o.train.learning_rate = 1e-2;
        o.train.optimizer = Optimizer::adam;
        o.train.polish_steps = 1000;
        o.train.init_candidates = 4;
        o.train.screen_steps = 200;
        o.train.log_every = 100;
        return o;
    }
};

/// splitmix64-based seed derivation; every stream of a record is keyed by
/// (base seed, function, purpose, size).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(mix(base) ^ a) ^ b) ^ c);
}

namespace detail {

enum SeedPurpose : std::uint64_t { kTrainInputs = 1, kTrainNoise = 2, kTestSet = 3, kInit = 4 };

inline std::uint64_t fn_key(const TargetFunction& fn) { return static_cast<std::uint64_t>(fn.id) + 1; }

inline LabeledDataset training_data(const RunSpec& spec) {
    const TargetFunction& fn = *spec.fn;
    const long n = spec.n_train();
    if (n < 1) throw InvalidArgument("run: n_train must be >= 1");
    LabeledDataset ds;
    if (spec.mode == OversampleMode::fresh || n <= spec.n_base) {
        ds = sample_dataset(fn, n, derive_seed(spec.seed, fn_key(fn), kTrainInputs, static_cast<std::uint64_t>(n)));
    } else {
        // Repeat the base inputs cyclically; each copy later receives its own noise.
        const LabeledDataset base =
            sample_dataset(fn, spec.n_base, derive_seed(spec.seed, fn_key(fn), kTrainInputs, static_cast<std::uint64_t>(spec.n_base)));
        ds.seed = base.seed;
        ds.inputs = Matrix(static_cast<std::size_t>(n), base.dim());
        ds.clean_labels.resize(static_cast<std::size_t>(n));
        for (std::size_t r = 0; r < static_cast<std::size_t>(n); ++r) {
            const std::size_t src = r % base.size();
            std::copy(base.inputs.row(src).begin(), base.inputs.row(src).end(), ds.inputs.row(r).begin());
            ds.clean_labels[r] = base.clean_labels[src];
        }
        ds.labels = ds.clean_labels;
    }
    const std::uint64_t noise_seed = derive_seed(spec.seed, fn_key(fn), kTrainNoise, static_cast<std::uint64_t>(n));
    if (spec.snr_db) return add_noise(ds, NoiseSpec::snr(*spec.snr_db), noise_seed);
    if (spec.noise_sigma) return add_noise(ds, NoiseSpec::sigma(*spec.noise_sigma), noise_seed);
    return ds;
}

}  // namespace detail

/// Clean held-out set shared by every record with the same (function, seed).
inline LabeledDataset test_data(const TargetFunction& fn, std::uint64_t seed, long n_test) {
    return sample_dataset(fn, n_test, derive_seed(seed, detail::fn_key(fn), detail::kTestSet));
}

/// Training set of a record: fresh (or duplicated) inputs plus the requested noise.
inline LabeledDataset training_data(const RunSpec& spec) { return detail::training_data(spec); }

/// Network initialization seed of every record with the same (function, seed).
inline std::uint64_t init_seed(const TargetFunction& fn, std::uint64_t seed) {
    return derive_seed(seed, detail::fn_key(fn), detail::kInit);
}

/// Builds the training set, optionally filters it, trains and evaluates one network.
inline ExperimentRecord run_record(const RunSpec& spec, const StudyOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const TargetFunction& fn = *spec.fn;
    LabeledDataset train_set = training_data(spec);

    ExperimentRecord rec;
    rec.study = spec.study;
    rec.arm = spec.arm;
    rec.function_id = std::string(fn.name);
    rec.network_shape = spec.shape;
    rec.seed = spec.seed;
    rec.n_train = spec.n_train();
    rec.n_base = spec.n_base;
    rec.oversample_factor = spec.r;
    rec.snr_db = spec.snr_db;
    rec.noise_sigma = train_set.noise_sigma;
    if (train_set.noise_sigma > 0.0) rec.realized_snr_db = snr_db(train_set);
    rec.filter_sigma = spec.filter_sigma;

    if (spec.filter_sigma) train_set = kernel_filter(train_set, KernelFilterConfig{*spec.filter_sigma, opt.filter_cutoff});

    const LabeledDataset test_set = test_data(fn, spec.seed, opt.n_test);
    KanSpec kspec;
    kspec.widths = spec.shape;
    kspec.grid_count = opt.grid_count;
    kspec.order = opt.order;
    TrainConfig cfg = opt.train;
    cfg.seed = init_seed(fn, spec.seed);
    cfg.log_every = std::max(1, cfg.total_steps());
    const auto [net, report] = fit(kspec, train_set, test_set, cfg);

    rec.test_rmse = report.final_test_rmse;
    rec.final_train_rmse = report.train_rmse_curve.back();
    rec.out_of_range_fraction = report.out_of_range_fraction;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Executes every spec on a work queue. Output order matches input order regardless
/// of scheduling.
inline std::vector<ExperimentRecord> run_all(const std::vector<RunSpec>& specs, const StudyOptions& opt) {
    std::vector<ExperimentRecord> out(specs.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            try {
                out[i] = run_record(specs[i], opt);
                if (opt.progress) {
                    std::lock_guard lock(mu);
                    opt.progress(out[i]);
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = specs.size();
                return;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(specs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

/// Sample mean and (n-1) standard deviation.
inline MeanStd mean_std(std::span<const double> v) {
    MeanStd m;
    m.count = v.size();
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

/// Mean/std of test RMSE over the records matching `pred`.
template <class Pred>
MeanStd summarize(const std::vector<ExperimentRecord>& recs, Pred pred) {
    std::vector<double> v;
    for (const auto& r : recs)
        if (pred(r)) v.push_back(r.test_rmse);
    return mean_std(v);
}

// ---------------------------------------------------------------------------
// Power-law fit

struct PowerLawFit {
    double exponent = 0.0;
    double amplitude = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Least-squares line through (log r, log rmse) for the points with r >= r_min.
inline PowerLawFit fit_power_law(std::span<const std::pair<double, double>> series, double r_min) {
    std::vector<double> lx, ly;
    for (const auto& [r, e] : series) {
        if (r < r_min) continue;
        if (!(e > 0.0) || !(r > 0.0)) throw InvalidArgument("fit_power_law: r and rmse must be positive");
        lx.push_back(std::log(r));
        ly.push_back(std::log(e));
    }
    if (lx.size() < 4)
        throw InvalidArgument("fit_power_law: need at least 4 points with r >= r_min, got " + std::to_string(lx.size()));
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw InvalidArgument("fit_power_law: all r values are equal");
    PowerLawFit fit;
    fit.points = lx.size();
    fit.exponent = sxy / sxx;
    fit.amplitude = std::exp(my - fit.exponent * mx);
    // A flat series is fit exactly by a zero slope.
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

// ---------------------------------------------------------------------------
// Studies

inline std::vector<std::uint64_t> seed_range(int count, std::uint64_t first = 1) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
    std::iota(s.begin(), s.end(), first);
    return s;
}

struct NoiseTableRow {
    std::string function_id;
    MeanStd clean;
    MeanStd noisy;
    double snr_db = std::numeric_limits<double>::quiet_NaN();
};

struct NoiseTableResult {
    std::vector<NoiseTableRow> rows;
    std::vector<ExperimentRecord> records;
};

/// Clean vs noisy-label test RMSE per function at a fixed noise standard deviation.
inline NoiseTableResult run_noise_table(const std::vector<const TargetFunction*>& functions, long n_train,
                                        double sigma_noise, const std::vector<std::uint64_t>& seeds,
                                        const StudyOptions& opt) {
    if (sigma_noise < 0.0) throw InvalidArgument("noise table: sigma must be >= 0");
    std::vector<RunSpec> specs;
    for (const auto* fn : functions)
        for (auto seed : seeds)
            for (bool noisy : {false, true}) {
                RunSpec s;
                s.study = "noise-table";
                s.arm = noisy ? "noisy" : "clean";
                s.fn = fn;
                s.shape = fn->default_shape;
                s.seed = seed;
                s.n_base = n_train;
                if (noisy) s.noise_sigma = sigma_noise;
                specs.push_back(s);
            }
    NoiseTableResult res;
    res.records = run_all(specs, opt);
    for (const auto* fn : functions) {
        NoiseTableRow row;
        row.function_id = std::string(fn->name);
        auto is = [&](const char* arm) {
            return [&, arm](const ExperimentRecord& r) { return r.function_id == row.function_id && r.arm == arm; };
        };
        row.clean = summarize(res.records, is("clean"));
        row.noisy = summarize(res.records, is("noisy"));
        std::vector<double> snrs;
        for (const auto& r : res.records)
            if (r.function_id == row.function_id && r.arm == "noisy" && r.realized_snr_db) snrs.push_back(*r.realized_snr_db);
        if (!snrs.empty()) row.snr_db = mean_std(snrs).mean;
        res.rows.push_back(row);
    }
    return res;
}

struct CrossoverPoint {
    double snr_db;
    MeanStd raw;
    MeanStd filtered;
};

struct CrossoverResult {
    std::vector<CrossoverPoint> points;
    // First grid SNR (ascending) at which raw labels give a lower mean RMSE than
    // filtered ones, provided filtering won at some lower SNR.
    std::optional<double> crossover_snr_db;
    // Linear interpolation of the sign change of log(raw) - log(filtered).
    std::optional<double> crossover_interp_db;
    std::vector<ExperimentRecord> records;
};

inline CrossoverResult run_filter_crossover(const TargetFunction& fn, std::vector<double> snr_grid, double filter_sigma,
                                            const std::vector<std::uint64_t>& seeds, long n_train,
                                            const StudyOptions& opt, std::vector<int> shape = {}) {
    if (snr_grid.empty()) throw InvalidArgument("crossover: empty SNR grid");
    std::sort(snr_grid.begin(), snr_grid.end());
    if (shape.empty()) shape = fn.default_shape;
    std::vector<RunSpec> specs;
    for (double snr : snr_grid)
        for (auto seed : seeds)
            for (bool filt : {false, true}) {
                RunSpec s;
                s.study = "crossover";
                s.arm = filt ? "filtered" : "raw";
                s.fn = &fn;
                s.shape = shape;
                s.seed = seed;
                s.n_base = n_train;
                s.snr_db = snr;
                if (filt) s.filter_sigma = filter_sigma;
                specs.push_back(s);
            }
    CrossoverResult res;
    res.records = run_all(specs, opt);
    for (double snr : snr_grid) {
        CrossoverPoint p{snr, {}, {}};
        p.raw = summarize(res.records, [&](const ExperimentRecord& r) { return r.arm == "raw" && r.snr_db == snr; });
        p.filtered = summarize(res.records, [&](const ExperimentRecord& r) { return r.arm == "filtered" && r.snr_db == snr; });
        res.points.push_back(p);
    }
    bool filter_won = false;
    for (std::size_t i = 0; i < res.points.size(); ++i) {
        const auto& p = res.points[i];
        if (p.filtered.mean < p.raw.mean) {
            filter_won = true;
        } else if (filter_won) {
            res.crossover_snr_db = p.snr_db;
            const auto& q = res.points[i - 1];
            const double a = std::log(q.raw.mean / q.filtered.mean);
            const double b = std::log(p.raw.mean / p.filtered.mean);
            res.crossover_interp_db = q.snr_db + (p.snr_db - q.snr_db) * a / (a - b);
            break;
        }
    }
    return res;
}

struct SigmaSweepResult {
    std::vector<double> sigma_grid;
    std::vector<double> snr_grid;
    // mean[snr_index][sigma_index]
    std::vector<std::vector<MeanStd>> cells;
    std::vector<MeanStd> unfiltered;  // per SNR
    // argmin of the seed-mean curve, per SNR
    std::vector<double> argmin_sigma;
    // mean over seeds of each seed's own argmin, per SNR
    std::vector<double> mean_seed_argmin_sigma;
    std::vector<ExperimentRecord> records;

    bool interior_argmin(std::size_t snr_index) const {
        const auto& row = cells[snr_index];
        std::size_t best = 0;
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i].mean < row[best].mean) best = i;
        return best > 0 && best + 1 < row.size();
    }

    /// Largest minus smallest seed-mean RMSE across the sigma grid.
    double spread(std::size_t snr_index) const {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& c : cells[snr_index]) {
            lo = std::min(lo, c.mean);
            hi = std::max(hi, c.mean);
        }
        return hi - lo;
    }
};

inline SigmaSweepResult run_sigma_sweep(const TargetFunction& fn, std::vector<double> sigma_grid, std::vector<double> snr_grid,
                                        long n_train, const std::vector<std::uint64_t>& seeds, const StudyOptions& opt,
                                        std::vector<int> shape = {}) {
    if (sigma_grid.empty() || snr_grid.empty()) throw InvalidArgument("sigma sweep: empty grid");
    std::sort(sigma_grid.begin(), sigma_grid.end());
    std::sort(snr_grid.begin(), snr_grid.end());
    if (shape.empty()) shape = fn.default_shape;
    std::vector<RunSpec> specs;
    for (double snr : snr_grid)
        for (auto seed : seeds) {
            RunSpec s;
            s.study = "sigma-sweep";
            s.arm = "unfiltered";
            s.fn = &fn;
            s.shape = shape;
            s.seed = seed;
            s.n_base = n_train;
            s.snr_db = snr;
            specs.push_back(s);
            s.arm = "filtered";
            for (double sg : sigma_grid) {
                s.filter_sigma = sg;
                specs.push_back(s);
            }
        }
    SigmaSweepResult res;
    res.sigma_grid = sigma_grid;
    res.snr_grid = snr_grid;
    res.records = run_all(specs, opt);
    for (double snr : snr_grid) {
        std::vector<MeanStd> row;
        for (double sg : sigma_grid)
            row.push_back(summarize(res.records, [&](const ExperimentRecord& r) {
                return r.arm == "filtered" && r.snr_db == snr && r.filter_sigma == sg;
            }));
        res.unfiltered.push_back(
            summarize(res.records, [&](const ExperimentRecord& r) { return r.arm == "unfiltered" && r.snr_db == snr; }));
        std::size_t best = 0;
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i].mean < row[best].mean) best = i;
        res.argmin_sigma.push_back(sigma_grid[best]);
        std::vector<double> seed_argmins;
        for (auto seed : seeds) {
            double best_rmse = std::numeric_limits<double>::infinity(), best_sigma = sigma_grid.front();
            for (const auto& r : res.records)
                if (r.arm == "filtered" && r.snr_db == snr && r.seed == seed && r.test_rmse < best_rmse) {
                    best_rmse = r.test_rmse;
                    best_sigma = *r.filter_sigma;
                }
            seed_argmins.push_back(best_sigma);
        }
        res.mean_seed_argmin_sigma.push_back(mean_std(seed_argmins).mean);
        res.cells.push_back(std::move(row));
    }
    return res;
}

struct OversamplingSeries {
    std::optional<double> snr_db;  // none = clean labels
    std::vector<double> r;
    std::vector<MeanStd> rmse;
    std::optional<PowerLawFit> fit;
};

struct OversamplingResult {
    std::vector<OversamplingSeries> series;
    std::vector<ExperimentRecord> records;
};

/// Test RMSE as the training set grows to r * n_base, per SNR (nullopt = clean).
/// Fits a power law on r >= r_min when enough points are available.
inline OversamplingResult run_oversampling(const TargetFunction& fn, std::vector<int> shape, long n_base,
                                           std::vector<double> r_grid, const std::vector<std::optional<double>>& snr_grid,
                                           const std::vector<std::uint64_t>& seeds, const StudyOptions& opt,
                                           OversampleMode mode = OversampleMode::fresh, double r_min = 5.0) {
    if (r_grid.empty()) throw InvalidArgument("oversampling: empty r grid");
    if (!std::is_sorted(r_grid.begin(), r_grid.end()) || r_grid.front() < 1.0)
        throw InvalidArgument("oversampling: r grid must be increasing and start at r >= 1");
    if (shape.empty()) shape = fn.default_shape;
    std::vector<RunSpec> specs;
    for (const auto& snr : snr_grid)
        for (double r : r_grid)
            for (auto seed : seeds) {
                RunSpec s;
                s.study = "oversample";
                s.arm = snr ? "noisy" : "clean";
                s.fn = &fn;
                s.shape = shape;
                s.seed = seed;
                s.n_base = n_base;
                s.r = r;
                s.snr_db = snr;
                s.mode = mode;
                specs.push_back(s);
            }
    OversamplingResult res;
    res.records = run_all(specs, opt);
    for (const auto& snr : snr_grid) {
        OversamplingSeries ser;
        ser.snr_db = snr;
        std::vector<std::pair<double, double>> pts;
        for (double r : r_grid) {
            const MeanStd m = summarize(res.records, [&](const ExperimentRecord& rec) {
                return rec.snr_db == snr && rec.oversample_factor == r;
            });
            ser.r.push_back(r);
            ser.rmse.push_back(m);
            pts.emplace_back(r, m.mean);
        }
        try {
            ser.fit = fit_power_law(pts, r_min);
        } catch (const InvalidArgument&) {
        }
        res.series.push_back(std::move(ser));
    }
    return res;
}

struct CombinedArm {
    std::string name;
    double r;
    bool noisy;
    bool filtered;
};

struct CombinedRow {
    std::string function_id;
    double snr_db;
    std::vector<MeanStd> arms;
};

struct CombinedResult {
    std::vector<CombinedArm> arms;
    std::vector<CombinedRow> rows;
    std::vector<ExperimentRecord> records;
};

/// Arms: clean baseline, noisy, filter-only, then r-times oversampled with and
/// without the filter for every r > 1 in `r_values`.
inline std::vector<CombinedArm> combined_arms(const std::vector<double>& r_values) {
    std::vector<CombinedArm> arms{{"original", 1.0, false, false}, {"noisy", 1.0, true, false}, {"filtered", 1.0, true, true}};
    for (double r : r_values) {
        if (r <= 1.0) continue;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%gx", r);
        arms.push_back({std::string(buf), r, true, false});
        arms.push_back({std::string(buf) + "+filter", r, true, true});
    }
    return arms;
}

inline CombinedResult run_combined_study(const std::vector<std::pair<const TargetFunction*, double>>& fn_snr,
                                         const std::vector<double>& r_values, double filter_sigma, long n_base,
                                         const std::vector<std::uint64_t>& seeds, const StudyOptions& opt) {
    CombinedResult res;
    res.arms = combined_arms(r_values);
    std::vector<RunSpec> specs;
    for (const auto& [fn, snr] : fn_snr)
        for (const auto& arm : res.arms)
            for (auto seed : seeds) {
                RunSpec s;
                s.study = "combined";
                s.arm = arm.name;
                s.fn = fn;
                s.shape = fn->default_shape;
                s.seed = seed;
                s.n_base = n_base;
                s.r = arm.r;
                if (arm.noisy) s.snr_db = snr;
                if (arm.filtered) s.filter_sigma = filter_sigma;
                specs.push_back(s);
            }
    res.records = run_all(specs, opt);
    for (const auto& [fn, snr] : fn_snr) {
        CombinedRow row{std::string(fn->name), snr, {}};
        for (const auto& arm : res.arms)
            row.arms.push_back(summarize(res.records, [&](const ExperimentRecord& r) {
                return r.function_id == row.function_id && r.arm == arm.name;
            }));
        res.rows.push_back(std::move(row));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Band-limited reconstruction demonstrator

struct SincDemoPoint {
    double spacing;
    std::size_t samples;
    MeanStd rmse;
};

/// Reconstructs s(t) = sin(2 pi t) + 0.5 cos(pi t) (band limit 1 Hz) from noisy samples
/// on [-window, window] with Omega = `bandwidth`, and reports the RMSE on the central
/// half of the window for each spacing T, over `draws` noise realizations.
inline std::vector<SincDemoPoint> run_sinc_demo(const std::vector<double>& spacings, double noise_sigma, int draws,
                                                std::uint64_t seed, double bandwidth = 1.25, double window = 20.0,
                                                int eval_points = 201) {
    auto signal = [](double t) { return std::sin(2.0 * std::numbers::pi * t) + 0.5 * std::cos(std::numbers::pi * t); };
    std::vector<SincDemoPoint> out;
    for (double T : spacings) {
        const double step = T / (2.0 * bandwidth);
        const long kmax = static_cast<long>(std::floor(window / step));
        std::vector<double> errs;
        std::size_t count = 0;
        for (int d = 0; d < draws; ++d) {
            std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(d), 0));
            std::normal_distribution<double> normal(0.0, noise_sigma);
            std::vector<Sample> samples;
            for (long k = -kmax; k <= kmax; ++k) {
                const double t = static_cast<double>(k) * step;
                samples.push_back({t, signal(t) + normal(rng)});
            }
            count = samples.size();
            double sse = 0.0;
            for (int i = 0; i < eval_points; ++i) {
                const double t = -window / 2.0 + window * static_cast<double>(i) / (eval_points - 1);
                const double e = sinc_reconstruct(samples, bandwidth, T, t) - signal(t);
                sse += e * e;
            }
            errs.push_back(std::sqrt(sse / eval_points));
        }
        out.push_back({T, count, mean_std(errs)});
    }
    return out;
}

}  // namespace kanoise
