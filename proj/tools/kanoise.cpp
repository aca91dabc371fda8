// kanoise command-line driver: single fits, label filtering and the noise studies.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "kanoise/data.hpp"
#include "kanoise/denoise.hpp"
#include "kanoise/experiments.hpp"
#include "kanoise/kan.hpp"
#include "kanoise/report.hpp"
#include "kanoise/training.hpp"

namespace fs = std::filesystem;
using namespace kanoise;

namespace {

constexpr const char* kVersion = "1.0.0";

// Thrown while turning flags into a runnable job; maps to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string out_dir = "kanoise-out";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

struct Profile {
    StudyOptions opt = StudyOptions::standard();
    std::string optimizer = "adam";
};

void progress(const ExperimentRecord& r) {
    std::fprintf(stderr, "  %s %s %s seed=%llu n=%ld snr=%s filter=%s rmse=%.4g (%.1fs)\n", r.study.c_str(), r.function_id.c_str(),
                 r.arm.c_str(), static_cast<unsigned long long>(r.seed), r.n_train, fmt(r.snr_db).c_str(),
                 fmt(r.filter_sigma).c_str(), r.test_rmse, r.wall_time_s);
}

void add_profile(CLI::App* sub, Profile& p) {
    auto& o = p.opt;
    sub->add_option("--steps", o.train.steps, "Main optimizer steps")->capture_default_str();
    sub->add_option("--lr", o.train.learning_rate, "Learning rate (initial step scale for lbfgs)")->capture_default_str();
    sub->add_option("--optimizer", p.optimizer, "adam | gd | lbfgs")->capture_default_str();
    sub->add_option("--polish-steps", o.train.polish_steps, "L-BFGS iterations after the main optimizer")->capture_default_str();
    sub->add_option("--candidates", o.train.init_candidates, "Screened initializations per fit")->capture_default_str();
    sub->add_option("--screen-steps", o.train.screen_steps, "Steps per screened initialization")->capture_default_str();
    sub->add_option("--n-test", o.n_test, "Clean held-out points")->capture_default_str();
    sub->add_option("--grid", o.grid_count, "Spline intervals per edge")->capture_default_str();
    sub->add_option("--order", o.order, "Spline order")->capture_default_str();
    sub->add_option("--cutoff", o.filter_cutoff, "Kernel weight cutoff")->capture_default_str();
}

void resolve_profile(Profile& p, unsigned threads) {
    p.opt.train.optimizer = parse_optimizer(p.optimizer);
    p.opt.train.validate();
    p.opt.threads = threads;
    p.opt.progress = progress;
    if (p.opt.n_test < 1) throw UsageError("--n-test must be >= 1");
    KernelFilterConfig{0.1, p.opt.filter_cutoff}.validate();
}

std::vector<std::uint64_t> seeds_from(int count, std::uint64_t first) {
    if (count < 1) throw UsageError("--seeds must be >= 1");
    return seed_range(count, first);
}

std::vector<int> shape_for(const TargetFunction& fn, const std::string& text) {
    if (text.empty()) return fn.default_shape;
    auto w = parse_widths(text);
    if (w.front() != fn.arity)
        throw UsageError("shape " + text + " does not take " + std::to_string(fn.arity) + " inputs for " + std::string(fn.name));
    if (w.back() != 1) throw UsageError("shape must end in a single output");
    return w;
}

std::vector<const TargetFunction*> functions_from(const std::vector<std::string>& names) {
    std::vector<const TargetFunction*> out;
    for (const auto& n : names) out.push_back(&target(n));
    if (out.empty()) throw UsageError("no functions given");
    return out;
}

/// "clean" (or "none") means noiseless labels.
std::vector<std::optional<double>> snr_list(const std::vector<std::string>& items) {
    std::vector<std::optional<double>> out;
    for (const auto& s : items) {
        if (s == "clean" || s == "none") {
            out.emplace_back();
            continue;
        }
        try {
            std::size_t used = 0;
            out.emplace_back(std::stod(s, &used));
            if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::logic_error&) {
            throw UsageError("bad SNR value '" + s + "'");
        }
    }
    return out;
}

/// Collects written artifacts and the resolved configuration for manifest.json.
class Run {
public:
    Run(const CLI::App& sub, const Common& common) : dir_(common.out_dir) {
        manifest_["tool"] = "kanoise";
        manifest_["version"] = kVersion;
        manifest_["command"] = sub.get_name();
        manifest_["record_schema_version"] = kRecordSchemaVersion;
        nlohmann::ordered_json cfg;
        std::string line = "kanoise " + sub.get_name();
        for (const CLI::Option* opt : sub.get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string name = opt->get_lnames().front();
            if (name == "help") continue;
            std::string value;
            if (opt->count() > 0) {
                const auto& res = opt->results();
                for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
            } else {
                value = opt->get_default_str();
            }
            cfg[name] = value;
            if (!value.empty()) line += " --" + name + " " + value;
        }
        manifest_["config"] = cfg;
        manifest_["command_line"] = line;
        manifest_["threads"] = common.threads;
        manifest_["output_dir"] = dir_.string();
        fs::create_directories(dir_);
    }

    std::string path(const std::string& file) const { return (dir_ / file).string(); }

    void csv(const std::string& file, const CsvTable& table, bool deterministic = true) {
        table.write(path(file));
        files_.push_back({{"file", file}, {"kind", "csv"}, {"columns", table.header}, {"deterministic", deterministic}});
    }

    void svg(const std::string& file, const LineChart& chart) {
        chart.write(path(file));
        files_.push_back({{"file", file}, {"kind", "svg"}});
    }

    void other(const std::string& file, const std::string& kind) { files_.push_back({{"file", file}, {"kind", kind}}); }

    void records(const std::vector<ExperimentRecord>& recs) {
        csv("records.csv", records_table(recs));
        csv("aggregate.csv", aggregate_table(recs));
        csv("timings.csv", timings_table(recs), false);
    }

    void finish(nlohmann::ordered_json summary = {}) {
        manifest_["files"] = files_;
        if (!summary.is_null()) manifest_["summary"] = summary;
        std::ofstream out(path("manifest.json"), std::ios::binary);
        if (!out) throw Error("cannot write manifest to " + dir_.string());
        out << manifest_.dump(2) << '\n';
        std::cout << "wrote " << files_.size() + 1 << " files to " << dir_.string() << '\n';
    }

private:
    fs::path dir_;
    nlohmann::ordered_json manifest_;
    nlohmann::ordered_json files_ = nlohmann::ordered_json::array();
};
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KAN regression under label noise: fits, kernel filtering and noise studies"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "INI/TOML file with option values (one [section] per subcommand)");
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--out", common.out_dir, "Output directory")->envname("KANOISE_OUTPUT_DIR")->capture_default_str()->take_last();
    app.add_option("--threads", common.threads, "Worker threads")->capture_default_str()->take_last();

    std::function<std::function<void()>()> resolve;

    // fit ------------------------------------------------------------------
    struct {
        std::string fn = "f2", shape, optimizer = "adam", train_csv;
        long n = 3000, n_test = 1000;
        std::uint64_t seed = 1;
        double noise_sigma = 0.0;
        std::optional<double> snr, filter_sigma;
        double cutoff = 1e-12;
        TrainConfig cfg;
        int grid = 5, order = 3;
    } fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Train one network and write its learning curve and checkpoint");
    fit_cmd->add_option("--fn", fit_args.fn, "Target function f1..f6")->capture_default_str();
    fit_cmd->add_option("--shape", fit_args.shape, "Layer widths, e.g. 2,5,1 (default: the function's shape)");
    fit_cmd->add_option("--n", fit_args.n, "Training points")->capture_default_str();
    fit_cmd->add_option("--n-test", fit_args.n_test, "Clean held-out points")->capture_default_str();
    fit_cmd->add_option("--seed", fit_args.seed, "Record seed (data, noise, test set, init)")->capture_default_str();
    fit_cmd->add_option("--noise-sigma", fit_args.noise_sigma, "Label noise standard deviation")->capture_default_str();
    fit_cmd->add_option("--snr", fit_args.snr, "Label noise given as a target SNR in dB");
    fit_cmd->add_option("--filter-sigma", fit_args.filter_sigma, "Kernel-filter the labels with this bandwidth");
    fit_cmd->add_option("--cutoff", fit_args.cutoff, "Kernel weight cutoff")->capture_default_str();
    fit_cmd->add_option("--train-csv", fit_args.train_csv, "Read the training set from a dataset CSV instead");
    fit_cmd->add_option("--steps", fit_args.cfg.steps, "Main optimizer steps")->capture_default_str();
    fit_cmd->add_option("--lr", fit_args.cfg.learning_rate, "Learning rate")->capture_default_str();
    fit_cmd->add_option("--optimizer", fit_args.optimizer, "adam | gd | lbfgs")->capture_default_str();
    fit_cmd->add_option("--polish-steps", fit_args.cfg.polish_steps, "L-BFGS iterations afterwards")->capture_default_str();
    fit_cmd->add_option("--candidates", fit_args.cfg.init_candidates, "Screened initializations")->capture_default_str();
    fit_cmd->add_option("--screen-steps", fit_args.cfg.screen_steps, "Steps per screened initialization")->capture_default_str();
    fit_cmd->add_option("--log-every", fit_args.cfg.log_every, "Learning-curve logging interval")->capture_default_str();
    fit_cmd->add_option("--grid", fit_args.grid, "Spline intervals per edge")->capture_default_str();
    fit_cmd->add_option("--order", fit_args.order, "Spline order")->capture_default_str();
    fit_cmd->get_option("--snr")->excludes("--noise-sigma");
    fit_cmd->get_option("--train-csv")->excludes("--snr")->excludes("--noise-sigma");

    // filter ---------------------------------------------------------------
    struct {
        std::string fn = "f2", input;
        long n = 3000;
        std::uint64_t seed = 1;
        double noise_sigma = 0.0;
        std::optional<double> snr;
        double sigma = 0.1, cutoff = 1e-12;
    } filter_args;
    auto* filter_cmd = app.add_subcommand("filter", "Kernel-filter the labels of a dataset");
    filter_cmd->add_option("--input", filter_args.input, "Dataset CSV to filter (otherwise one is generated)");
    filter_cmd->add_option("--fn", filter_args.fn, "Target function for a generated dataset")->capture_default_str();
    filter_cmd->add_option("--n", filter_args.n, "Points in a generated dataset")->capture_default_str();
    filter_cmd->add_option("--seed", filter_args.seed, "Record seed of a generated dataset")->capture_default_str();
    filter_cmd->add_option("--noise-sigma", filter_args.noise_sigma, "Label noise standard deviation")->capture_default_str();
    filter_cmd->add_option("--snr", filter_args.snr, "Label noise as a target SNR in dB")->excludes("--noise-sigma");
    filter_cmd->add_option("--sigma", filter_args.sigma, "Kernel bandwidth")->capture_default_str();
    filter_cmd->add_option("--cutoff", filter_args.cutoff, "Kernel weight cutoff")->capture_default_str();

    // noise-table ----------------------------------------------------------
    struct {
        std::vector<std::string> functions{"f1", "f2", "f3"};
        long n = 3000;
        double sigma = 0.2;
        int seeds = 5;
        std::uint64_t seed = 1;
        Profile profile;
    } nt_args;
    auto* nt_cmd = app.add_subcommand("noise-table", "Clean vs noisy-label test RMSE per function");
    nt_cmd->add_option("--functions", nt_args.functions, "Functions")->delimiter(',')->capture_default_str();
    nt_cmd->add_option("--n", nt_args.n, "Training points")->capture_default_str();
    nt_cmd->add_option("--sigma", nt_args.sigma, "Label noise standard deviation")->capture_default_str();
    nt_cmd->add_option("--seeds", nt_args.seeds, "Number of seeds")->capture_default_str();
    nt_cmd->add_option("--seed", nt_args.seed, "First seed")->capture_default_str();
    add_profile(nt_cmd, nt_args.profile);

    // crossover ------------------------------------------------------------
    struct {
        std::string fn = "f2", shape;
        std::vector<double> snr_grid{-10, -6, -4, -2, 0, 2, 4, 6, 10, 15};
        double sigma = 0.1;
        long n = 3000;
        int seeds = 5;
        std::uint64_t seed = 1;
        Profile profile;
    } cx_args;
    auto* cx_cmd = app.add_subcommand("crossover", "Raw vs kernel-filtered labels over an SNR grid");
    cx_cmd->add_option("--fn", cx_args.fn, "Target function")->capture_default_str();
    cx_cmd->add_option("--shape", cx_args.shape, "Layer widths (default: the function's shape)");
    cx_cmd->add_option("--snr-grid", cx_args.snr_grid, "SNR grid in dB")->delimiter(',')->capture_default_str();
    cx_cmd->add_option("--sigma", cx_args.sigma, "Kernel bandwidth")->capture_default_str();
    cx_cmd->add_option("--n", cx_args.n, "Training points")->capture_default_str();
    cx_cmd->add_option("--seeds", cx_args.seeds, "Number of seeds")->capture_default_str();
    cx_cmd->add_option("--seed", cx_args.seed, "First seed")->capture_default_str();
    add_profile(cx_cmd, cx_args.profile);

    // sigma-sweep ----------------------------------------------------------
    struct {
        std::string fn = "f4", shape;
        std::vector<double> sigma_grid{0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
        std::vector<double> snr_grid{-5, 0, 15};
        long n = 500;
        int seeds = 5;
        std::uint64_t seed = 1;
        Profile profile;
    } sw_args;
    auto* sw_cmd = app.add_subcommand("sigma-sweep", "Test RMSE over a grid of kernel bandwidths and SNRs");
    sw_cmd->add_option("--fn", sw_args.fn, "Target function")->capture_default_str();
    sw_cmd->add_option("--shape", sw_args.shape, "Layer widths (default: the function's shape)");
    sw_cmd->add_option("--sigma-grid", sw_args.sigma_grid, "Kernel bandwidths")->delimiter(',')->capture_default_str();
    sw_cmd->add_option("--snr-grid", sw_args.snr_grid, "SNR grid in dB")->delimiter(',')->capture_default_str();
    sw_cmd->add_option("--n", sw_args.n, "Training points")->capture_default_str();
    sw_cmd->add_option("--seeds", sw_args.seeds, "Number of seeds")->capture_default_str();
    sw_cmd->add_option("--seed", sw_args.seed, "First seed")->capture_default_str();
    add_profile(sw_cmd, sw_args.profile);

    // oversample -----------------------------------------------------------
    struct {
        std::string fn = "f2", shape, mode = "fresh";
        long n_base = 3000;
        std::vector<double> r_grid{1, 5, 10, 15, 20, 25};
        std::vector<std::string> snr_grid{"5"};
        double r_min = 5.0;
        int seeds = 5;
        std::uint64_t seed = 1;
        Profile profile;
    } os_args;
    auto* os_cmd = app.add_subcommand("oversample", "Test RMSE against training-set multiple r, with a power-law fit");
    os_cmd->add_option("--fn", os_args.fn, "Target function")->capture_default_str();
    os_cmd->add_option("--shape", os_args.shape, "Layer widths (default: the function's shape)");
    os_cmd->add_option("--n-base", os_args.n_base, "Training points at r = 1")->capture_default_str();
    os_cmd->add_option("--r-grid", os_args.r_grid, "Oversampling factors, increasing, starting at 1")->delimiter(',')->capture_default_str();
    os_cmd->add_option("--snr-grid", os_args.snr_grid, "SNRs in dB; 'clean' for noiseless labels")->delimiter(',')->capture_default_str();
    os_cmd->add_option("--r-min", os_args.r_min, "Start of the power-law tail")->capture_default_str();
    os_cmd->add_option("--mode", os_args.mode, "fresh | duplicate")->capture_default_str();
    os_cmd->add_option("--seeds", os_args.seeds, "Number of seeds")->capture_default_str();
    os_cmd->add_option("--seed", os_args.seed, "First seed")->capture_default_str();
    add_profile(os_cmd, os_args.profile);

    // combined -------------------------------------------------------------
    struct {
        std::vector<std::string> functions{"f1", "f2", "f3"};
        std::vector<double> snrs{7.38, 4.46, 10.53};
        std::vector<double> r_values{25, 50};
        double sigma = 0.1;
        long n_base = 3000;
        int seeds = 5;
        std::uint64_t seed = 1;
        Profile profile;
    } cb_args;
    auto* cb_cmd = app.add_subcommand("combined", "Noisy, filtered and oversampled arms side by side");
    cb_cmd->add_option("--functions", cb_args.functions, "Functions")->delimiter(',')->capture_default_str();
    cb_cmd->add_option("--snrs", cb_args.snrs, "SNR in dB per function")->delimiter(',')->capture_default_str();
    cb_cmd->add_option("--r-values", cb_args.r_values, "Oversampling factors > 1")->delimiter(',')->capture_default_str();
    cb_cmd->add_option("--sigma", cb_args.sigma, "Kernel bandwidth")->capture_default_str();
    cb_cmd->add_option("--n-base", cb_args.n_base, "Training points at r = 1")->capture_default_str();
    cb_cmd->add_option("--seeds", cb_args.seeds, "Number of seeds")->capture_default_str();
    cb_cmd->add_option("--seed", cb_args.seed, "First seed")->capture_default_str();
    add_profile(cb_cmd, cb_args.profile);

    // sinc-demo ------------------------------------------------------------
    struct {
        std::vector<double> spacings{1.0, 0.5, 0.25};
        double noise_sigma = 0.1, bandwidth = 1.25;
        int draws = 20;
        std::uint64_t seed = 1;
    } sd_args;
    auto* sd_cmd = app.add_subcommand("sinc-demo", "Noise averaging of oversampled sinc reconstruction");
    sd_cmd->add_option("--spacings", sd_args.spacings, "Spacing factors T in (0, 1]")->delimiter(',')->capture_default_str();
    sd_cmd->add_option("--noise-sigma", sd_args.noise_sigma, "Sample noise standard deviation")->capture_default_str();
    sd_cmd->add_option("--bandwidth", sd_args.bandwidth, "Band limit used for reconstruction")->capture_default_str();
    sd_cmd->add_option("--draws", sd_args.draws, "Noise realizations")->capture_default_str();
    sd_cmd->add_option("--seed", sd_args.seed, "Seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (common.threads < 1) common.threads = 1;

    std::function<void()> job;
    try {
        if (fit_cmd->parsed()) {
            auto a = fit_args;
            const TargetFunction& fn = target(a.fn);
            const auto shape = shape_for(fn, a.shape);
            a.cfg.optimizer = parse_optimizer(a.optimizer);
            a.cfg.validate();
            if (a.n < 1 || a.n_test < 1) throw UsageError("--n and --n-test must be >= 1");
            if (a.noise_sigma < 0) throw UsageError("--noise-sigma must be >= 0");
            if (a.filter_sigma) KernelFilterConfig{*a.filter_sigma, a.cutoff}.validate();
            job = [a, &fn, shape, &common, fit_cmd] {
                Run run(*fit_cmd, common);
                LabeledDataset train_set;
                if (!a.train_csv.empty()) {
                    train_set = read_dataset_csv(a.train_csv);
                } else {
                    RunSpec spec;
                    spec.fn = &fn;
                    spec.seed = a.seed;
                    spec.n_base = a.n;
                    spec.snr_db = a.snr;
                    if (!a.snr && a.noise_sigma > 0) spec.noise_sigma = a.noise_sigma;
                    train_set = training_data(spec);
                }
                if (a.filter_sigma) train_set = kernel_filter(train_set, {*a.filter_sigma, a.cutoff}, common.threads);
                const LabeledDataset test_set = test_data(fn, a.seed, a.n_test);
                KanSpec kspec{shape, a.grid, a.order};
                TrainConfig cfg = a.cfg;
                cfg.seed = init_seed(fn, a.seed);
                const auto [net, report] = fit(kspec, train_set, test_set, cfg);
                {
                    std::ofstream out(run.path("train_curve.csv"), std::ios::binary);
                    write_report_csv(report, out);
                }
                run.other("train_curve.csv", "csv");
                save_checkpoint(net, run.path("checkpoint.txt"));
                run.other("checkpoint.txt", "checkpoint");
                CsvTable summary;
                summary.header = {"function", "shape", "n_train", "seed", "noise_sigma", "filter_sigma", "final_train_rmse",
                                  "test_rmse", "out_of_range_fraction"};
                summary.add({std::string(fn.name), format_widths(shape, '-'), std::to_string(train_set.size()),
                             std::to_string(a.seed), fmt(train_set.noise_sigma), fmt(a.filter_sigma),
                             fmt(report.train_rmse_curve.back()), fmt(report.final_test_rmse),
                             fmt(report.out_of_range_fraction)});
                run.csv("summary.csv", summary);
                std::printf("%s %s test_rmse=%.6g\n", std::string(fn.name).c_str(), format_widths(shape).c_str(),
                            report.final_test_rmse);
                run.finish({{"test_rmse", report.final_test_rmse}});
            };
        } else if (filter_cmd->parsed()) {
            auto a = filter_args;
            const KernelFilterConfig kcfg{a.sigma, a.cutoff};
            kcfg.validate();
            const TargetFunction* fn = a.input.empty() ? &target(a.fn) : nullptr;
            if (a.n < 1) throw UsageError("--n must be >= 1");
            if (a.noise_sigma < 0) throw UsageError("--noise-sigma must be >= 0");
            job = [a, kcfg, fn, &common, filter_cmd] {
                Run run(*filter_cmd, common);
                LabeledDataset ds;
                if (fn) {
                    RunSpec spec;
                    spec.fn = fn;
                    spec.seed = a.seed;
                    spec.n_base = a.n;
                    spec.snr_db = a.snr;
                    if (!a.snr && a.noise_sigma > 0) spec.noise_sigma = a.noise_sigma;
                    ds = training_data(spec);
                } else {
                    ds = read_dataset_csv(a.input);
                }
                write_dataset_csv(ds, run.path("input.csv"));
                run.other("input.csv", "dataset");
                const LabeledDataset out = kernel_filter(ds, kcfg, common.threads);
                write_dataset_csv(out, run.path("filtered.csv"));
                run.other("filtered.csv", "dataset");
                CsvTable summary;
                summary.header = {"n", "sigma", "cutoff", "label_rmse_before", "label_rmse_after"};
                const double before = rmse(ds.labels, ds.clean_labels), after = rmse(out.labels, out.clean_labels);
                summary.add({std::to_string(ds.size()), fmt(a.sigma), fmt(a.cutoff), fmt(before), fmt(after)});
                run.csv("summary.csv", summary);
                std::printf("label rmse vs clean: %.6g -> %.6g\n", before, after);
                run.finish();
            };
        } else if (nt_cmd->parsed()) {
            auto a = nt_args;
            resolve_profile(a.profile, common.threads);
            const auto fns = functions_from(a.functions);
            const auto seeds = seeds_from(a.seeds, a.seed);
            if (a.sigma < 0) throw UsageError("--sigma must be >= 0");
            job = [a, fns, seeds, &common, nt_cmd] {
                Run run(*nt_cmd, common);
                const auto res = run_noise_table(fns, a.n, a.sigma, seeds, a.profile.opt);
                CsvTable t;
                t.header = {"function", "clean_rmse", "noisy_rmse", "noisy_over_clean", "snr_db"};
                for (const auto& row : res.rows)
                    t.add({row.function_id, fmt(row.clean.mean), fmt(row.noisy.mean), fmt(row.noisy.mean / row.clean.mean),
                           fmt(row.snr_db)});
                run.csv("noise_table.csv", t);
                t.write(std::cout);
                run.records(res.records);
                run.finish();
            };
        } else if (cx_cmd->parsed()) {
            auto a = cx_args;
            resolve_profile(a.profile, common.threads);
            const TargetFunction& fn = target(a.fn);
            const auto shape = shape_for(fn, a.shape);
            const auto seeds = seeds_from(a.seeds, a.seed);
            KernelFilterConfig{a.sigma, a.profile.opt.filter_cutoff}.validate();
            if (a.snr_grid.empty()) throw UsageError("--snr-grid is empty");
            job = [a, &fn, shape, seeds, &common, cx_cmd] {
                Run run(*cx_cmd, common);
                const auto res = run_filter_crossover(fn, a.snr_grid, a.sigma, seeds, a.n, a.profile.opt, shape);
                CsvTable t;
                t.header = {"snr_db", "raw_mean", "raw_std", "filtered_mean", "filtered_std", "count"};
                LineChart chart{"Filtering crossover, " + std::string(fn.name), "SNR (dB)", "test RMSE", false, true, {}};
                ChartSeries raw{"raw", {}, {}}, filt{"filtered", {}, {}};
                for (const auto& p : res.points) {
                    t.add({fmt(p.snr_db), fmt(p.raw.mean), fmt(p.raw.std), fmt(p.filtered.mean), fmt(p.filtered.std),
                           std::to_string(p.raw.count)});
                    raw.x.push_back(p.snr_db);
                    raw.y.push_back(p.raw.mean);
                    filt.x.push_back(p.snr_db);
                    filt.y.push_back(p.filtered.mean);
                }
                chart.series = {raw, filt};
                run.csv("crossover.csv", t);
                CsvTable s;
                s.header = {"function", "filter_sigma", "crossover_snr_db", "crossover_interp_db"};
                s.add({std::string(fn.name), fmt(a.sigma), fmt(res.crossover_snr_db), fmt(res.crossover_interp_db)});
                run.csv("crossover_summary.csv", s);
                run.svg("crossover.svg", chart);
                t.write(std::cout);
                s.write(std::cout);
                run.records(res.records);
                run.finish();
            };
        } else if (sw_cmd->parsed()) {
            auto a = sw_args;
            resolve_profile(a.profile, common.threads);
            const TargetFunction& fn = target(a.fn);
            const auto shape = shape_for(fn, a.shape);
            const auto seeds = seeds_from(a.seeds, a.seed);
            if (a.sigma_grid.empty() || a.snr_grid.empty()) throw UsageError("empty grid");
            for (double s : a.sigma_grid) KernelFilterConfig{s, a.profile.opt.filter_cutoff}.validate();
            job = [a, &fn, shape, seeds, &common, sw_cmd] {
                Run run(*sw_cmd, common);
                const auto res = run_sigma_sweep(fn, a.sigma_grid, a.snr_grid, a.n, seeds, a.profile.opt, shape);
                CsvTable cells;
                cells.header = {"snr_db", "filter_sigma", "mean_test_rmse", "std_test_rmse", "count"};
                CsvTable best;
                best.header = {"snr_db", "argmin_sigma", "mean_seed_argmin_sigma", "interior_argmin", "spread",
                               "unfiltered_mean", "unfiltered_std"};
                LineChart chart{"Bandwidth sweep, " + std::string(fn.name) + ", n=" + std::to_string(a.n), "filter sigma",
                                "test RMSE", false, true, {}};
                for (std::size_t i = 0; i < res.snr_grid.size(); ++i) {
                    ChartSeries ser{fmt(res.snr_grid[i]) + " dB", res.sigma_grid, {}};
                    for (std::size_t j = 0; j < res.sigma_grid.size(); ++j) {
                        const auto& c = res.cells[i][j];
                        cells.add({fmt(res.snr_grid[i]), fmt(res.sigma_grid[j]), fmt(c.mean), fmt(c.std), std::to_string(c.count)});
                        ser.y.push_back(c.mean);
                    }
                    best.add({fmt(res.snr_grid[i]), fmt(res.argmin_sigma[i]), fmt(res.mean_seed_argmin_sigma[i]),
                              res.interior_argmin(i) ? "1" : "0", fmt(res.spread(i)), fmt(res.unfiltered[i].mean),
                              fmt(res.unfiltered[i].std)});
                    chart.series.push_back(std::move(ser));
                }
                run.csv("sigma_sweep.csv", cells);
                run.csv("sigma_sweep_argmin.csv", best);
                run.svg("sigma_sweep.svg", chart);
                best.write(std::cout);
                run.records(res.records);
                run.finish();
            };
        } else if (os_cmd->parsed()) {
            auto a = os_args;
            resolve_profile(a.profile, common.threads);
            const TargetFunction& fn = target(a.fn);
            const auto shape = shape_for(fn, a.shape);
            const auto seeds = seeds_from(a.seeds, a.seed);
            const auto snrs = snr_list(a.snr_grid);
            const auto mode = parse_oversample_mode(a.mode);
            if (a.n_base < 1) throw UsageError("--n-base must be >= 1");
            if (a.r_grid.empty() || !std::is_sorted(a.r_grid.begin(), a.r_grid.end()) || a.r_grid.front() != 1.0)
                throw UsageError("--r-grid must be increasing and start at 1");
            job = [a, &fn, shape, seeds, snrs, mode, &common, os_cmd] {
                Run run(*os_cmd, common);
                const auto res = run_oversampling(fn, shape, a.n_base, a.r_grid, snrs, seeds, a.profile.opt, mode, a.r_min);
                CsvTable t;
                t.header = {"snr_db", "r", "n_train", "mean_test_rmse", "std_test_rmse", "count"};
                CsvTable fits;
                fits.header = {"snr_db", "r_min", "exponent", "amplitude", "r2", "points"};
                LineChart chart{"Oversampling, " + std::string(fn.name) + " [" + format_widths(shape) + "]",
                                "r", "test RMSE", true, true, {}};
                for (const auto& ser : res.series) {
                    ChartSeries cs{ser.snr_db ? fmt(*ser.snr_db) + " dB" : "clean", ser.r, {}};
                    for (std::size_t i = 0; i < ser.r.size(); ++i) {
                        t.add({fmt(ser.snr_db), fmt(ser.r[i]), std::to_string(std::llround(ser.r[i] * a.n_base)),
                               fmt(ser.rmse[i].mean), fmt(ser.rmse[i].std), std::to_string(ser.rmse[i].count)});
                        cs.y.push_back(ser.rmse[i].mean);
                    }
                    if (ser.fit)
                        fits.add({fmt(ser.snr_db), fmt(a.r_min), fmt(ser.fit->exponent), fmt(ser.fit->amplitude), fmt(ser.fit->r2),
                                  std::to_string(ser.fit->points)});
                    chart.series.push_back(std::move(cs));
                }
                run.csv("oversample.csv", t);
                run.csv("power_law.csv", fits);
                run.svg("oversample.svg", chart);
                t.write(std::cout);
                fits.write(std::cout);
                run.records(res.records);
                run.finish();
            };
        } else if (cb_cmd->parsed()) {
            auto a = cb_args;
            resolve_profile(a.profile, common.threads);
            const auto fns = functions_from(a.functions);
            if (a.snrs.size() != fns.size()) throw UsageError("--snrs needs one value per function");
            const auto seeds = seeds_from(a.seeds, a.seed);
            KernelFilterConfig{a.sigma, a.profile.opt.filter_cutoff}.validate();
            std::vector<std::pair<const TargetFunction*, double>> fn_snr;
            for (std::size_t i = 0; i < fns.size(); ++i) fn_snr.emplace_back(fns[i], a.snrs[i]);
            job = [a, fn_snr, seeds, &common, cb_cmd] {
                Run run(*cb_cmd, common);
                const auto res = run_combined_study(fn_snr, a.r_values, a.sigma, a.n_base, seeds, a.profile.opt);
                CsvTable t, sd;
                t.header = sd.header = {"function", "snr_db"};
                for (const auto& arm : res.arms) {
                    t.header.push_back(arm.name);
                    sd.header.push_back(arm.name);
                }
                for (const auto& row : res.rows) {
                    std::vector<std::string> m{row.function_id, fmt(row.snr_db)}, s{row.function_id, fmt(row.snr_db)};
                    for (const auto& c : row.arms) {
                        m.push_back(fmt(c.mean));
                        s.push_back(fmt(c.std));
                    }
                    t.add(m);
                    sd.add(s);
                }
                run.csv("combined.csv", t);
                run.csv("combined_std.csv", sd);
                t.write(std::cout);
                run.records(res.records);
                run.finish();
            };
        } else if (sd_cmd->parsed()) {
            auto a = sd_args;
            for (double T : a.spacings)
                if (!(T > 0 && T <= 1)) throw UsageError("spacings must lie in (0, 1]");
            if (a.draws < 1) throw UsageError("--draws must be >= 1");
            if (!(a.bandwidth >= 1.0)) throw UsageError("--bandwidth must be >= 1 (the demo signal is band-limited to 1)");
            job = [a, &common, sd_cmd] {
                Run run(*sd_cmd, common);
                const auto pts = run_sinc_demo(a.spacings, a.noise_sigma, a.draws, a.seed, a.bandwidth);
                CsvTable t;
                t.header = {"spacing", "samples", "mean_rmse", "std_rmse", "draws"};
                for (const auto& p : pts)
                    t.add({fmt(p.spacing), std::to_string(p.samples), fmt(p.rmse.mean), fmt(p.rmse.std), std::to_string(p.rmse.count)});
                run.csv("sinc_demo.csv", t);
                t.write(std::cout);
                run.finish();
            };
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kanoise: %s\n", e.what());
        return 2;
    }

    try {
        job();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kanoise: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
