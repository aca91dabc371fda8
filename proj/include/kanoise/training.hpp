#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kanoise/core.hpp"
#include "kanoise/data.hpp"
#include "kanoise/kan.hpp"

namespace kanoise {

enum class Optimizer { adam, gradient_descent, lbfgs };

inline std::string to_string(Optimizer o) {
    switch (o) {
        case Optimizer::adam: return "adam";
        case Optimizer::gradient_descent: return "gd";
        case Optimizer::lbfgs: return "lbfgs";
    }
    return "?";
}

inline Optimizer parse_optimizer(const std::string& s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "gd") return Optimizer::gradient_descent;
    if (s == "lbfgs") return Optimizer::lbfgs;
    throw ParseError("unknown optimizer '" + s + "' (expected adam, gd or lbfgs)");
}

struct TrainConfig {
    int steps = 2000;
    double learning_rate = 1e-2;
    Optimizer optimizer = Optimizer::adam;
    // Initialization seed used by fit().
    std::uint64_t seed = 0;
    int log_every = 100;
    // L-BFGS iterations run after the main optimizer.
    int polish_steps = 0;
    int lbfgs_history = 10;
    // Random initializations screened by fit(): each is trained for `screen_steps`
    // with the main optimizer on at most `screen_max_samples` training rows, and the
    // one with the lowest training RMSE is used for the full run.
    int init_candidates = 1;
    int screen_steps = 200;
    std::size_t screen_max_samples = 3000;

    int total_steps() const noexcept { return steps + polish_steps; }

    void validate() const {
        if (steps < 1) throw InvalidArgument("TrainConfig: steps must be >= 1");
        if (!(learning_rate > 0.0)) throw InvalidArgument("TrainConfig: learning_rate must be > 0");
        if (log_every < 1) throw InvalidArgument("TrainConfig: log_every must be >= 1");
        if (init_candidates < 1) throw InvalidArgument("TrainConfig: init_candidates must be >= 1");
        if (screen_steps < 1) throw InvalidArgument("TrainConfig: screen_steps must be >= 1");
        if (screen_max_samples < 1) throw InvalidArgument("TrainConfig: screen_max_samples must be >= 1");
        if (polish_steps < 0) throw InvalidArgument("TrainConfig: polish_steps must be >= 0");
        if (lbfgs_history < 1) throw InvalidArgument("TrainConfig: lbfgs_history must be >= 1");
    }
};

struct TrainReport {
    std::vector<int> logged_steps;
    std::vector<double> train_rmse_curve;
    std::vector<double> test_rmse_curve;
    double final_test_rmse = 0.0;
    double out_of_range_fraction = 0.0;
};

/// Writes "step,train_rmse,test_rmse" rows.
inline void write_report_csv(const TrainReport& report, std::ostream& out) {
    out << "step,train_rmse,test_rmse\n";
    out.precision(17);
    for (std::size_t i = 0; i < report.logged_steps.size(); ++i)
        out << report.logged_steps[i] << ',' << report.train_rmse_curve[i] << ',' << report.test_rmse_curve[i] << '\n';
}

inline double rmse(std::span<const double> pred, std::span<const double> labels) {
    if (pred.size() != labels.size())
        throw DimensionMismatch("rmse: " + std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
    if (pred.empty()) throw InvalidArgument("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - labels[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

/// Test RMSE against the clean labels of `test_set`.
inline double evaluate(const KanNetwork& net, const LabeledDataset& test_set) {
    return rmse(forward_batch(net, test_set.inputs), test_set.clean_labels);
}

namespace detail {

/// Full-batch loss/gradient evaluation with the first layer's spline bases
/// precomputed, since the training inputs never change.
class BatchObjective {
public:
    BatchObjective(const KanNetwork& net, const LabeledDataset& data)
        : net_(&net), data_(&data), k1_(static_cast<std::size_t>(net.spec().order + 1)) {
        const std::size_t n = data.size();
        const std::size_t d = net.input_width();
        first_.resize(n * d);
        basis_.resize(n * d * k1_);
        base_.resize(n * d);
        const SplineGrid& grid = net.grid(0);
        for (std::size_t r = 0; r < n; ++r) {
            const auto x = data.inputs.row(r);
            for (std::size_t i = 0; i < d; ++i) {
                const std::size_t idx = r * d + i;
                first_[idx] = basis_local(grid, x[i], std::span<double>(&basis_[idx * k1_], k1_));
                base_[idx] = silu(x[i]);
            }
        }
    }

    /// Returns the training RMSE at the current parameters and fills the gradient of
    /// 0.5 * mean squared residual.
    double operator()(std::span<double> grad) {
        Evaluator ev(*net_);
        std::fill(grad.begin(), grad.end(), 0.0);
        const std::size_t n = data_->size();
        const std::size_t d = net_->input_width();
        const double scale = 1.0 / static_cast<double>(n);
        double sse = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t idx = r * d;
            const double pred = ev.forward_cached_input(&first_[idx], &basis_[idx * k1_], &base_[idx]);
            const double res = pred - data_->labels[r];
            sse += res * res;
            ev.backward(res * scale, grad);
        }
        return std::sqrt(sse * scale);
    }

    double rmse_only() const {
        Evaluator ev(*net_);
        const std::size_t n = data_->size();
        const std::size_t d = net_->input_width();
        double sse = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t idx = r * d;
            const double res = ev.forward_cached_input(&first_[idx], &basis_[idx * k1_], &base_[idx]) - data_->labels[r];
            sse += res * res;
        }
        return std::sqrt(sse / static_cast<double>(n));
    }

private:
    const KanNetwork* net_;
    const LabeledDataset* data_;
    std::size_t k1_;
    std::vector<long> first_;
    std::vector<double> basis_;
    std::vector<double> base_;
};

/// Limited-memory BFGS with Armijo backtracking on f = 0.5 * rmse^2.
class Lbfgs {
public:
    Lbfgs(std::size_t n, int history) : n_(n), history_(static_cast<std::size_t>(history)), dir_(n), x0_(n), g0_(n) {}

    /// One iteration. On entry `grad` holds the gradient at `x` and `rmse` the
    /// objective there; on exit both describe the accepted point.
    template <class Objective>
    double step(std::span<double> x, std::vector<double>& grad, double rmse, Objective& objective, double first_step) {
        direction(grad);
        double slope = dot(dir_, grad);
        if (!(slope < 0.0)) {
            s_.clear();
            y_.clear();
            for (std::size_t i = 0; i < n_; ++i) dir_[i] = -grad[i];
            slope = -dot(grad, grad);
        }
        if (slope == 0.0) return rmse;
        const double f0 = 0.5 * rmse * rmse;
        std::copy(x.begin(), x.end(), x0_.begin());
        g0_ = grad;
        double t = s_.empty() ? std::min(1.0, first_step / std::sqrt(-slope)) : 1.0;
        double new_rmse = rmse;
        bool accepted = false;
        for (int trial = 0; trial < 40; ++trial) {
            for (std::size_t i = 0; i < n_; ++i) x[i] = x0_[i] + t * dir_[i];
            new_rmse = objective(grad);
            const double f = 0.5 * new_rmse * new_rmse;
            if (std::isfinite(f) && f <= f0 + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            std::copy(x0_.begin(), x0_.end(), x.begin());
            grad = g0_;
            s_.clear();
            y_.clear();
            return rmse;
        }
        std::vector<double> s(n_), y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            s[i] = x[i] - x0_[i];
            y[i] = grad[i] - g0_[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            if (s_.size() == history_) {
                s_.erase(s_.begin());
                y_.erase(y_.begin());
            }
            s_.push_back(std::move(s));
            y_.push_back(std::move(y));
        }
        return new_rmse;
    }

private:
    static double dot(std::span<const double> a, std::span<const double> b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    }

    // Two-loop recursion: dir = -H * grad.
    void direction(const std::vector<double>& grad) {
        const std::size_t m = s_.size();
        std::vector<double> alpha(m), rho(m);
        for (std::size_t i = 0; i < n_; ++i) dir_[i] = -grad[i];
        for (std::size_t k = m; k-- > 0;) {
            rho[k] = 1.0 / dot(y_[k], s_[k]);
            alpha[k] = rho[k] * dot(s_[k], dir_);
            for (std::size_t i = 0; i < n_; ++i) dir_[i] -= alpha[k] * y_[k][i];
        }
        if (m > 0) {
            const double gamma = dot(s_[m - 1], y_[m - 1]) / dot(y_[m - 1], y_[m - 1]);
            for (double& d : dir_) d *= gamma;
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double beta = rho[k] * dot(y_[k], dir_);
            for (std::size_t i = 0; i < n_; ++i) dir_[i] += (alpha[k] - beta) * s_[k][i];
        }
    }

    std::size_t n_;
    std::size_t history_;
    std::vector<std::vector<double>> s_, y_;
    std::vector<double> dir_, x0_, g0_;
};

}  // namespace detail

/// Full-batch training on `train_set` labels; test RMSE is always measured against
/// the clean labels of `test_set`. Deterministic in (net, data, cfg).
inline std::pair<KanNetwork, TrainReport> train(KanNetwork net, const LabeledDataset& train_set,
                                                const LabeledDataset& test_set, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_input_width(net, train_set.dim(), "train (train set)");
    detail::check_input_width(net, test_set.dim(), "train (test set)");
    if (train_set.size() == 0 || test_set.size() == 0) throw InvalidArgument("train: empty dataset");

    detail::BatchObjective objective(net, train_set);
    auto params = net.parameters();
    const std::size_t p = params.size();
    std::vector<double> grad(p);
    TrainReport report;
    int step = 0;

    auto log_point = [&](double train_rmse) {
        report.logged_steps.push_back(step);
        report.train_rmse_curve.push_back(train_rmse);
        report.test_rmse_curve.push_back(evaluate(net, test_set));
    };
    auto check_finite = [&](double train_rmse) {
        if (!std::isfinite(train_rmse))
            throw NonFiniteLoss("train: loss became non-finite at step " + std::to_string(step) + " (optimizer=" +
                                to_string(cfg.optimizer) + ", learning_rate=" + std::to_string(cfg.learning_rate) + ")");
        if (step % cfg.log_every == 0) log_point(train_rmse);
    };
    auto run_lbfgs = [&](int iterations, double first_step) {
        detail::Lbfgs lbfgs(p, cfg.lbfgs_history);
        double train_rmse = objective(grad);
        for (int it = 0; it < iterations; ++it, ++step) {
            check_finite(train_rmse);
            train_rmse = lbfgs.step(params, grad, train_rmse, objective, it == 0 ? first_step : 1.0);
        }
    };

    if (cfg.optimizer == Optimizer::lbfgs) {
        run_lbfgs(cfg.steps, cfg.learning_rate);
    } else {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        std::vector<double> m(p, 0.0), v(p, 0.0);
        double b1t = 1.0, b2t = 1.0;
        for (int it = 0; it < cfg.steps; ++it, ++step) {
            check_finite(objective(grad));
            if (cfg.optimizer == Optimizer::adam) {
                b1t *= beta1;
                b2t *= beta2;
                const double lr_t = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
                for (std::size_t i = 0; i < p; ++i) {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
                }
            } else {
                for (std::size_t i = 0; i < p; ++i) params[i] -= cfg.learning_rate * grad[i];
            }
        }
    }
    if (cfg.polish_steps > 0) run_lbfgs(cfg.polish_steps, cfg.learning_rate);

    const double final_train = objective.rmse_only();
    check_finite(final_train);
    report.final_test_rmse = evaluate(net, test_set);
    report.out_of_range_fraction = out_of_range_fraction(net, train_set.inputs);
    return {std::move(net), std::move(report)};
}

/// Initialization seed of screening candidate `c`; candidate 0 uses `seed` itself.
inline std::uint64_t candidate_seed(std::uint64_t seed, int c) {
    if (c == 0) return seed;
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// First `n` rows of a dataset (all of it when n >= size).
inline LabeledDataset head(const LabeledDataset& ds, std::size_t n) {
    if (n >= ds.size()) return ds;
    LabeledDataset out;
    out.inputs = Matrix(n, ds.dim());
    for (std::size_t r = 0; r < n; ++r) std::copy(ds.inputs.row(r).begin(), ds.inputs.row(r).end(), out.inputs.row(r).begin());
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<long>(n));
    out.clean_labels.assign(ds.clean_labels.begin(), ds.clean_labels.begin() + static_cast<long>(n));
    out.noise_sigma = ds.noise_sigma;
    out.seed = ds.seed;
    out.filter_sigma = ds.filter_sigma;
    out.filter_cutoff = ds.filter_cutoff;
    return out;
}

/// Initializes and trains a network. With cfg.init_candidates > 1, each candidate
/// initialization is briefly trained on a prefix of the training set and the one with
/// the lowest training RMSE is then trained from scratch on all of it. Selection only
/// looks at training labels.
inline std::pair<KanNetwork, TrainReport> fit(const KanSpec& spec, const LabeledDataset& train_set,
                                              const LabeledDataset& test_set, const TrainConfig& cfg) {
    cfg.validate();
    const std::uint64_t init_seed = cfg.seed;
    std::uint64_t chosen = init_seed;
    if (cfg.init_candidates > 1) {
        TrainConfig screen = cfg;
        screen.steps = cfg.screen_steps;
        screen.polish_steps = 0;
        screen.log_every = cfg.screen_steps;
        const LabeledDataset subset = head(train_set, cfg.screen_max_samples);
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < cfg.init_candidates; ++c) {
            const std::uint64_t s = candidate_seed(init_seed, c);
            try {
                const auto [net, report] = train(init_network(spec, s), subset, test_set, screen);
                const double final_train = report.train_rmse_curve.back();
                if (final_train < best) {
                    best = final_train;
                    chosen = s;
                }
            } catch (const NonFiniteLoss&) {
                // candidate diverged; skip it
            }
        }
    }
    return train(init_network(spec, chosen), train_set, test_set, cfg);
}

}  // namespace kanoise
