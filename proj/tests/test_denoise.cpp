#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "kanoise/data.hpp"
#include "kanoise/denoise.hpp"

using namespace kanoise;

namespace {

// Dense double loop over all pairs.
std::vector<std::vector<double>> dense_kernel(const Matrix& x, double sigma, double cutoff) {
    const std::size_t n = x.rows();
    std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double d2 = 0;
            for (std::size_t c = 0; c < x.cols(); ++c) d2 += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
            const double w = std::exp(-d2 / (2 * sigma * sigma));
            k[i][j] = w >= cutoff ? w : 0.0;
            sum += k[i][j];
        }
        for (auto& v : k[i]) v /= sum;
    }
    return k;
}

Matrix cloud(std::size_t n, std::size_t d, std::uint64_t seed) {
    Matrix m(n, d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

LabeledDataset noisy(const char* fn, long n, std::uint64_t seed, double sigma = 0.3) {
    return add_noise(sample_dataset(target(fn), n, seed), NoiseSpec::sigma(sigma), seed + 1);
}

double variance(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
}

}  // namespace

TEST(KernelConfig, Validation) {
    EXPECT_THROW((KernelFilterConfig{0.0, 1e-12}.validate()), InvalidArgument);
    EXPECT_THROW((KernelFilterConfig{-1.0, 1e-12}.validate()), InvalidArgument);
    EXPECT_THROW((KernelFilterConfig{0.1, 1.0}.validate()), InvalidArgument);
    EXPECT_THROW(build_kernel(Matrix(3, 2), {0.0, 0.0}), InvalidArgument);
    EXPECT_THROW(build_kernel(Matrix(0, 2), {}), InvalidArgument);
    EXPECT_NEAR((KernelFilterConfig{0.1, 1e-12}.support_radius()), 0.1 * std::sqrt(2 * std::log(1e12)), 1e-15);
}

TEST(BuildKernel, SinglePoint) {
    const auto k = build_kernel(Matrix(1, 3, 0.5), {});
    EXPECT_EQ(k.n, 1u);
    EXPECT_EQ(k.at(0, 0), 1.0);
}

TEST(BuildKernel, TwoPointNormalization) {
    Matrix x(2, 1);
    x(1, 0) = 0.15;
    const double sigma = 0.1, e = std::exp(-0.15 * 0.15 / (2 * sigma * sigma));
    const auto k = build_kernel(x, {sigma, 0.0});
    EXPECT_NEAR(k.at(0, 1), e / (1 + e), 1e-15);
    EXPECT_NEAR(k.at(1, 0), e / (1 + e), 1e-15);
    EXPECT_NEAR(k.at(0, 0), 1 / (1 + e), 1e-15);
}

TEST(BuildKernel, MatchesDenseOracleWithoutCutoff) {
    const auto x = cloud(50, 2, 3);
    for (double sigma : {0.05, 0.2, 1.0}) {
        const auto k = build_kernel(x, {sigma, 0.0});
        const auto o = dense_kernel(x, sigma, 0.0);
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t j = 0; j < 50; ++j) ASSERT_NEAR(k.at(i, j), o[i][j], 1e-12) << sigma;
    }
}

TEST(BuildKernel, MatchesDenseOracleWithCutoffInThreeDimensions) {
    const auto x = cloud(400, 3, 4);
    const auto k = build_kernel(x, {0.1, 1e-6});
    const auto o = dense_kernel(x, 0.1, 1e-6);
    std::size_t nnz = 0;
    for (std::size_t i = 0; i < 400; ++i)
        for (std::size_t j = 0; j < 400; ++j) {
            ASSERT_NEAR(k.at(i, j), o[i][j], 1e-12);
            nnz += o[i][j] > 0;
        }
    EXPECT_EQ(k.nnz(), nnz);
    EXPECT_LT(k.nnz(), 400u * 400u / 4);
}

TEST(BuildKernel, RowStochasticNonNegativePositiveDiagonal) {
    const auto x = cloud(2000, 2, 5);
    const auto k = build_kernel(x, {0.05, 1e-12});
    for (std::size_t r = 0; r < k.n; ++r) {
        double s = 0;
        for (std::size_t p = k.row_start[r]; p < k.row_start[r + 1]; ++p) {
            EXPECT_GE(k.val[p], 0.0);
            s += k.val[p];
        }
        ASSERT_NEAR(s, 1.0, 1e-10);
        EXPECT_GT(k.at(r, r), 0.0);
    }
}

TEST(KernelFilter, AgreesWithMatrixProductAndKeepsMetadata) {
    const auto d = noisy("f2", 3000, 1);
    const KernelFilterConfig cfg{0.1, 1e-12};
    const auto f = kernel_filter(d, cfg);
    const auto viak = build_kernel(d.inputs, cfg).apply(d.labels);
    for (std::size_t i = 0; i < d.size(); ++i) ASSERT_NEAR(f.labels[i], viak[i], 1e-12);
    EXPECT_EQ(f.inputs, d.inputs);
    EXPECT_EQ(f.clean_labels, d.clean_labels);
    EXPECT_EQ(f.filter_sigma, 0.1);
    EXPECT_EQ(f.filter_cutoff, 1e-12);
}

TEST(KernelFilter, IndependentOfThreadCount) {
    const auto d = noisy("f3", 5000, 2);
    const auto a = kernel_filter(d, {0.2, 1e-12}, 1);
    const auto b = kernel_filter(d, {0.2, 1e-12}, 7);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(KernelFilter, ConstantLabelsAreAFixpoint) {
    auto d = sample_dataset(target("f1"), 1500, 3);
    for (auto& v : d.labels) v = 2.75;
    const auto f = kernel_filter(d, {0.15, 1e-12});
    for (double v : f.labels) EXPECT_NEAR(v, 2.75, 1e-12);
}

TEST(KernelFilter, TinyBandwidthIsIdentity) {
    const auto d = noisy("f2", 500, 4);
    double min_dist = INFINITY;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j)
            min_dist = std::min(min_dist, std::hypot(d.inputs(i, 0) - d.inputs(j, 0), d.inputs(i, 1) - d.inputs(j, 1)));
    const auto f = kernel_filter(d, {min_dist / 100, 1e-12});
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(f.labels[i], d.labels[i], 1e-9);
    const auto f0 = kernel_filter(d, {min_dist / 100, 0.0});
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(f0.labels[i], d.labels[i], 1e-9);
}

TEST(KernelFilter, ThreePointHandCase) {
    LabeledDataset d;
    d.inputs = Matrix(3, 1);
    d.inputs(1, 0) = 0.1;
    d.inputs(2, 0) = 10.0;
    d.labels = {0, 1, 0};
    d.clean_labels = d.labels;
    const double e = std::exp(-0.5);
    const double expect = (0 + e * 1) / (1 + e + std::exp(-5000.0));
    const auto f = kernel_filter(d, {0.1, 0.0});
    EXPECT_NEAR(f.labels[0], expect, 1e-15);
    EXPECT_NEAR(f.labels[1], 1 / (1 + e), 1e-15);
    EXPECT_EQ(f.labels[2], 0.0);
}

TEST(KernelFilter, AveragingBoundsAndVarianceReduction) {
    const auto d = noisy("f1", 2000, 5);
    const auto f = kernel_filter(d, {0.1, 1e-12});
    const auto [lo, hi] = std::minmax_element(d.labels.begin(), d.labels.end());
    for (double v : f.labels) {
        EXPECT_GE(v, *lo - 1e-12);
        EXPECT_LE(v, *hi + 1e-12);
    }
    EXPECT_LT(variance(f.labels), variance(d.labels));
}

TEST(KernelFilter, PermutationEquivariant) {
    const auto d = noisy("f6", 800, 6);
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
    LabeledDataset p = d;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::copy(d.inputs.row(perm[i]).begin(), d.inputs.row(perm[i]).end(), p.inputs.row(i).begin());
        p.labels[i] = d.labels[perm[i]];
        p.clean_labels[i] = d.clean_labels[perm[i]];
    }
    const auto fd = kernel_filter(d, {0.2, 1e-12}), fp = kernel_filter(p, {0.2, 1e-12});
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(fp.labels[i], fd.labels[perm[i]], 1e-12);
}

TEST(KernelFilter, ReducesLabelErrorAtLowSnr) {
    const auto d = add_noise(sample_dataset(target("f2"), 3000, 7), NoiseSpec::snr(-5), 8);
    const auto f = kernel_filter(d, {0.1, 1e-12});
    double before = 0, after = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        before += std::pow(d.labels[i] - d.clean_labels[i], 2);
        after += std::pow(f.labels[i] - f.clean_labels[i], 2);
    }
    EXPECT_LT(after, 0.2 * before);
}

TEST(Sinc, Values) {
    EXPECT_EQ(sinc(0.0), 1.0);
    EXPECT_NEAR(sinc(1.0), 0.0, 1e-16);
    EXPECT_NEAR(sinc(0.5), 2 / std::numbers::pi, 1e-15);
}

TEST(SincReconstruct, InterpolatesSamplesAtShannonRate) {
    const double omega = 1.5;
    std::vector<Sample> s;
    for (int k = -600; k <= 600; ++k) {
        const double t = k / (2 * omega);
        s.push_back({t, std::cos(2.1 * t) + 0.3 * std::sin(5 * t)});
    }
    for (int k : {-10, 0, 3, 77}) EXPECT_NEAR(sinc_reconstruct(s, omega, 1.0, s[600 + k].t), s[600 + k].value, 1e-6);
}

TEST(SincReconstruct, OversampledSineIsAccurate) {
    const double omega = 2 * std::numbers::pi + 0.1, T = 0.5, step = T / (2 * omega);
    std::vector<Sample> s;
    const long K = static_cast<long>(std::floor(200.0 / step));
    for (long k = -K; k <= K; ++k) s.push_back({k * step, std::sin(2 * std::numbers::pi * k * step)});
    double worst = 0;
    for (int i = 0; i <= 200; ++i) {
        const double t = -100.0 + i;
        const double tt = t + 0.37;
        worst = std::max(worst, std::abs(sinc_reconstruct(s, omega, T, tt) - std::sin(2 * std::numbers::pi * tt)));
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(SincReconstruct, Errors) {
    std::vector<Sample> s{{0.0, 1.0}, {0.5, 1.0}};
    EXPECT_THROW(sinc_reconstruct(s, 1.0, 0.0, 0.1), InvalidArgument);
    EXPECT_THROW(sinc_reconstruct(s, 1.0, 1.5, 0.1), InvalidArgument);
    EXPECT_THROW(sinc_reconstruct(s, 0.0, 1.0, 0.1), InvalidArgument);
    std::vector<Sample> off{{0.0, 1.0}, {0.3, 1.0}};
    EXPECT_THROW(sinc_reconstruct(off, 1.0, 1.0, 0.1), InvalidArgument);
}

TEST(SincReconstruct, NoiseAveragesOutWithDenserSampling) {
    // Band-limited test signal, noisy samples, 20 draws per spacing.
    auto signal = [](double t) { return std::sin(2 * std::numbers::pi * t) + 0.5 * std::cos(std::numbers::pi * t); };
    const double omega = 1.25;
    auto mean_rmse = [&](double T) {
        const double step = T / (2 * omega);
        const long K = static_cast<long>(std::floor(20.0 / step));
        double total = 0;
        for (int d = 0; d < 20; ++d) {
            std::mt19937_64 rng(100 + d);
            std::normal_distribution<double> n(0, 0.2);
            std::vector<Sample> s;
            for (long k = -K; k <= K; ++k) s.push_back({k * step, signal(k * step) + n(rng)});
            double sse = 0;
            for (int i = 0; i <= 100; ++i) {
                const double t = -10 + 0.2 * i;
                sse += std::pow(sinc_reconstruct(s, omega, T, t) - signal(t), 2);
            }
            total += std::sqrt(sse / 101);
        }
        return total / 20;
    };
    const double r1 = mean_rmse(1.0), r4 = mean_rmse(0.25);
    EXPECT_LT(r4, r1);
    EXPECT_NEAR(r4 / r1, 0.5, 0.15);
}
