#include "doctest.h"
#include "oracles.hpp"

#include "ggdseg/config.hpp"
#include "ggdseg/experiment.hpp"
#include "ggdseg/io.hpp"
#include "ggdseg/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unistd.h>

using namespace ggdseg;
namespace fs = std::filesystem;

namespace {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

Moments sample_moments(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double t : v) ss += (t - mean) * (t - mean);
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

// Same binning as the implementation, then between-class variance from
// direct per-class sums in extended precision.
std::vector<int> brute_force_cuts(std::span<const double> values, int levels) {
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, width = (*mx_it - mn) / kOtsuBins;
    std::vector<long double> hist(kOtsuBins, 0.0L);
    for (double v : values) hist[std::min(kOtsuBins - 1, static_cast<int>((v - mn) / width))] += 1;
    const long double total = static_cast<long double>(values.size());
    long double mu_t = 0;
    for (int b = 0; b < kOtsuBins; ++b) mu_t += hist[b] * b / total;
    auto between = [&](const std::vector<int>& cuts) {
        long double s = 0;
        int lo = 0;
        for (std::size_t k = 0; k <= cuts.size(); ++k) {
            const int hi = k < cuts.size() ? cuts[k] : kOtsuBins - 1;
            long double w = 0, m = 0;
            for (int b = lo; b <= hi; ++b) w += hist[b], m += hist[b] * b;
            if (w > 0) s += w / total * (m / w - mu_t) * (m / w - mu_t);
            lo = hi + 1;
        }
        return s;
    };
    std::vector<int> best;
    long double best_s = -1;
    if (levels == 2) {
        for (int a = 0; a < kOtsuBins - 1; ++a) {
            const long double s = between({a});
            if (s > best_s) best_s = s, best = {a};
        }
    } else {
        for (int a = 0; a < kOtsuBins - 2; ++a) {
            for (int b = a + 1; b < kOtsuBins - 1; ++b) {
                const long double s = between({a, b});
                if (s > best_s) best_s = s, best = {a, b};
            }
        }
    }
    return best;
}

fs::path temp_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ggdseg_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("sample_ggd moment law") {
    const std::size_t count = 1000000;
    std::uint64_t seed = 100;
    for (double p : {0.7, 1.0, 1.5, 2.0}) {
        for (double alpha : {0.5, 2.0}) {
            const Vec t = sample_ggd(p, alpha, count, seed++);
            Vec powered(count);
            for (std::size_t i = 0; i < count; ++i) powered[i] = std::pow(std::abs(t[i]), p);
            const Moments m = sample_moments(powered);
            INFO("p=" << p << " alpha=" << alpha);
            CHECK(std::abs(m.mean - alpha / p) <= 3 * m.se);
            const Moments c = sample_moments(t);
            CHECK(std::abs(c.mean) <= 3 * c.se);
        }
    }
    // p = 2 is Gaussian with variance alpha / 2.
    const Vec g = sample_ggd(2.0, 3.0, count, 7);
    Vec sq(count);
    for (std::size_t i = 0; i < count; ++i) sq[i] = g[i] * g[i];
    const Moments v = sample_moments(sq);
    CHECK(std::abs(v.mean - 1.5) <= 3 * v.se);
    CHECK_THROWS_AS(sample_ggd(0.0, 1.0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_ggd(1.0, -1.0, 10, 1), std::invalid_argument);
    CHECK(sample_ggd(1.3, 0.7, 100, 5) == sample_ggd(1.3, 0.7, 100, 5));
}

TEST_CASE("phantom") {
    const Grid g{64, 64};
    const auto two = phantom_mask(g, PhantomLayout::two_region);
    const auto three = phantom_mask(g, PhantomLayout::three_region);
    for (int v : two) CHECK((v == 1 || v == 2));
    std::size_t disc = 0;
    for (std::size_t r = 0; r < 64; ++r) {
        for (std::size_t c = 0; c < 64; ++c) {
            const double dy = r - 31.5, dx = c - 31.5;
            const int expect = dy * dy + dx * dx <= 19.2 * 19.2 ? 2 : 1;
            CHECK(two[r * 64 + c] == expect);
            disc += expect == 2;
        }
    }
    CHECK(std::count(two.begin(), two.end(), 2) == static_cast<long>(disc));
    CHECK(std::count(three.begin(), three.end(), 3) > 0);
    CHECK(std::count(three.begin(), three.end(), 2) == static_cast<long>(disc));

    PhantomSpec spec;
    spec.regions = {{2.0, 2.0}, {1.0, 0.5}};
    const Phantom ph = make_phantom(spec, 3);
    for (std::size_t i = 0; i < ph.x.size(); ++i) {
        const RegionParams& rp = spec.regions[ph.mask[i] - 1];
        CHECK(ph.p[i] == rp.shape);
        CHECK(ph.beta[i] == doctest::Approx(std::log(rp.alpha) / rp.shape).epsilon(1e-15));
    }
    CHECK(make_phantom(spec, 3).x == ph.x);
    CHECK(make_phantom(spec, 4).x != ph.x);

    // Single effective region: p = 2, alpha = 2 gives unit variance.
    PhantomSpec big;
    big.grid = {256, 256};
    big.regions = {{2.0, 2.0}, {2.0, 2.0}};
    const Phantom gp = make_phantom(big, 9);
    Vec sq(gp.x.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = gp.x[i] * gp.x[i];
    const Moments v = sample_moments(sq);
    CHECK(std::abs(v.mean - 1.0) <= 3 * v.se);

    PhantomSpec bad;
    bad.regions = {{2.0, 1.0}};
    CHECK_THROWS_AS(make_phantom(bad, 1), std::invalid_argument);
    bad.regions = {{2.0, 1.0}, {-1.0, 1.0}};
    CHECK_THROWS_AS(make_phantom(bad, 1), std::invalid_argument);
}

TEST_CASE("degrade") {
    const Grid g{128, 128};
    Philox rng(51);
    const Vec x = oracle::random_vec(g.size(), rng, -1, 1);
    const ConvOperator conv(gaussian_psf(5, 1.0), g);
    CHECK(degrade(x, conv, 0.0, 1) == conv.apply(x));
    const Vec y = degrade(x, conv, 0.2, 1);
    CHECK(degrade(x, conv, 0.2, 1) == y);
    const Vec kx = conv.apply(x);
    Vec sq(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) sq[i] = (y[i] - kx[i]) * (y[i] - kx[i]);
    const Moments m = sample_moments(sq);
    CHECK(std::abs(m.mean - 0.04) <= 3 * m.se);
}

TEST_CASE("wiener_init") {
    const Grid g{16, 16};
    Philox rng(52);
    const Vec x = oracle::random_vec(g.size(), rng, -1, 1);
    const ConvOperator id(delta_psf(), g);
    const Vec w = wiener_init(x, id, 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(w[i] == doctest::Approx(x[i]).epsilon(1e-9));

    // Invertible blur: strong centre tap keeps the transfer function away from zero.
    const ConvOperator blur(Psf{3, 3, {0.0, 0.1, 0.0, 0.1, 0.6, 0.1, 0.0, 0.1, 0.0}}, g);
    const Vec r = wiener_init(blur.apply(x), blur, 1e-10);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) num += (r[i] - x[i]) * (r[i] - x[i]), den += x[i] * x[i];
    CHECK(std::sqrt(num / den) <= 1e-6);

    // Kernel with spectral zeros stays finite.
    const ConvOperator box(Psf{1, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, Grid{3, 3});
    for (double v : wiener_init(Vec(9, 1.0), box, 0.1)) CHECK(std::isfinite(v));
    for (double v : wiener_init(Vec(9, 0.0), box, 0.1)) CHECK(std::isfinite(v));
}

TEST_CASE("init_state") {
    const Grid g{256, 256};
    const ConvOperator id(delta_psf(), g);
    Hyperparams h;
    h.mu_beta = 0.7;
    h.shape_min = 0.8;
    h.shape_max = 1.2;
    Philox rng(53);
    const Vec y = oracle::random_vec(g.size(), rng);
    const State s = init_state(y, id, h, 5);
    for (double v : s.p) {
        CHECK(v >= 0.8);
        CHECK(v <= 1.2);
    }
    const Moments m = sample_moments(s.beta);
    CHECK(std::abs(m.mean - 0.7) <= 3 * m.se);
    const State t = init_state(y, id, h, 5);
    CHECK(t.p == s.p);
    CHECK(t.beta == s.beta);
    CHECK(t.x == wiener_init(y, id, h.noise_std));
    Hyperparams wide;
    const State u = init_state(y, id, wide, 6);
    for (double v : u.p) {
        CHECK(v >= 0.5);
        CHECK(v <= 1.5);
    }
}

TEST_CASE("otsu") {
    Vec bimodal(100, 0.0);
    std::fill(bimodal.begin() + 50, bimodal.end(), 10.0);
    const OtsuResult r = otsu(bimodal, 2);
    REQUIRE(r.thresholds.size() == 1);
    CHECK(r.thresholds[0] > 0.0);
    CHECK(r.thresholds[0] < 10.0);
    const auto labels = quantize(bimodal, r.thresholds);
    for (std::size_t i = 0; i < 100; ++i) CHECK(labels[i] == (i < 50 ? 1 : 2));

    const Vec c(20, 3.5);
    const OtsuResult rc = otsu(c, 3);
    CHECK(rc.thresholds == Vec{3.5, 3.5});
    for (int l : quantize(c, rc.thresholds)) CHECK(l == 1);

    CHECK_THROWS_AS(otsu(bimodal, 1), std::invalid_argument);
    CHECK_THROWS_AS(otsu(bimodal, 5), std::invalid_argument);
    CHECK_THROWS_AS(otsu(Vec{}, 2), std::invalid_argument);

    Philox rng(54);
    for (int trial = 0; trial < 50; ++trial) {
        // Mixtures so that the optimum is not a near-tie.
        Vec v = oracle::random_vec(300, rng, 0.0, 1.0);
        for (std::size_t i = 0; i < 100; ++i) v[i] += 2.0;
        for (std::size_t i = 100; i < 160; ++i) v[i] += 4.0 * rng.uniform();
        for (int L : {2, 3}) {
            INFO("trial " << trial << " L=" << L);
            const OtsuResult o = otsu(v, L);
            CHECK(o.cuts == brute_force_cuts(v, L));
            const double mn = *std::min_element(v.begin(), v.end());
            const double width = (*std::max_element(v.begin(), v.end()) - mn) / kOtsuBins;
            for (std::size_t k = 0; k < o.cuts.size(); ++k) CHECK(o.thresholds[k] == mn + (o.cuts[k] + 1) * width);
        }
    }
}

TEST_CASE("quantize") {
    const Vec t{1.0};
    CHECK(quantize(Vec{0.5, 1.0, 1.5}, t) == std::vector<int>{1, 1, 2});
    CHECK(quantize(Vec{-5, 0.5, 2.0, 3.5}, Vec{0.0, 1.0, 3.0}) == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("psnr") {
    CHECK(psnr_peak(Vec{1, 0, 0, 0}, Vec{0, 0, 0, 0}) == doctest::Approx(10 * std::log10(4.0)).epsilon(1e-14));
    CHECK(psnr_peak(Vec{1, 0, 0, 0}, Vec{0, 0, 0, 0}) == doctest::Approx(6.0206).epsilon(1e-5));
    CHECK(std::isinf(psnr_peak(Vec{1, 2}, Vec{1, 2})));
    CHECK(psnr_range(Vec{0, 2, 0, 0}, Vec{0, 1, 0, 0}) == doctest::Approx(10 * std::log10(4.0 / 0.25)));
    CHECK_THROWS_AS(psnr_peak(Vec{1}, Vec{1, 2}), std::invalid_argument);

    // Moving along the segment from y to x raises PSNR monotonically.
    RunConfig cfg;
    const Phantom ph = make_phantom(cfg.phantom, 1);
    const ConvOperator conv(gaussian_psf(7, 1.0), cfg.phantom.grid);
    const Vec y = degrade(ph.x, conv, 0.05, 1);
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
        const double s = k / 10.0;
        Vec z(y.size());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1 - s) * y[i] + s * ph.x[i];
        const double v = psnr_peak(ph.x, z);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("ssim") {
    const Grid g{16, 16};
    Philox rng(55);
    const Vec x = oracle::random_vec(g.size(), rng);
    CHECK(ssim(x, x, g) == doctest::Approx(1.0).epsilon(1e-14));
    Vec noisy = x;
    for (double& v : noisy) v += 0.5 * (rng.uniform() - 0.5);
    const double s = ssim(x, noisy, g);
    CHECK(s < 1.0);
    CHECK(s > 0.0);
    CHECK(ssim(x, noisy, g) == s);

    // Single-window oracle on an 8x8 image.
    const Grid w{8, 8};
    const Vec a = oracle::random_vec(64, rng), b = oracle::random_vec(64, rng);
    const double R = *std::max_element(a.begin(), a.end()) - *std::min_element(a.begin(), a.end());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < 64; ++i) ma += a[i] / 64, mb += b[i] / 64;
    double va = 0, vb = 0, cab = 0;
    for (std::size_t i = 0; i < 64; ++i) {
        va += (a[i] - ma) * (a[i] - ma) / 63;
        vb += (b[i] - mb) * (b[i] - mb) / 63;
        cab += (a[i] - ma) * (b[i] - mb) / 63;
    }
    const double c1 = std::pow(0.01 * R, 2), c2 = std::pow(0.03 * R, 2);
    const double ref = (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    CHECK(ssim(a, b, w) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("overall_accuracy") {
    const std::vector<int> ref{1, 1, 2, 2, 3, 3};
    CHECK(overall_accuracy(ref, ref) == 100.0);
    CHECK(overall_accuracy(ref, std::vector<int>{3, 3, 1, 1, 2, 2}) == 100.0);
    CHECK(overall_accuracy(ref, std::vector<int>{1, 1, 1, 1, 1, 1}) == doctest::Approx(100.0 / 3));
    CHECK(overall_accuracy(std::vector<int>{1, 1, 2, 2}, std::vector<int>{2, 1, 1, 1}) == 75.0);

    Philox rng(56);
    std::vector<int> a(200), b(200);
    for (auto& v : a) v = 1 + static_cast<int>(3 * rng.uniform());
    for (auto& v : b) v = 1 + static_cast<int>(3 * rng.uniform());
    const double base = overall_accuracy(a, b);
    std::vector<int> perm{1, 2, 3};
    do {
        std::vector<int> pb(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) pb[i] = perm[b[i] - 1];
        CHECK(overall_accuracy(a, pb) == base);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("config parsing") {
    std::istringstream in(
        "[model]\nnoise_std=0.1\nmetric=fourier\ntv_shape=3\n"
        "[solver]\nouter_max=7\n"
        "[phantom]\nlayout=three\nshape3=1.5\nalpha3=0.8\n"
        "[psf]\nside=5\nstd=2\n"
        "[run]\nseed=11\nlevels=3\nout=somewhere\ntiming=true\n");
    const RunConfig c = parse_config(in);
    CHECK(c.hyper.noise_std == 0.1);
    CHECK(c.hyper.metric == MetricMode::fourier);
    CHECK(c.hyper.tv_shape == 3.0);
    CHECK(c.stop.outer_max == 7);
    CHECK(c.phantom.layout == PhantomLayout::three_region);
    REQUIRE(c.phantom.regions.size() == 3);
    CHECK(c.phantom.regions[2].shape == 1.5);
    CHECK(c.psf.side == 5);
    CHECK(c.seed == 11);
    CHECK(c.levels == 3);
    CHECK(c.out == "somewhere");
    CHECK(c.timing);

    std::istringstream round(dump_config(c));
    CHECK(dump_config(parse_config(round)) == dump_config(c));

    auto fails = [](const std::string& text) {
        std::istringstream s(text);
        CHECK_THROWS_AS(parse_config(s), std::invalid_argument);
    };
    fails("[model]\nbogus=1\n");
    fails("[model]\nnoise_std=abc\n");
    fails("[model]\nnoise_std=-1\n");
    fails("[model]\ngamma0=1.5\n");
    fails("[model]\ngamma1=9\n");
    fails("[model]\nmetric=other\n");
    fails("[run]\nlevels=7\n");
    fails("[psf]\nside=4\n");
    fails("[phantom]\nlayout=three\n");
    fails("[run]\ntiming=maybe\n");
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.ini"), std::invalid_argument);
}

TEST_CASE("raw and png io") {
    const fs::path dir = temp_dir("io");
    io::ensure_writable_dir(dir / "nested");
    CHECK(fs::is_directory(dir / "nested"));
    const Grid g{3, 5};
    Philox rng(57);
    const Vec v = oracle::random_vec(g.size(), rng, -1e3, 1e3);
    io::write_raw(dir / "map", v, g);
    Grid back;
    CHECK(io::read_raw(dir / "map", &back) == v);
    CHECK(back == g);
    io::write_png(dir / "map.png", v, g);
    CHECK(fs::file_size(dir / "map.png") > 0);
    std::ifstream sj(dir / "map.png.scale.json");
    const auto s = nlohmann::json::parse(sj);
    CHECK(s.at("min").get<double>() == *std::min_element(v.begin(), v.end()));

    std::ofstream(dir / "k.txt") << "# kernel\n0 1 0\n1 4 1\n0 1 0\n";
    const Psf k = io::load_psf(dir / "k.txt");
    CHECK(k.rows == 3);
    CHECK(k.at(1, 1) == 4.0);
    PsfSpec ps;
    ps.file = (dir / "k.txt").string();
    const Psf kn = make_psf(ps);
    CHECK(std::accumulate(kn.values.begin(), kn.values.end(), 0.0) == doctest::Approx(1.0));
    std::ofstream(dir / "even.txt") << "1 1\n1 1\n";
    CHECK_THROWS(io::load_psf(dir / "even.txt"));

    if (::geteuid() != 0) {
        fs::create_directories(dir / "ro");
        fs::permissions(dir / "ro", fs::perms::owner_read | fs::perms::owner_exec);
        CHECK_THROWS_AS(io::ensure_writable_dir(dir / "ro" / "sub"), std::runtime_error);
        fs::permissions(dir / "ro", fs::perms::owner_all);
    }
    // A regular file in the way cannot become a directory, for any user.
    std::ofstream(dir / "file") << "x";
    CHECK_THROWS_AS(io::ensure_writable_dir(dir / "file"), std::runtime_error);
    CHECK_THROWS_AS(io::ensure_writable_dir(dir / "file" / "sub"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("run_experiment writes every artifact") {
    RunConfig cfg;
    cfg.stop.outer_max = 3;
    cfg.phantom.grid = {32, 32};
    const fs::path dir = temp_dir("run");
    cfg.out = (dir / "a" / "b").string();
    const ExperimentResult r = run_experiment(cfg);
    for (const char* stem : {"x_hat", "p_hat", "beta_hat", "labels", "y", "x_true", "x_init"}) {
        CHECK(fs::exists(fs::path(cfg.out) / (std::string(stem) + ".f64")));
        CHECK(fs::exists(fs::path(cfg.out) / (std::string(stem) + ".png")));
    }
    CHECK(fs::exists(fs::path(cfg.out) / "trace.csv"));
    CHECK(fs::exists(fs::path(cfg.out) / "metrics.json"));
    std::ifstream mf(fs::path(cfg.out) / "metrics.json");
    const auto m = nlohmann::json::parse(mf);
    CHECK(m.at("iterations").get<int>() <= 3);
    CHECK(m.at("overall_accuracy").get<double>() == r.metrics.at("overall_accuracy").get<double>());
    CHECK(io::read_raw(fs::path(cfg.out) / "p_hat") == r.solve.state.p);

    const ExperimentResult again = run_pipeline(cfg);
    CHECK(again.metrics.dump() == r.metrics.dump());
    fs::remove_all(dir);
}
