#include "ggdseg/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace ggdseg {

namespace {

void same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

Philox stream_rng(std::uint64_t seed, Stream s) { return Philox(seed, static_cast<std::uint64_t>(s)); }

}  // namespace

// ---------------------------------------------------------------------------

Vec sample_ggd(double p, double alpha, std::size_t count, Philox& rng) {
    if (!(p > 0.0 && std::isfinite(p))) throw std::invalid_argument("sample_ggd: shape must be positive");
    if (!(alpha > 0.0 && std::isfinite(alpha))) throw std::invalid_argument("sample_ggd: scale must be positive");
    std::gamma_distribution<double> gamma(1.0 / p, 1.0);
    Vec out(count);
    for (auto& t : out) {
        const double g = gamma(rng);
        const double mag = std::pow(alpha * g, 1.0 / p);
        t = (rng() & 1u) ? mag : -mag;
    }
    return out;
}

Vec sample_ggd(double p, double alpha, std::size_t count, std::uint64_t seed) {
    Philox rng(seed);
    return sample_ggd(p, alpha, count, rng);
}

// ---------------------------------------------------------------------------

double RegionParams::beta() const { return std::log(alpha) / shape; }

const char* to_string(PhantomLayout layout) {
    return layout == PhantomLayout::two_region ? "two" : "three";
}

PhantomLayout phantom_layout_from_string(const std::string& name) {
    if (name == "two") return PhantomLayout::two_region;
    if (name == "three") return PhantomLayout::three_region;
    throw std::invalid_argument("unknown phantom layout '" + name + "' (expected two|three)");
}

void PhantomSpec::validate() const {
    if (grid.height < 4 || grid.width < 4) throw std::invalid_argument("phantom: grid must be at least 4x4");
    const std::size_t need = layout == PhantomLayout::two_region ? 2 : 3;
    if (regions.size() != need) {
        throw std::invalid_argument("phantom: layout needs " + std::to_string(need) + " regions");
    }
    for (const auto& r : regions) {
        if (!(r.shape > 0.0) || !(r.alpha > 0.0)) throw std::invalid_argument("phantom: region parameters must be positive");
    }
}

std::vector<int> phantom_mask(Grid grid, PhantomLayout layout) {
    const double m = static_cast<double>(std::min(grid.height, grid.width));
    const double radius = 0.3 * m;
    const double cy = 0.5 * (static_cast<double>(grid.height) - 1.0);
    const double cx = 0.5 * (static_cast<double>(grid.width) - 1.0);
    // Corner square clear of the disc.
    const double sq_lo = 0.04 * m;
    const double sq_hi = 0.18 * m;
    std::vector<int> mask(grid.size(), 1);
    for (std::size_t r = 0; r < grid.height; ++r) {
        for (std::size_t c = 0; c < grid.width; ++c) {
            const double dy = static_cast<double>(r) - cy;
            const double dx = static_cast<double>(c) - cx;
            int label = 1;
            if (dy * dy + dx * dx <= radius * radius) label = 2;
            if (layout == PhantomLayout::three_region) {
                const double rr = static_cast<double>(r), cc = static_cast<double>(c);
                if (rr >= sq_lo && rr < sq_hi && cc >= sq_lo && cc < sq_hi) label = 3;
            }
            mask[r * grid.width + c] = label;
        }
    }
    return mask;
}

Phantom make_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    Phantom ph;
    ph.grid = spec.grid;
    ph.regions = spec.regions;
    ph.mask = phantom_mask(spec.grid, spec.layout);
    const std::size_t n = spec.grid.size();
    ph.x.resize(n);
    ph.p.resize(n);
    ph.beta.resize(n);
    Philox rng = stream_rng(seed, Stream::phantom);
    // One block of draws per region, consumed in raster order.
    for (std::size_t j = 0; j < spec.regions.size(); ++j) {
        const int label = static_cast<int>(j) + 1;
        const std::size_t count = static_cast<std::size_t>(std::count(ph.mask.begin(), ph.mask.end(), label));
        const RegionParams& rp = spec.regions[j];
        const Vec draws = sample_ggd(rp.shape, rp.alpha, count, rng);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ph.mask[i] != label) continue;
            ph.x[i] = draws[k++];
            ph.p[i] = rp.shape;
            ph.beta[i] = rp.beta();
        }
    }
    return ph;
}

// ---------------------------------------------------------------------------

Vec degrade(std::span<const double> x, const ConvOperator& conv, double noise_std, std::uint64_t seed) {
    if (!(noise_std >= 0.0)) throw std::invalid_argument("degrade: noise level must be nonnegative");
    Vec y = conv.apply(x);
    if (noise_std == 0.0) return y;
    Philox rng = stream_rng(seed, Stream::noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : y) v += noise_std * normal(rng);
    return y;
}

Vec wiener_init(std::span<const double> y, const ConvOperator& conv, double noise_std, double power_floor) {
    same_length(y.size(), conv.grid().size(), "wiener_init");
    const double n = static_cast<double>(y.size());
    // Parseval: mean_k |Y_k|^2 / n equals the mean squared pixel value.
    const double ps = std::max(dot(y, y) / n - noise_std * noise_std, power_floor);
    const double reg = noise_std * noise_std / ps;
    Spectrum spec = conv.fft().forward(y);
    const Spectrum& k = conv.transfer();
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double den = std::norm(k[i]) + reg;
        spec[i] = den > 0.0 ? std::conj(k[i]) * spec[i] / den : std::complex<double>(0.0, 0.0);
    }
    return conv.fft().inverse(spec);
}

State init_state(std::span<const double> y, const ConvOperator& conv, const Hyperparams& hyper, std::uint64_t seed) {
    hyper.validate();
    State s;
    s.x = wiener_init(y, conv, hyper.noise_std);
    const std::size_t n = y.size();
    s.p.resize(n);
    s.beta.resize(n);
    Philox rng = stream_rng(seed, Stream::init);
    std::normal_distribution<double> normal(hyper.mu_beta, 1.0);
    for (std::size_t i = 0; i < n; ++i) s.p[i] = std::clamp(0.5 + rng.uniform(), hyper.shape_min, hyper.shape_max);
    for (std::size_t i = 0; i < n; ++i) s.beta[i] = normal(rng);
    return s;
}

// ---------------------------------------------------------------------------

namespace {

// sum_k S_k^2 / N_k over nonempty classes, with S, N exact integer sums of
// bin index and count; equal to the between-class variance up to an affine
// change that does not move the argmax.
double class_score(const std::vector<double>& cnt_prefix, const std::vector<double>& sum_prefix,
                   const std::vector<int>& bounds) {
    double score = 0.0;
    int lo = 0;
    for (std::size_t k = 0; k <= bounds.size(); ++k) {
        const int hi = k < bounds.size() ? bounds[k] + 1 : kOtsuBins;
        const double nk = cnt_prefix[hi] - cnt_prefix[lo];
        const double sk = sum_prefix[hi] - sum_prefix[lo];
        if (nk > 0.0) score += sk * sk / nk;
        lo = hi;
    }
    return score;
}

}  // namespace

OtsuResult otsu(std::span<const double> values, int levels) {
    if (levels < 2 || levels > kOtsuMaxLevels) {
        throw std::invalid_argument("otsu: levels must lie in [2, " + std::to_string(kOtsuMaxLevels) + "]");
    }
    if (values.empty()) throw std::invalid_argument("otsu: empty input");
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    if (!std::isfinite(mn) || !std::isfinite(mx)) throw std::invalid_argument("otsu: non-finite input");
    OtsuResult res;
    if (mx == mn) {
        res.thresholds.assign(static_cast<std::size_t>(levels - 1), mn);
        res.cuts.assign(static_cast<std::size_t>(levels - 1), kOtsuBins - 1);
        return res;
    }
    const double width = (mx - mn) / kOtsuBins;
    std::vector<double> hist(kOtsuBins, 0.0);
    for (double v : values) {
        const int b = std::min(kOtsuBins - 1, static_cast<int>((v - mn) / width));
        hist[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<double> cnt(kOtsuBins + 1, 0.0), sum(kOtsuBins + 1, 0.0);
    for (int b = 0; b < kOtsuBins; ++b) {
        cnt[b + 1] = cnt[b] + hist[b];
        sum[b + 1] = sum[b] + hist[b] * b;
    }

    const int m = levels - 1;
    std::vector<int> cur(m), best;
    double best_score = -1.0;
    // Enumerate strictly increasing cut tuples in lexicographic order.
    std::iota(cur.begin(), cur.end(), 0);
    while (true) {
        const double s = class_score(cnt, sum, cur);
        if (s > best_score) {
            best_score = s;
            best = cur;
        }
        int k = m - 1;
        while (k >= 0 && cur[k] == kOtsuBins - 1 - (m - k)) --k;
        if (k < 0) break;
        ++cur[k];
        for (int j = k + 1; j < m; ++j) cur[j] = cur[j - 1] + 1;
    }
    res.cuts = best;
    for (int c : best) res.thresholds.push_back(mn + (c + 1) * width);
    return res;
}

Vec otsu_thresholds(std::span<const double> values, int levels) { return otsu(values, levels).thresholds; }

std::vector<int> quantize(std::span<const double> values, std::span<const double> thresholds) {
    std::vector<int> labels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        int l = 1;
        for (double t : thresholds) l += t < values[i] ? 1 : 0;
        labels[i] = l;
    }
    return labels;
}

// ---------------------------------------------------------------------------

double psnr_peak(std::span<const double> x, std::span<const double> xhat) {
    same_length(x.size(), xhat.size(), "psnr");
    if (x.empty()) throw std::invalid_argument("psnr: empty input");
    double err = 0.0;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - xhat[i];
        err += d * d;
        peak = std::max({peak, x[i], xhat[i]});
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(x.size()) * peak * peak / err);
}

double psnr_range(std::span<const double> x, std::span<const double> xhat) {
    same_length(x.size(), xhat.size(), "psnr");
    if (x.empty()) throw std::invalid_argument("psnr: empty input");
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err += (x[i] - xhat[i]) * (x[i] - xhat[i]);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double range = *mx - *mn;
    return 10.0 * std::log10(range * range * static_cast<double>(x.size()) / err);
}

double ssim(std::span<const double> x, std::span<const double> xhat, Grid grid) {
    same_length(x.size(), xhat.size(), "ssim");
    same_length(x.size(), grid.size(), "ssim");
    constexpr std::size_t win = 8;
    if (grid.height < win || grid.width < win) throw std::invalid_argument("ssim: image smaller than the 8x8 window");
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double range = *mx - *mn;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    const double npix = static_cast<double>(win * win);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r0 = 0; r0 + win <= grid.height; ++r0) {
        for (std::size_t c0 = 0; c0 + win <= grid.width; ++c0) {
            double sa = 0, sb = 0;
            for (std::size_t r = r0; r < r0 + win; ++r) {
                for (std::size_t c = c0; c < c0 + win; ++c) {
                    sa += x[r * grid.width + c];
                    sb += xhat[r * grid.width + c];
                }
            }
            const double ma = sa / npix, mb = sb / npix;
            double vaa = 0, vbb = 0, vab = 0;
            for (std::size_t r = r0; r < r0 + win; ++r) {
                for (std::size_t c = c0; c < c0 + win; ++c) {
                    const double a = x[r * grid.width + c] - ma;
                    const double b = xhat[r * grid.width + c] - mb;
                    vaa += a * a;
                    vbb += b * b;
                    vab += a * b;
                }
            }
            vaa /= npix - 1.0;
            vbb /= npix - 1.0;
            vab /= npix - 1.0;
            const double num = (2 * ma * mb + c1) * (2 * vab + c2);
            const double den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
            total += den > 0.0 ? num / den : 1.0;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

double overall_accuracy(std::span<const int> ref, std::span<const int> est) {
    same_length(ref.size(), est.size(), "overall_accuracy");
    if (ref.empty()) throw std::invalid_argument("overall_accuracy: empty input");
    std::set<int> rl(ref.begin(), ref.end()), el(est.begin(), est.end());
    const std::vector<int> rv(rl.begin(), rl.end()), ev(el.begin(), el.end());
    const std::size_t k = std::max(rv.size(), ev.size());
    if (k > 9) throw std::invalid_argument("overall_accuracy: more than 9 distinct labels");
    // Confusion matrix padded to k x k.
    std::vector<double> conf(k * k, 0.0);
    auto index_of = [](const std::vector<int>& v, int l) {
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), l) - v.begin());
    };
    for (std::size_t i = 0; i < ref.size(); ++i) conf[index_of(rv, ref[i]) * k + index_of(ev, est[i])] += 1.0;
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        double agree = 0.0;
        for (std::size_t r = 0; r < k; ++r) agree += conf[r * k + perm[r]];
        best = std::max(best, agree);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return 100.0 * best / static_cast<double>(ref.size());
}

}  // namespace ggdseg
