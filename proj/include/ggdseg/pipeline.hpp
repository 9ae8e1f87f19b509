#pragma once

#include "ggdseg/linops.hpp"
#include "ggdseg/model.hpp"
#include "ggdseg/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ggdseg {

// Seed streams; each stochastic stage draws from its own Philox stream so
// that changing one stage never shifts the numbers seen by another.
enum class Stream : std::uint64_t { phantom = 1, noise = 2, init = 3, norm = 4 };

// ---- sampling -------------------------------------------------------------

// i.i.d. draws from the density proportional to exp(-|t|^p / alpha):
// t = s (alpha g)^{1/p}, g ~ Gamma(1/p, 1), s = +-1.
Vec sample_ggd(double p, double alpha, std::size_t count, Philox& rng);
Vec sample_ggd(double p, double alpha, std::size_t count, std::uint64_t seed);

// ---- phantom --------------------------------------------------------------

struct RegionParams {
    double shape = 1.0;  // p
    double alpha = 1.0;  // GGD scale

    double beta() const;  // ln(alpha) / p
};

enum class PhantomLayout { two_region, three_region };

const char* to_string(PhantomLayout layout);
PhantomLayout phantom_layout_from_string(const std::string& name);

struct PhantomSpec {
    Grid grid{64, 64};
    PhantomLayout layout = PhantomLayout::two_region;
    // Region 1 is the background, region 2 the centred disc, region 3 the
    // corner square of the three-region layout. Defaults: (p, alpha) =
    // (2, e^2) and (1, e^-1), i.e. beta = 1 and -1.
    std::vector<RegionParams> regions{{2.0, 7.38905609893065}, {1.0, 0.36787944117144233}};

    void validate() const;
};

struct Phantom {
    Grid grid;
    std::vector<int> mask;  // region label per pixel, 1-based
    std::vector<RegionParams> regions;
    Vec x;
    Vec p;
    Vec beta;
};

// Region geometry only.
std::vector<int> phantom_mask(Grid grid, PhantomLayout layout);
Phantom make_phantom(const PhantomSpec& spec, std::uint64_t seed);

// ---- degradation and initialisation ----------------------------------------

// y = K x + noise_std * N(0, 1).
Vec degrade(std::span<const double> x, const ConvOperator& conv, double noise_std, std::uint64_t seed);

// conj(K) Y / (|K|^2 + noise_std^2 / Ps), Ps = max(mean |Y|^2 / n - noise_std^2, floor).
Vec wiener_init(std::span<const double> y, const ConvOperator& conv, double noise_std, double power_floor = 1e-12);

// x from the Wiener filter, p ~ U[0.5, 1.5] clipped to [a, b],
// beta ~ N(mu_beta, 1).
State init_state(std::span<const double> y, const ConvOperator& conv, const Hyperparams& hyper, std::uint64_t seed);

// ---- segmentation ---------------------------------------------------------

inline constexpr int kOtsuBins = 256;
inline constexpr int kOtsuMaxLevels = 4;

struct OtsuResult {
    Vec thresholds;         // L - 1 increasing values
    std::vector<int> cuts;  // last bin index of each lower class
};

// Multi-level Otsu on a 256-bin histogram spanning [min, max]. Exhaustive
// search over cut tuples; ties go to the lexicographically smallest tuple.
// Constant input gives L - 1 copies of the constant (every pixel in class 1).
// Throws std::invalid_argument for L outside [2, 4] or empty input.
OtsuResult otsu(std::span<const double> values, int levels);
Vec otsu_thresholds(std::span<const double> values, int levels);

// 1 + number of thresholds strictly below each value.
std::vector<int> quantize(std::span<const double> values, std::span<const double> thresholds);

// ---- metrics ----------------------------------------------------------------

// 10 log10(n max(x u xhat)^2 / |x - xhat|^2); +inf when the images agree.
double psnr_peak(std::span<const double> x, std::span<const double> xhat);
// Conventional 10 log10(R^2 / MSE) with R the dynamic range of x.
double psnr_range(std::span<const double> x, std::span<const double> xhat);
// Mean SSIM over all 8x8 windows, constants (0.01 R)^2 and (0.03 R)^2 with R
// the dynamic range of x; sample (co)variances.
double ssim(std::span<const double> x, std::span<const double> xhat, Grid grid);
// Percentage of pixels whose label agrees after the best one-to-one label
// matching (exhaustive over permutations, at most 9 distinct labels).
double overall_accuracy(std::span<const int> ref, std::span<const int> est);

}  // namespace ggdseg
