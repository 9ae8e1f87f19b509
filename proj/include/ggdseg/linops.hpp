#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ggdseg {

using Vec = std::vector<double>;
using Spectrum = std::vector<std::complex<double>>;

// Image grid; pixels are stored row-major, index = row * width + col.
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return height * width; }
    bool operator==(const Grid&) const = default;
};

// Per-pixel 2D vector field, e.g. the discrete gradient of an image.
struct GradField {
    Vec horizontal;
    Vec vertical;

    GradField() = default;
    explicit GradField(std::size_t n) : horizontal(n, 0.0), vertical(n, 0.0) {}
    std::size_t size() const { return horizontal.size(); }
};

// Small dense 2D kernel, row-major.
struct Psf {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Isotropic sampled Gaussian normalised to unit sum. `side` must be odd.
Psf gaussian_psf(int side, double std_dev);

// Single-tap identity kernel.
Psf delta_psf();

// 2D real-to-complex FFT on a fixed grid. Plans are built once under a
// global planner lock; transforms run on caller-owned buffers and are safe
// to call concurrently.
class Fft2d {
public:
    explicit Fft2d(Grid grid);
    ~Fft2d();
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    const Grid& grid() const { return grid_; }
    // Number of stored half-spectrum coefficients, height * (width / 2 + 1).
    std::size_t spectrum_size() const { return grid_.height * (grid_.width / 2 + 1); }

    Spectrum forward(std::span<const double> image) const;
    // Unnormalised inverse followed by division by n, so inverse(forward(x)) == x.
    Vec inverse(std::span<const std::complex<double>> spectrum) const;

private:
    Grid grid_;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

// Circular convolution y = k * x on a periodic grid.
class ConvOperator {
public:
    ConvOperator(Psf psf, Grid grid);

    Vec apply(std::span<const double> x) const;
    Vec adjoint(std::span<const double> y) const;

    const Grid& grid() const { return grid_; }
    const Psf& psf() const { return psf_; }
    const Spectrum& transfer() const { return transfer_; }
    const Fft2d& fft() const { return *fft_; }

    // Multiply a half spectrum pointwise and transform back.
    Vec filter(std::span<const double> x, std::span<const double> gain) const;

private:
    Psf psf_;
    Grid grid_;
    std::shared_ptr<const Fft2d> fft_;
    Spectrum transfer_;
};

// Forward differences with Neumann boundary: the last column (row) has zero
// horizontal (vertical) difference.
class GradOperator {
public:
    explicit GradOperator(Grid grid) : grid_(grid) {}

    GradField apply(std::span<const double> u) const;
    Vec adjoint(const GradField& v) const;

    const Grid& grid() const { return grid_; }

private:
    Grid grid_;
};

enum class MetricMode { lipschitz, fourier };

const char* to_string(MetricMode mode);
MetricMode metric_mode_from_string(const std::string& name);

// Variable metric of the x-step. `apply` is the inverse metric applied to the
// gradient in the forward step and inside the dual forward-backward loop;
// `inverse_apply` is the metric itself.
//   fourier:   apply = sigma^2 (K^T K + mu I)^{-1}
//   lipschitz: apply = 1 / L_f with L_f = |||K|||^2 / sigma^2
class Preconditioner {
public:
    static Preconditioner fourier(std::shared_ptr<const ConvOperator> conv, double noise_std, double mu = 0.1);
    static Preconditioner lipschitz(std::shared_ptr<const ConvOperator> conv, double noise_std);

    Vec apply(std::span<const double> u) const;
    Vec inverse_apply(std::span<const double> u) const;

    MetricMode mode() const { return mode_; }
    // Extreme eigenvalues of `apply`.
    double min_eigenvalue() const { return lo_; }
    double max_eigenvalue() const { return hi_; }
    // |||apply|||, i.e. the largest eigenvalue.
    double norm() const { return hi_; }
    double lipschitz_constant() const { return lipschitz_; }

private:
    Preconditioner() = default;

    MetricMode mode_ = MetricMode::lipschitz;
    std::shared_ptr<const ConvOperator> conv_;
    Vec gain_;          // fourier: sigma^2 / (|K|^2 + mu)
    Vec inverse_gain_;  // fourier: (|K|^2 + mu) / sigma^2
    double scale_ = 1.0;  // lipschitz: 1 / L_f
    double lipschitz_ = 0.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

using LinearMap = std::function<Vec(std::span<const double>)>;

// Spectral norm by power iteration on adjoint(apply(.)), from a seeded
// pseudo-random start vector. Returns the raw estimate; callers inflate it
// before deriving step sizes.
double op_norm(const LinearMap& apply, const LinearMap& adjoint, std::size_t dim, int max_iters = 100,
               double tol = 1e-8, std::uint64_t seed = 1);

double grad_op_norm(const GradOperator& grad, int max_iters = 100, double tol = 1e-8);

// Safety factor applied to estimated norms before they enter step sizes.
inline constexpr double kNormInflation = 1.01;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double dot(const GradField& a, const GradField& b);

}  // namespace ggdseg
