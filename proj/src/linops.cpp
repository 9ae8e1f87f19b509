#include "ggdseg/linops.hpp"

#include "ggdseg/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

namespace ggdseg {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void check_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                                    " vs " + std::to_string(want) + ")");
    }
}

}  // namespace

Psf gaussian_psf(int side, double std_dev) {
    if (side <= 0 || side % 2 == 0) throw std::invalid_argument("gaussian_psf: side must be a positive odd integer");
    if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian_psf: std must be positive");
    Psf psf;
    psf.rows = psf.cols = static_cast<std::size_t>(side);
    psf.values.resize(psf.rows * psf.cols);
    const int c = side / 2;
    const double denom = 2.0 * std_dev * std_dev;
    double sum = 0.0;
    for (int r = 0; r < side; ++r) {
        for (int k = 0; k < side; ++k) {
            const double d2 = static_cast<double>((r - c) * (r - c) + (k - c) * (k - c));
            const double v = std::exp(-d2 / denom);
            psf.values[static_cast<std::size_t>(r * side + k)] = v;
            sum += v;
        }
    }
    for (double& v : psf.values) v /= sum;
    return psf;
}

Psf delta_psf() { return Psf{1, 1, {1.0}}; }

// ---------------------------------------------------------------------------

Fft2d::Fft2d(Grid grid) : grid_(grid) {
    if (grid.height == 0 || grid.width == 0) throw std::invalid_argument("Fft2d: empty grid");
    const int h = static_cast<int>(grid.height);
    const int w = static_cast<int>(grid.width);
    Vec real(grid.size());
    Spectrum cplx(spectrum_size());
    auto* cp = reinterpret_cast<fftw_complex*>(cplx.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward_plan_ = fftw_plan_dft_r2c_2d(h, w, real.data(), cp, flags);
    inverse_plan_ = fftw_plan_dft_c2r_2d(h, w, cp, real.data(), flags);
    if (!forward_plan_ || !inverse_plan_) throw std::runtime_error("Fft2d: FFTW planning failed");
}

Fft2d::~Fft2d() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

Spectrum Fft2d::forward(std::span<const double> image) const {
    check_size(image.size(), grid_.size(), "Fft2d::forward");
    Vec in(image.begin(), image.end());
    Spectrum out(spectrum_size());
    fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

Vec Fft2d::inverse(std::span<const std::complex<double>> spectrum) const {
    check_size(spectrum.size(), spectrum_size(), "Fft2d::inverse");
    // c2r transforms overwrite their input.
    Spectrum in(spectrum.begin(), spectrum.end());
    Vec out(grid_.size());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (double& v : out) v *= scale;
    return out;
}

// ---------------------------------------------------------------------------

ConvOperator::ConvOperator(Psf psf, Grid grid)
    : psf_(std::move(psf)), grid_(grid), fft_(std::make_shared<Fft2d>(grid)) {
    if (psf_.rows % 2 == 0 || psf_.cols % 2 == 0) throw std::invalid_argument("ConvOperator: psf sides must be odd");
    if (psf_.values.size() != psf_.rows * psf_.cols) throw std::invalid_argument("ConvOperator: malformed psf");
    // Embed the kernel with its centre at the origin of the periodic grid.
    Vec embedded(grid_.size(), 0.0);
    const long cr = static_cast<long>(psf_.rows / 2);
    const long cc = static_cast<long>(psf_.cols / 2);
    const long h = static_cast<long>(grid_.height);
    const long w = static_cast<long>(grid_.width);
    for (long r = 0; r < static_cast<long>(psf_.rows); ++r) {
        for (long c = 0; c < static_cast<long>(psf_.cols); ++c) {
            const long i = (((r - cr) % h) + h) % h;
            const long j = (((c - cc) % w) + w) % w;
            embedded[static_cast<std::size_t>(i * w + j)] += psf_.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        }
    }
    transfer_ = fft_->forward(embedded);
}

Vec ConvOperator::apply(std::span<const double> x) const {
    check_size(x.size(), grid_.size(), "conv_apply");
    Spectrum s = fft_->forward(x);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= transfer_[k];
    return fft_->inverse(s);
}

Vec ConvOperator::adjoint(std::span<const double> y) const {
    check_size(y.size(), grid_.size(), "conv_adjoint");
    Spectrum s = fft_->forward(y);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= std::conj(transfer_[k]);
    return fft_->inverse(s);
}

Vec ConvOperator::filter(std::span<const double> x, std::span<const double> gain) const {
    check_size(x.size(), grid_.size(), "filter");
    check_size(gain.size(), transfer_.size(), "filter gain");
    Spectrum s = fft_->forward(x);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= gain[k];
    return fft_->inverse(s);
}

// ---------------------------------------------------------------------------

GradField GradOperator::apply(std::span<const double> u) const {
    check_size(u.size(), grid_.size(), "grad_apply");
    const std::size_t h = grid_.height, w = grid_.width;
    GradField g(u.size());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t k = i * w + j;
            if (j + 1 < w) g.horizontal[k] = u[k + 1] - u[k];
            if (i + 1 < h) g.vertical[k] = u[k + w] - u[k];
        }
    }
    return g;
}

Vec GradOperator::adjoint(const GradField& v) const {
    check_size(v.horizontal.size(), grid_.size(), "grad_adjoint");
    check_size(v.vertical.size(), grid_.size(), "grad_adjoint");
    const std::size_t h = grid_.height, w = grid_.width;
    Vec out(grid_.size(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t k = i * w + j;
            double acc = 0.0;
            if (j + 1 < w) acc -= v.horizontal[k];
            if (j > 0) acc += v.horizontal[k - 1];
            if (i + 1 < h) acc -= v.vertical[k];
            if (i > 0) acc += v.vertical[k - w];
            out[k] = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

const char* to_string(MetricMode mode) { return mode == MetricMode::fourier ? "fourier" : "lipschitz"; }

MetricMode metric_mode_from_string(const std::string& name) {
    if (name == "fourier") return MetricMode::fourier;
    if (name == "lipschitz") return MetricMode::lipschitz;
    throw std::invalid_argument("unknown metric mode '" + name + "' (expected lipschitz|fourier)");
}

Preconditioner Preconditioner::fourier(std::shared_ptr<const ConvOperator> conv, double noise_std, double mu) {
    if (!(noise_std > 0.0)) throw std::invalid_argument("Preconditioner: noise std must be positive");
    if (!(mu > 0.0)) throw std::invalid_argument("Preconditioner: mu must be positive");
    Preconditioner p;
    p.mode_ = MetricMode::fourier;
    const double s2 = noise_std * noise_std;
    const auto& t = conv->transfer();
    p.gain_.resize(t.size());
    p.inverse_gain_.resize(t.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double kmax = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double mag2 = std::norm(t[k]);
        kmax = std::max(kmax, mag2);
        p.gain_[k] = s2 / (mag2 + mu);
        p.inverse_gain_[k] = (mag2 + mu) / s2;
        lo = std::min(lo, p.gain_[k]);
        hi = std::max(hi, p.gain_[k]);
    }
    p.lo_ = lo;
    p.hi_ = hi;
    p.lipschitz_ = kmax / s2;
    p.conv_ = std::move(conv);
    return p;
}

Preconditioner Preconditioner::lipschitz(std::shared_ptr<const ConvOperator> conv, double noise_std) {
    if (!(noise_std > 0.0)) throw std::invalid_argument("Preconditioner: noise std must be positive");
    Preconditioner p;
    p.mode_ = MetricMode::lipschitz;
    // |||K|||^2 is the largest |K_hat|^2 for a circulant operator.
    double kmax = 0.0;
    for (const auto& c : conv->transfer()) kmax = std::max(kmax, std::norm(c));
    if (!(kmax > 0.0)) throw std::invalid_argument("Preconditioner: zero convolution operator");
    p.lipschitz_ = kmax / (noise_std * noise_std);
    p.scale_ = 1.0 / p.lipschitz_;
    p.lo_ = p.hi_ = p.scale_;
    p.conv_ = std::move(conv);
    return p;
}

Vec Preconditioner::apply(std::span<const double> u) const {
    check_size(u.size(), conv_->grid().size(), "precond_apply");
    if (mode_ == MetricMode::fourier) return conv_->filter(u, gain_);
    Vec out(u.begin(), u.end());
    for (double& v : out) v *= scale_;
    return out;
}

Vec Preconditioner::inverse_apply(std::span<const double> u) const {
    check_size(u.size(), conv_->grid().size(), "precond_inv_apply");
    if (mode_ == MetricMode::fourier) return conv_->filter(u, inverse_gain_);
    Vec out(u.begin(), u.end());
    for (double& v : out) v *= lipschitz_;
    return out;
}

// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
    check_size(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double dot(const GradField& a, const GradField& b) { return dot(a.horizontal, b.horizontal) + dot(a.vertical, b.vertical); }

double op_norm(const LinearMap& apply, const LinearMap& adjoint, std::size_t dim, int max_iters, double tol,
               std::uint64_t seed) {
    Vec v(dim);
    Philox rng(seed);
    for (double& x : v) x = rng.uniform() - 0.5;
    double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    double estimate = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vec w = adjoint(apply(v));
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        const double next = std::sqrt(nw);
        for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / nw;
        const bool done = it > 0 && std::abs(next - estimate) <= tol * next;
        estimate = next;
        if (done) break;
    }
    return estimate;
}

double grad_op_norm(const GradOperator& grad, int max_iters, double tol) {
    return op_norm([&](std::span<const double> u) {
                       GradField g = grad.apply(u);
                       Vec stacked(g.horizontal);
                       stacked.insert(stacked.end(), g.vertical.begin(), g.vertical.end());
                       return stacked;
                   },
                   [&](std::span<const double> s) {
                       const std::size_t n = grad.grid().size();
                       GradField g;
                       g.horizontal.assign(s.begin(), s.begin() + static_cast<long>(n));
                       g.vertical.assign(s.begin() + static_cast<long>(n), s.end());
                       return grad.adjoint(g);
                   },
                   grad.grid().size(), max_iters, tol);
}

}  // namespace ggdseg
