#pragma once

#include "ggdseg/linops.hpp"
#include "ggdseg/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ggdseg {

struct StoppingCriteria {
    int outer_max = 10000;
    double outer_rel_state = 1e-4;
    double outer_rel_obj = 1e-4;
    int mm_max = 300;
    double mm_rel = 1e-3;
    int dfb_max = 300;
    double dfb_rel = 1e-3;
    int pd_max = 200;
    double pd_rel = 1e-3;

    void validate() const;
};

// Dual variables of the two primal-dual loops, carried across outer
// iterations, plus the dual of the x-step forward-backward loop.
struct DualState {
    GradField shape_tv;  // v1
    Vec shape_sep;       // v2
    GradField scale_tv;  // v
    Vec image;           // w of the dual forward-backward loop

    static DualState zeros(std::size_t n);
};

enum class Block { x, p, beta };

const char* to_string(Block b);

struct DecreaseCheck {
    bool ok = true;
    // theta(before) - theta(after) - |after - before|^2_metric / 2
    double margin = 0.0;
};

struct TraceRow {
    int iter = 0;
    double objective = 0.0;
    double rel_x = 0.0;
    double rel_p = 0.0;
    double rel_beta = 0.0;
    bool decrease_ok = true;
    double seconds = 0.0;

    double margin_x = 0.0;
    double margin_p = 0.0;
    double margin_beta = 0.0;
    int mm_iters = 0;
    int dfb_iters = 0;
    int pd_p_iters = 0;
    int pd_beta_iters = 0;
    MetricMode metric = MetricMode::lipschitz;
};

struct Trace {
    std::vector<TraceRow> rows;
    std::vector<std::string> events;

    // Columns: iter, objective, relchange_x, relchange_p, relchange_beta,
    // decrease_ok, seconds. With `timing` off the seconds column is written
    // as 0 so that identical runs produce identical files.
    void write_csv(std::ostream& os, bool timing) const;
};

struct SolverOptions {
    // Relative slack of the per-block decrease checks.
    double decrease_tol = 1e-11;
    // When a p or beta candidate fails its decrease check, the primal-dual
    // loop is resumed from it this many times, each with a tenfold tighter
    // relative tolerance, before the block update is rejected.
    int block_retries = 2;
    // Power-iteration settings for operator norms.
    int norm_iters = 100;
    double norm_tol = 1e-8;
};

// Everything that stays fixed during one solve.
class Problem {
public:
    Problem(Vec y, std::shared_ptr<const ConvOperator> conv, Hyperparams hyper, std::uint64_t seed = 1,
            SolverOptions options = {});

    const Vec& y() const { return y_; }
    const ConvOperator& conv() const { return *conv_; }
    const std::shared_ptr<const ConvOperator>& conv_ptr() const { return conv_; }
    const GradOperator& grad() const { return grad_; }
    const Hyperparams& hyper() const { return hyper_; }
    const SolverOptions& options() const { return options_; }
    // Inflated estimate of |||D|||.
    double grad_norm() const { return grad_norm_; }
    Preconditioner make_preconditioner(MetricMode mode) const;

    double objective(const State& s) const { return eval_objective(s, y_, *conv_, hyper_); }

private:
    Vec y_;
    std::shared_ptr<const ConvOperator> conv_;
    GradOperator grad_;
    Hyperparams hyper_;
    SolverOptions options_;
    double grad_norm_ = 0.0;
};

// Separable convex majorant of q(., p, beta) around v. Pixels with p >= 1
// keep their exact term weight * C(x)^p; the others use the tangent bound,
// whose x-dependent part is weight * C(x).
struct Majorant {
    Vec weight;
    Vec power;      // exponent of C for exact terms
    std::vector<char> linearized;

    static Majorant build(std::span<const double> v, std::span<const double> p, std::span<const double> beta,
                          const HuberParams& d);
    static Majorant zero(std::size_t n);
    std::size_t size() const { return weight.size(); }
};

// Componentwise prox of scale * majorant at z.
Vec majorant_prox(const Majorant& m, std::span<const double> z, double scale, const HuberParams& d);

struct DfbResult {
    Vec u;
    int iterations = 0;
};

// Dual forward-backward computation of
//   argmin_u  |u - target|^2_M / 2 + gamma0 * qbar(u)
// with M = metric.inverse_apply. `dual` is warm-started and updated in
// place. eta must lie in (0, 2 / |||metric.apply|||).
DfbResult dfb_prox(std::span<const double> target, const Majorant& m, const Preconditioner& metric, double gamma0,
                   double eta, const StoppingCriteria& stop, const HuberParams& d, Vec& dual);

struct StepXResult {
    Vec x;
    int mm_iters = 0;
    int dfb_iters = 0;
};

// Preconditioned forward step followed by the MM approximation of the
// metric prox of gamma0 * q(., p, beta). MM passes that fail to decrease the
// prox objective are discarded.
StepXResult step_x(const State& s, const Problem& prob, const Preconditioner& metric, const StoppingCriteria& stop,
                   Vec& dual);

struct StepResult {
    Vec value;
    int iterations = 0;
};

// Primal-dual loop for min_{p in [a,b]^n} psi(p) + lambda * TV(p), with
// psi built around (x, beta, p_prev). The primal iterate starts at `start`
// (p_prev when empty).
StepResult step_p(std::span<const double> p_prev, std::span<const double> x, std::span<const double> beta,
                  const Problem& prob, const StoppingCriteria& stop, GradField& v1, Vec& v2,
                  std::span<const double> start = {});

// Primal-dual loop for min_beta phi(beta) + zeta * TV(beta).
StepResult step_beta(std::span<const double> beta_prev, std::span<const double> x, std::span<const double> p,
                     const Problem& prob, const StoppingCriteria& stop, GradField& v,
                     std::span<const double> start = {});

// Per-block sufficient-decrease inequality on the full objective:
//   theta(after) + |after_b - before_b|^2_W / 2 <= theta(before)
// with W = (1/gamma0 - 1) M for x, I / gamma1 for p and I / gamma2 for beta.
// `after` must differ from `before` only in `block`.
DecreaseCheck check_block_decrease(const State& before, const State& after, Block block, const Problem& prob,
                                   const Preconditioner& metric);

struct SolveResult {
    State state;
    Trace trace;
    DualState duals;
    MetricMode final_metric = MetricMode::lipschitz;
};

SolveResult solve(const Problem& prob, const State& init, const StoppingCriteria& stop);

double relative_change(std::span<const double> next, std::span<const double> prev);

}  // namespace ggdseg
