#include "ggdseg/solver.hpp"

#include "ggdseg/prox.hpp"
#include "ggdseg/specfun.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ggdseg {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(std::string("StoppingCriteria: ") + msg);
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sq_norm(std::span<const double> a) { return dot(a, a); }

// 0.5 |u - target|^2_M + gamma0 q(u)
double x_prox_objective(std::span<const double> u, std::span<const double> target, std::span<const double> p,
                        std::span<const double> beta, const Preconditioner& metric, double gamma0,
                        const HuberParams& d) {
    Vec diff(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - target[i];
    const Vec mdiff = metric.inverse_apply(diff);
    return 0.5 * dot(diff, mdiff) + gamma0 * eval_q(u, p, beta, d);
}

}  // namespace

void StoppingCriteria::validate() const {
    require(outer_max >= 0, "outer_max must be nonnegative");
    require(mm_max > 0 && dfb_max > 0 && pd_max > 0, "inner iteration caps must be positive");
    require(outer_rel_state > 0.0 && outer_rel_obj > 0.0, "outer thresholds must be positive");
    require(mm_rel > 0.0 && dfb_rel > 0.0 && pd_rel > 0.0, "inner thresholds must be positive");
}

DualState DualState::zeros(std::size_t n) {
    DualState d;
    d.shape_tv = GradField(n);
    d.shape_sep.assign(n, 0.0);
    d.scale_tv = GradField(n);
    d.image.assign(n, 0.0);
    return d;
}

const char* to_string(Block b) {
    switch (b) {
        case Block::x: return "x";
        case Block::p: return "p";
        case Block::beta: return "beta";
    }
    return "?";
}

double relative_change(std::span<const double> next, std::span<const double> prev) {
    const double den = std::sqrt(sq_norm(prev));
    const double num = std::sqrt(sq_dist(next, prev));
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

void Trace::write_csv(std::ostream& os, bool timing) const {
    os << "iter,objective,relchange_x,relchange_p,relchange_beta,decrease_ok,seconds\n";
    const auto old_precision = os.precision(17);
    for (const auto& r : rows) {
        os << r.iter << ',' << r.objective << ',' << r.rel_x << ',' << r.rel_p << ',' << r.rel_beta << ','
           << (r.decrease_ok ? 1 : 0) << ',' << (timing ? r.seconds : 0.0) << '\n';
    }
    os.precision(old_precision);
}

// ---------------------------------------------------------------------------

Problem::Problem(Vec y, std::shared_ptr<const ConvOperator> conv, Hyperparams hyper, std::uint64_t seed,
                 SolverOptions options)
    : y_(std::move(y)), conv_(std::move(conv)), grad_(conv_->grid()), hyper_(hyper), options_(options) {
    hyper_.validate();
    if (y_.size() != conv_->grid().size()) throw std::invalid_argument("Problem: observation size does not match grid");
    for (double v : y_) {
        if (!std::isfinite(v)) throw std::invalid_argument("Problem: observation has non-finite entries");
    }
    const double raw = op_norm(
        [&](std::span<const double> u) {
            GradField g = grad_.apply(u);
            Vec s(g.horizontal);
            s.insert(s.end(), g.vertical.begin(), g.vertical.end());
            return s;
        },
        [&](std::span<const double> s) {
            const std::size_t n = grad_.grid().size();
            GradField g;
            g.horizontal.assign(s.begin(), s.begin() + static_cast<long>(n));
            g.vertical.assign(s.begin() + static_cast<long>(n), s.end());
            return grad_.adjoint(g);
        },
        grad_.grid().size(), options_.norm_iters, options_.norm_tol, seed);
    grad_norm_ = std::max(raw * kNormInflation, 1e-3);
}

Preconditioner Problem::make_preconditioner(MetricMode mode) const {
    return mode == MetricMode::fourier ? Preconditioner::fourier(conv_, hyper_.noise_std, hyper_.precond_mu)
                                       : Preconditioner::lipschitz(conv_, hyper_.noise_std);
}

// ---------------------------------------------------------------------------

Majorant Majorant::build(std::span<const double> v, std::span<const double> p, std::span<const double> beta,
                         const HuberParams& d) {
    const std::size_t n = v.size();
    Majorant m;
    m.weight.resize(n);
    m.power.resize(n);
    m.linearized.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] >= 1.0) {
            m.weight[i] = std::exp(-beta[i] * p[i]);
            m.power[i] = p[i];
            m.linearized[i] = 0;
        } else {
            // Tangent of the concave map u -> u^p at C(v_i): slope p C(v_i)^{p-1}.
            const double log_c = std::log(pseudo_huber(v[i], d));
            m.weight[i] = std::exp(-beta[i] * p[i] + std::log(p[i]) + (p[i] - 1.0) * log_c);
            m.power[i] = 1.0;
            m.linearized[i] = 1;
        }
    }
    return m;
}

Majorant Majorant::zero(std::size_t n) {
    Majorant m;
    m.weight.assign(n, 0.0);
    m.power.assign(n, 1.0);
    m.linearized.assign(n, 0);
    return m;
}

Vec majorant_prox(const Majorant& m, std::span<const double> z, double scale, const HuberParams& d) {
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = m.linearized[i] ? prox::weighted_huber(m.weight[i], scale, z[i], d.delta1).point
                                 : prox::huber_power(m.weight[i], m.power[i], scale, z[i], d).point;
    }
    return out;
}

DfbResult dfb_prox(std::span<const double> target, const Majorant& m, const Preconditioner& metric, double gamma0,
                   double eta, const StoppingCriteria& stop, const HuberParams& d, Vec& dual) {
    const std::size_t n = target.size();
    if (!(eta > 0.0 && eta < 2.0 / metric.norm())) {
        throw std::invalid_argument("dfb_prox: step eta outside (0, 2/|||A|||)");
    }
    if (dual.size() != n) dual.assign(n, 0.0);
    DfbResult r;
    Vec u_prev;
    Vec z(n);
    const double scale = gamma0 / eta;
    for (r.iterations = 1; r.iterations <= stop.dfb_max; ++r.iterations) {
        Vec aw = metric.apply(dual);
        Vec u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = target[i] - aw[i];
        if (!u_prev.empty() && relative_change(u, u_prev) < stop.dfb_rel) {
            r.u = std::move(u);
            return r;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = dual[i] / eta + u[i];
        const Vec pz = majorant_prox(m, z, scale, d);
        for (std::size_t i = 0; i < n; ++i) dual[i] += eta * (u[i] - pz[i]);
        u_prev = std::move(u);
    }
    r.iterations = stop.dfb_max;
    Vec aw = metric.apply(dual);
    r.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.u[i] = target[i] - aw[i];
    return r;
}

StepXResult step_x(const State& s, const Problem& prob, const Preconditioner& metric, const StoppingCriteria& stop,
                   Vec& dual) {
    const Hyperparams& h = prob.hyper();
    const std::size_t n = s.x.size();
    const Vec g = grad_f(s.x, prob.y(), prob.conv(), h.noise_std);
    const Vec pg = metric.apply(g);
    Vec target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = s.x[i] - h.gamma0 * pg[i];

    const bool all_exact = std::all_of(s.p.begin(), s.p.end(), [](double v) { return v >= 1.0; });
    const double eta = 1.9 / metric.norm();

    StepXResult r;
    Vec v = s.x;
    double best = x_prox_objective(v, target, s.p, s.beta, metric, h.gamma0, h.huber);
    for (int k = 0; k < stop.mm_max; ++k) {
        const Majorant m = Majorant::build(v, s.p, s.beta, h.huber);
        DfbResult d = dfb_prox(target, m, metric, h.gamma0, eta, stop, h.huber, dual);
        r.dfb_iters += d.iterations;
        ++r.mm_iters;
        const double value = x_prox_objective(d.u, target, s.p, s.beta, metric, h.gamma0, h.huber);
        if (!(value <= best)) break;
        const double rel = relative_change(d.u, v);
        v = std::move(d.u);
        best = value;
        if (all_exact || rel < stop.mm_rel) break;
    }
    r.x = std::move(v);
    return r;
}

StepResult step_p(std::span<const double> p_prev, std::span<const double> x, std::span<const double> beta,
                  const Problem& prob, const StoppingCriteria& stop, GradField& v1, Vec& v2,
                  std::span<const double> start) {
    const Hyperparams& h = prob.hyper();
    const GradOperator& grad = prob.grad();
    const std::size_t n = p_prev.size();
    const double L = prob.grad_norm();
    const double tau = 0.99 / std::sqrt(L * L + 1.0);
    const double sig = tau;
    if (!(tau * sig * (L * L + 1.0) < 1.0)) throw std::invalid_argument("step_p: step sizes violate tau*sigma*(|||D|||^2+1) < 1");
    if (v1.size() != n) v1 = GradField(n);
    if (v2.size() != n) v2.assign(n, 0.0);

    Vec log_c(n);
    for (std::size_t i = 0; i < n; ++i) log_c[i] = std::log(pseudo_huber(x[i], h.huber));

    StepResult r;
    // Subproblem objective psi(p) + lambda TV(p); the best iterate is returned.
    auto objective = [&](std::span<const double> q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = q[i] - p_prev[i];
            s += std::exp(q[i] * (log_c[i] - beta[i])) + specfun::log_gamma(1.0 + 1.0 / q[i]) + 0.5 * d * d / h.gamma1;
        }
        return s + h.tv_shape * eval_tv(q, grad);
    };

    if (start.empty()) start = p_prev;
    Vec p(start.begin(), start.end());
    Vec best = p;
    double best_obj = objective(best);
    Vec p_next(n), bar(n);
    for (r.iterations = 1; r.iterations <= stop.pd_max; ++r.iterations) {
        const Vec dtv = grad.adjoint(v1);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = p[i] - tau * (dtv[i] + v2[i]);
            p_next[i] = std::clamp(u, h.shape_min, h.shape_max);
            bar[i] = 2.0 * p_next[i] - p[i];
        }
        // TV dual: Moreau identity turns the l12 prox into a ball projection.
        GradField w1 = grad.apply(bar);
        for (std::size_t i = 0; i < n; ++i) {
            w1.horizontal[i] = v1.horizontal[i] + sig * w1.horizontal[i];
            w1.vertical[i] = v1.vertical[i] + sig * w1.vertical[i];
        }
        const GradField shrunk = prox::group_l12(w1, h.tv_shape);
        for (std::size_t i = 0; i < n; ++i) {
            v1.horizontal[i] = w1.horizontal[i] - shrunk.horizontal[i];
            v1.vertical[i] = w1.vertical[i] - shrunk.vertical[i];
        }
        // Separable dual: v2 = w2 - sigma * prox_{psi/sigma}(w2 / sigma).
        for (std::size_t i = 0; i < n; ++i) {
            const double w2 = v2[i] + sig * bar[i];
            prox::ShapeProxParams sp;
            sp.log_coeff = log_c[i];
            sp.beta = beta[i];
            sp.anchor = p_prev[i];
            sp.gamma1 = h.gamma1;
            sp.dual = w2;
            sp.sigma = sig;
            v2[i] = w2 - sig * prox::shape_scalar(sp).point;
        }
        const double rel = relative_change(p_next, p);
        std::swap(p, p_next);
        const double obj = objective(p);
        if (obj <= best_obj) {
            best_obj = obj;
            best = p;
        }
        // Zero duals leave the first primal step in place; never stop there.
        if (r.iterations > 1 && rel < stop.pd_rel) break;
    }
    r.iterations = std::min(r.iterations, stop.pd_max);
    r.value = std::move(best);
    return r;
}

StepResult step_beta(std::span<const double> beta_prev, std::span<const double> x, std::span<const double> p,
                     const Problem& prob, const StoppingCriteria& stop, GradField& v,
                     std::span<const double> start) {
    const Hyperparams& h = prob.hyper();
    const GradOperator& grad = prob.grad();
    const std::size_t n = beta_prev.size();
    const double L = prob.grad_norm();
    const double tau = 0.99 / L;
    const double sig = tau;
    if (!(tau * sig * L * L <= 1.0)) throw std::invalid_argument("step_beta: step sizes violate tau*sigma*|||D|||^2 <= 1");
    if (v.size() != n) v = GradField(n);

    const double inv_s2 = 1.0 / (h.sigma_beta * h.sigma_beta);
    const double a2 = 1.0 / (inv_s2 + 1.0 / h.gamma2 + 1.0 / tau);
    Vec log_a1(n);
    for (std::size_t i = 0; i < n; ++i) log_a1[i] = std::log(p[i]) + p[i] * std::log(pseudo_huber(x[i], h.huber));

    StepResult r;
    Vec log_c(n);
    for (std::size_t i = 0; i < n; ++i) log_c[i] = std::log(pseudo_huber(x[i], h.huber));
    // phi(beta) + zeta TV(beta); the best iterate is returned.
    auto objective = [&](std::span<const double> q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = q[i] - h.mu_beta;
            const double d = q[i] - beta_prev[i];
            s += std::exp(p[i] * (log_c[i] - q[i])) + q[i] + 0.5 * c * c * inv_s2 + 0.5 * d * d / h.gamma2;
        }
        return s + h.tv_scale * eval_tv(q, grad);
    };

    if (start.empty()) start = beta_prev;
    Vec b(start.begin(), start.end());
    Vec best = b;
    double best_obj = objective(best);
    Vec b_next(n), bar(n);
    for (r.iterations = 1; r.iterations <= stop.pd_max; ++r.iterations) {
        const Vec dtv = grad.adjoint(v);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = b[i] - tau * dtv[i];
            const double a3 = 1.0 - h.mu_beta * inv_s2 - beta_prev[i] / h.gamma2 - u / tau;
            b_next[i] = prox::scale_scalar_log(log_a1[i], a2, a3, p[i]);
            bar[i] = 2.0 * b_next[i] - b[i];
        }
        GradField w = grad.apply(bar);
        for (std::size_t i = 0; i < n; ++i) {
            w.horizontal[i] = v.horizontal[i] + sig * w.horizontal[i];
            w.vertical[i] = v.vertical[i] + sig * w.vertical[i];
        }
        const GradField shrunk = prox::group_l12(w, h.tv_scale);
        for (std::size_t i = 0; i < n; ++i) {
            v.horizontal[i] = w.horizontal[i] - shrunk.horizontal[i];
            v.vertical[i] = w.vertical[i] - shrunk.vertical[i];
        }
        const double rel = relative_change(b_next, b);
        std::swap(b, b_next);
        const double obj = objective(b);
        if (obj <= best_obj) {
            best_obj = obj;
            best = b;
        }
        if (r.iterations > 1 && rel < stop.pd_rel) break;
    }
    r.iterations = std::min(r.iterations, stop.pd_max);
    r.value = std::move(best);
    return r;
}

DecreaseCheck check_block_decrease(const State& before, const State& after, Block block, const Problem& prob,
                                   const Preconditioner& metric) {
    const Hyperparams& h = prob.hyper();
    const double theta0 = prob.objective(before);
    const double theta1 = prob.objective(after);
    double penalty = 0.0;
    switch (block) {
        case Block::x: {
            Vec diff(after.x.size());
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = after.x[i] - before.x[i];
            const Vec mdiff = metric.inverse_apply(diff);
            penalty = 0.5 * (1.0 / h.gamma0 - 1.0) * dot(diff, mdiff);
            break;
        }
        case Block::p: penalty = 0.5 / h.gamma1 * sq_dist(after.p, before.p); break;
        case Block::beta: penalty = 0.5 / h.gamma2 * sq_dist(after.beta, before.beta); break;
    }
    DecreaseCheck c;
    c.margin = theta0 - theta1 - penalty;
    if (std::isnan(c.margin)) {
        c.ok = false;
        return c;
    }
    c.ok = c.margin >= -prob.options().decrease_tol * std::max(1.0, std::abs(theta0));
    return c;
}

// ---------------------------------------------------------------------------

SolveResult solve(const Problem& prob, const State& init, const StoppingCriteria& stop) {
    stop.validate();
    const Hyperparams& h = prob.hyper();
    const std::size_t n = prob.y().size();
    if (init.x.size() != n || init.p.size() != n || init.beta.size() != n) {
        throw std::invalid_argument("solve: initial state does not match the observation size");
    }
    for (double v : init.p) {
        if (v < h.shape_min || v > h.shape_max) throw std::invalid_argument("solve: initial shape map outside [a, b]");
    }

    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();

    SolveResult res;
    res.state = init;
    res.duals = DualState::zeros(n);
    MetricMode mode = h.metric;
    Preconditioner metric = prob.make_preconditioner(mode);

    double theta = prob.objective(res.state);
    if (!std::isfinite(theta)) throw std::runtime_error("solve: objective is not finite at the initial point");
    TraceRow first;
    first.iter = 0;
    first.objective = theta;
    first.metric = mode;
    res.trace.rows.push_back(first);

    for (int iter = 1; iter <= stop.outer_max; ++iter) {
        State& s = res.state;
        const State prev = s;
        TraceRow row;
        row.iter = iter;
        bool all_ok = true;

        // x-block.
        {
            StepXResult sx = step_x(s, prob, metric, stop, res.duals.image);
            State cand = s;
            cand.x = std::move(sx.x);
            DecreaseCheck c = check_block_decrease(s, cand, Block::x, prob, metric);
            if (!c.ok && mode == MetricMode::fourier) {
                res.trace.events.push_back("iter " + std::to_string(iter) +
                                           ": x-block decrease check failed with fourier metric; switching to lipschitz");
                mode = MetricMode::lipschitz;
                metric = prob.make_preconditioner(mode);
                res.duals.image.assign(n, 0.0);
                StepXResult retry = step_x(s, prob, metric, stop, res.duals.image);
                sx.mm_iters += retry.mm_iters;
                sx.dfb_iters += retry.dfb_iters;
                cand.x = std::move(retry.x);
                c = check_block_decrease(s, cand, Block::x, prob, metric);
            }
            row.mm_iters = sx.mm_iters;
            row.dfb_iters = sx.dfb_iters;
            row.margin_x = c.margin;
            all_ok = all_ok && c.ok;
            if (c.ok) {
                s.x = std::move(cand.x);
            } else {
                res.trace.events.push_back("iter " + std::to_string(iter) + ": x-block update rejected");
            }
        }

        // p-block.
        {
            State cand = s;
            StoppingCriteria inner = stop;
            DecreaseCheck c;
            for (int attempt = 0; attempt <= prob.options().block_retries; ++attempt) {
                StepResult sp = step_p(s.p, s.x, s.beta, prob, inner, res.duals.shape_tv, res.duals.shape_sep,
                                       attempt == 0 ? std::span<const double>{} : std::span<const double>(cand.p));
                row.pd_p_iters += sp.iterations;
                cand.p = std::move(sp.value);
                c = check_block_decrease(s, cand, Block::p, prob, metric);
                if (c.ok) break;
                inner.pd_rel *= 0.1;
            }
            row.margin_p = c.margin;
            all_ok = all_ok && c.ok;
            if (c.ok) {
                s.p = std::move(cand.p);
            } else {
                res.trace.events.push_back("iter " + std::to_string(iter) + ": p-block update rejected, margin " +
                                           std::to_string(c.margin));
            }
        }

        // beta-block.
        {
            State cand = s;
            StoppingCriteria inner = stop;
            DecreaseCheck c;
            for (int attempt = 0; attempt <= prob.options().block_retries; ++attempt) {
                StepResult sb = step_beta(s.beta, s.x, s.p, prob, inner, res.duals.scale_tv,
                                          attempt == 0 ? std::span<const double>{} : std::span<const double>(cand.beta));
                row.pd_beta_iters += sb.iterations;
                cand.beta = std::move(sb.value);
                c = check_block_decrease(s, cand, Block::beta, prob, metric);
                if (c.ok) break;
                inner.pd_rel *= 0.1;
            }
            row.margin_beta = c.margin;
            all_ok = all_ok && c.ok;
            if (c.ok) {
                s.beta = std::move(cand.beta);
            } else {
                res.trace.events.push_back("iter " + std::to_string(iter) + ": beta-block update rejected, margin " +
                                           std::to_string(c.margin));
            }
        }

        const double theta_next = prob.objective(s);
        if (std::isnan(theta_next)) throw std::runtime_error("solve: objective became NaN at iteration " + std::to_string(iter));

        row.objective = theta_next;
        row.rel_x = relative_change(s.x, prev.x);
        row.rel_p = relative_change(s.p, prev.p);
        row.rel_beta = relative_change(s.beta, prev.beta);
        row.decrease_ok = all_ok;
        row.metric = mode;
        row.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
        res.trace.rows.push_back(row);

        const double num = sq_dist(s.x, prev.x) + sq_dist(s.p, prev.p) + sq_dist(s.beta, prev.beta);
        const double den = sq_norm(prev.x) + sq_norm(prev.p) + sq_norm(prev.beta);
        const double rel_state = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
        const double rel_obj = std::abs(theta_next - theta) / std::max(std::abs(theta), std::numeric_limits<double>::min());
        theta = theta_next;
        if (rel_state < stop.outer_rel_state && rel_obj < stop.outer_rel_obj) break;
    }
    res.final_metric = mode;
    return res;
}

}  // namespace ggdseg
