#include "lmnet/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

namespace lmnet::optim {
namespace {

constexpr double kCurvatureSkip = 1e-10;

// Minimizer of the cubic interpolant through (a0, f0, d0) and (a1, f1, d1);
// NaN when the interpolant has no interior minimizer.
double cubic_minimizer(double a0, double f0, double d0, double a1, double f1, double d1) {
  const double d_1 = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
  const double radicand = d_1 * d_1 - d0 * d1;
  if (radicand < 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double d_2 = std::copysign(std::sqrt(radicand), a1 - a0);
  const double denom = d1 - d0 + 2.0 * d_2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return a1 - (a1 - a0) * (d1 + d_2 - d_1) / denom;
}

}  // namespace

void adam_step(AdamState& state, Vectord& params, const Vectord& grad) {
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: dimension mismatch");
  }
  state.t += 1;
  state.m = state.cfg.beta1 * state.m + (1.0 - state.cfg.beta1) * grad;
  state.v = state.cfg.beta2 * state.v + (1.0 - state.cfg.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t));
  params.array() -=
      state.cfg.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.cfg.eps);
}

WolfeResult wolfe_line_search(const ValueGrad& vg, const Vectord& params,
                              const Vectord& direction, double f0, const Vectord& g0,
                              const WolfeParams& wp) {
  const double dphi0 = g0.dot(direction);
  if (!(dphi0 < 0.0)) {
    throw std::invalid_argument("wolfe_line_search: direction is not a descent direction");
  }

  int evals = 0;
  double best_alpha = 0.0;
  double best_f = f0;
  Vectord best_g = g0;

  struct Trial {
    double a, f, d;  // step, value, slope along the ray
    Vectord g;
  };
  auto eval = [&](double a) -> Trial {
    auto [f, g] = vg(params + a * direction);
    ++evals;
    if (f < best_f) {
      best_f = f;
      best_alpha = a;
      best_g = g;
    }
    return {a, f, g.dot(direction), std::move(g)};
  };
  auto armijo = [&](const Trial& t) { return t.f <= f0 + wp.c1 * t.a * dphi0; };
  auto curvature = [&](const Trial& t) { return std::abs(t.d) <= wp.c2 * std::abs(dphi0); };
  // An exactly unchanged slope means the objective is linear along the ray at
  // machine precision; no step can then satisfy the strict curvature bound,
  // so sufficient decrease alone has to carry the acceptance.
  auto slope_unmoved = [&](const Trial& t) {
    return std::abs(t.d - dphi0) <= 1e-12 * std::max(1.0, std::abs(dphi0));
  };
  auto accept = [&](Trial& t) { return WolfeResult{t.a, t.f, std::move(t.g), true, evals}; };
  auto give_up = [&]() { return WolfeResult{best_alpha, best_f, std::move(best_g), false, evals}; };

  // Zoom phase: lo always satisfies Armijo and has the lower value; the
  // minimizer is bracketed between lo and hi.
  auto zoom = [&](Trial lo, Trial hi) -> WolfeResult {
    while (evals < wp.max_evals) {
      const double left = std::min(lo.a, hi.a);
      const double right = std::max(lo.a, hi.a);
      if (right - left <= 1e-16 * std::max(1.0, right)) break;  // interval collapsed
      double aj = cubic_minimizer(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
      const double margin = 0.1 * (right - left);
      if (!(aj == aj) || aj < left + margin || aj > right - margin) {
        aj = 0.5 * (left + right);
      }
      Trial t = eval(aj);
      if (!armijo(t) || t.f >= lo.f) {
        hi = std::move(t);
      } else {
        if (curvature(t) || slope_unmoved(t)) return accept(t);
        if (t.d * (hi.a - lo.a) >= 0.0) hi = std::move(lo);
        lo = std::move(t);
      }
    }
    return give_up();
  };

  Trial prev{0.0, f0, dphi0, g0};
  double alpha = wp.alpha_init;
  bool first = true;
  while (evals < wp.max_evals) {
    Trial t = eval(alpha);
    if (!armijo(t) || (!first && t.f >= prev.f)) {
      return zoom(std::move(prev), std::move(t));
    }
    if (curvature(t) || slope_unmoved(t)) return accept(t);
    if (t.d >= 0.0) {
      return zoom(std::move(t), std::move(prev));
    }
    alpha = 2.0 * t.a;
    prev = std::move(t);
    first = false;
  }
  return give_up();
}

namespace {

// Shared tail of a quasi-Newton step: line search along d, move params, and
// hand (s, y) to the state update when the step moved anywhere.
template <typename UpdateFn>
StepOutcome quasi_newton_step(Vectord& params, const Vectord& d, double f0, const Vectord& g0,
                              const ValueGrad& vg, const WolfeParams& wp, UpdateFn&& update) {
  WolfeResult ls = wolfe_line_search(vg, params, d, f0, g0, wp);
  StepOutcome out;
  out.line_search_ok = ls.success;
  if (ls.alpha == 0.0) {
    // No trial improved on the current point; stay put.
    out.loss = f0;
    out.grad = g0;
    return out;
  }
  const Vectord s = ls.alpha * d;
  const Vectord y = ls.g - g0;
  params += s;
  const double sy = s.dot(y);
  if (sy > kCurvatureSkip * s.norm() * y.norm()) {
    update(s, y, sy);
  }
  out.loss = ls.f;
  out.grad = std::move(ls.g);
  return out;
}

}  // namespace

StepOutcome bfgs_step(BfgsState& state, Vectord& params, double f0, const Vectord& g0,
                      const ValueGrad& vg, const WolfeParams& wp) {
  if (state.H.rows() != params.size() || g0.size() != params.size()) {
    throw std::invalid_argument("bfgs_step: dimension mismatch");
  }
  if (g0.lpNorm<Eigen::Infinity>() == 0.0) {
    return {f0, g0, true};  // stationary: no move, H untouched
  }
  Vectord d = -(state.H * g0);
  if (g0.dot(d) >= 0.0) {
    // H lost positive definiteness (only possible through accumulated
    // round-off); restart from steepest descent.
    state.H = Matrixd::Identity(params.size(), params.size());
    d = -g0;
  }
  return quasi_newton_step(params, d, f0, g0, vg, wp,
                           [&state](const Vectord& s, const Vectord& y, double sy) {
                             // Expanded form of (I-ρsyᵀ)H(I-ρysᵀ)+ρssᵀ; every
                             // term is symmetric, so H stays symmetric exactly.
                             const double rho = 1.0 / sy;
                             const Vectord hy = state.H * y;
                             const double yhy = y.dot(hy);
                             state.H.noalias() -=
                                 rho * (s * hy.transpose() + hy * s.transpose());
                             state.H.noalias() +=
                                 (rho * rho * yhy + rho) * (s * s.transpose());
                           });
}

Vectord lbfgs_direction(const LbfgsState& state, const Vectord& grad) {
  Vectord q = grad;
  const int k = static_cast<int>(state.s.size());
  std::vector<double> a(k);
  for (int i = k - 1; i >= 0; --i) {
    if (state.s[i].size() != grad.size()) {
      throw std::invalid_argument("lbfgs_direction: stored pair dimension mismatch");
    }
    a[i] = state.rho[i] * state.s[i].dot(q);
    q -= a[i] * state.y[i];
  }
  if (k > 0) {
    q *= state.s.back().dot(state.y.back()) / state.y.back().squaredNorm();
  }
  for (int i = 0; i < k; ++i) {
    const double beta = state.rho[i] * state.y[i].dot(q);
    q += state.s[i] * (a[i] - beta);
  }
  return -q;
}

StepOutcome lbfgs_step(LbfgsState& state, Vectord& params, double f0, const Vectord& g0,
                       const ValueGrad& vg, const WolfeParams& wp) {
  if (g0.size() != params.size()) {
    throw std::invalid_argument("lbfgs_step: dimension mismatch");
  }
  if (g0.lpNorm<Eigen::Infinity>() == 0.0) {
    return {f0, g0, true};
  }
  const Vectord d = lbfgs_direction(state, g0);
  return quasi_newton_step(params, d, f0, g0, vg, wp,
                           [&state](const Vectord& s, const Vectord& y, double sy) {
                             state.s.push_back(s);
                             state.y.push_back(y);
                             state.rho.push_back(1.0 / sy);
                             if (static_cast<int>(state.s.size()) > state.memory) {
                               state.s.pop_front();
                               state.y.pop_front();
                               state.rho.pop_front();
                             }
                           });
}

LmOutcome lm_step(LmState& state, Vectord& params, const net::ResidualJacobian& rj,
                  const std::function<double(const Vectord&)>& loss, double f0) {
  if (rj.jacobian.cols() != params.size() || rj.residuals.size() != rj.jacobian.rows()) {
    throw std::invalid_argument("lm_step: residual Jacobian does not match params");
  }
  const Matrixd G = gramian(rj.jacobian);
  const Vectord b = -(rj.jacobian.transpose() * rj.residuals);
  // Marquardt scaling: damp along diag(JᵀJ), floored so parameters the
  // residuals currently ignore still receive a usable step.
  const Vectord damp = G.diagonal().cwiseMax(1e-12);

  LmOutcome out;
  out.loss = f0;
  while (out.attempts < state.cfg.max_attempts) {
    ++out.attempts;
    Matrixd A = G;
    A.diagonal() += state.lambda * damp;
    bool solved = true;
    Vectord delta;
    try {
      delta = spd_solve(A, b);
    } catch (const NotPositiveDefiniteError&) {
      solved = false;  // treat exactly like an uphill proposal
    }
    if (solved) {
      const Vectord candidate = params + delta;
      const double fc = loss(candidate);
      if (fc <= f0) {
        params = candidate;
        out.loss = fc;
        out.accepted = true;
        // λ must stay strictly positive; the floor only matters after
        // thousands of consecutive accepts.
        state.lambda =
            std::max(state.lambda * state.cfg.lambda_down, std::numeric_limits<double>::min());
        return out;
      }
    }
    state.lambda *= state.cfg.lambda_up;
  }
  return out;
}

std::string algorithm_name(Algorithm alg) {
  switch (alg) {
    case Algorithm::Adam: return "adam";
    case Algorithm::Bfgs: return "bfgs";
    case Algorithm::Lbfgs: return "lbfgs";
    case Algorithm::Lm: return "lm";
  }
  return "unknown";
}

RunResult run_optimizer(const Problem& problem, Algorithm alg, const OptimizerConfig& cfg,
                        const StopCriteria& stop, const Vectord& initial, std::uint64_t seed) {
  if (stop.max_epochs < 1) {
    throw std::invalid_argument("run_optimizer: max_epochs must be >= 1");
  }
  if (initial.size() != problem.dim) {
    throw std::invalid_argument("run_optimizer: initial params do not match problem.dim");
  }
  if (!problem.loss || !problem.value_and_gradient) {
    throw std::invalid_argument("run_optimizer: problem is missing loss closures");
  }
  if (alg == Algorithm::Lm && !problem.scaled_residual_jacobian) {
    throw std::invalid_argument("run_optimizer: LM needs a residual-Jacobian closure");
  }
  const bool minibatch = alg == Algorithm::Adam && cfg.adam.batch_size > 0;
  if (minibatch && !problem.minibatch_value_and_gradient) {
    throw std::invalid_argument("run_optimizer: problem does not support mini-batch gradients");
  }

  long evals = 0;
  const auto vg = [&](const Vectord& p) {
    ++evals;
    return problem.value_and_gradient(p);
  };
  const auto loss_only = [&](const Vectord& p) {
    ++evals;
    return problem.loss(p);
  };
  const auto srj = [&](const Vectord& p) {
    ++evals;
    return problem.scaled_residual_jacobian(p);
  };

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  RunResult res;
  res.records.reserve(static_cast<size_t>(std::min(stop.max_epochs, 1000000L)));

  Vectord theta = initial;
  AdamState adam(alg == Algorithm::Adam ? problem.dim : 0, cfg.adam);
  BfgsState bfgs(alg == Algorithm::Bfgs ? problem.dim : 0);
  LbfgsState lbfgs(cfg.lbfgs_memory);
  LmState lm(cfg.lm);

  std::mt19937_64 shuffle_eng(seed);
  std::vector<Eigen::Index> order;
  if (minibatch) {
    if (problem.sample_count < 1) {
      throw std::invalid_argument("run_optimizer: mini-batch training needs sample_count");
    }
    order.resize(problem.sample_count);
    for (Eigen::Index i = 0; i < problem.sample_count; ++i) order[i] = i;
  }

  double f = 0.0;
  Vectord g;
  net::ResidualJacobian rj;
  if (alg == Algorithm::Lm) {
    rj = srj(theta);
    f = rj.residuals.squaredNorm();
    g = 2.0 * (rj.jacobian.transpose() * rj.residuals);
  } else {
    std::tie(f, g) = vg(theta);
  }

  res.best_loss = std::numeric_limits<double>::infinity();
  res.best_params = theta;

  std::string reason;
  for (long epoch = 1; epoch <= stop.max_epochs; ++epoch) {
    if (stop.grad_tol > 0.0 && g.lpNorm<Eigen::Infinity>() <= stop.grad_tol) {
      res.records.push_back({epoch, f, elapsed(), evals});
      if (f < res.best_loss) {
        res.best_loss = f;
        res.best_epoch = epoch;
        res.best_params = theta;
      }
      reason = "grad_tol";
      break;
    }

    switch (alg) {
      case Algorithm::Adam: {
        if (minibatch) {
          // One pass over a freshly shuffled epoch, batch_size rows at a time.
          for (Eigen::Index i = static_cast<Eigen::Index>(order.size()) - 1; i > 0; --i) {
            const Eigen::Index j =
                static_cast<Eigen::Index>(shuffle_eng() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
          }
          const Eigen::Index n = static_cast<Eigen::Index>(order.size());
          const Eigen::Index bs = cfg.adam.batch_size;
          for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min(bs, n - start);
            const std::vector<Eigen::Index> idx(order.begin() + start,
                                                order.begin() + start + len);
            ++evals;
            auto [bf, bg] = problem.minibatch_value_and_gradient(theta, idx);
            (void)bf;
            adam_step(adam, theta, bg);
          }
        } else {
          adam_step(adam, theta, g);
        }
        std::tie(f, g) = vg(theta);
        break;
      }
      case Algorithm::Bfgs: {
        StepOutcome out = bfgs_step(bfgs, theta, f, g, vg, cfg.wolfe);
        f = out.loss;
        g = std::move(out.grad);
        break;
      }
      case Algorithm::Lbfgs: {
        StepOutcome out = lbfgs_step(lbfgs, theta, f, g, vg, cfg.wolfe);
        f = out.loss;
        g = std::move(out.grad);
        break;
      }
      case Algorithm::Lm: {
        LmOutcome out = lm_step(lm, theta, rj, loss_only, f);
        f = out.loss;
        if (out.accepted) {
          ++res.lm_accepted_epochs;
          rj = srj(theta);
          g = 2.0 * (rj.jacobian.transpose() * rj.residuals);
        }
        // On rejection θ, rj, and g are all unchanged; the epoch still counts.
        break;
      }
    }

    res.records.push_back({epoch, f, elapsed(), evals});
    if (f < res.best_loss) {
      res.best_loss = f;
      res.best_epoch = epoch;
      res.best_params = theta;
    }
    if (stop.loss_tol > 0.0 && f <= stop.loss_tol) {
      reason = "loss_tol";
      break;
    }
    if (stop.patience > 0 && epoch - res.best_epoch >= stop.patience) {
      reason = "patience";
      break;
    }
  }

  res.final_params = std::move(theta);
  res.stop_reason = reason.empty() ? "max_epochs" : reason;
  res.total_evals = evals;
  return res;
}

}  // namespace lmnet::optim
