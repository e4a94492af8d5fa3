#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lmnet/linalg.hpp"
#include "lmnet/mlp.hpp"

// The four optimizer state machines (Adam, BFGS, L-BFGS, Levenberg-Marquardt),
// a strong-Wolfe line search, and a generic run loop with stopping criteria
// and per-epoch logging.
namespace lmnet::optim {

// ---------------------------------------------------------------------------
// Objective bundle
// ---------------------------------------------------------------------------

// What an optimizer needs from a problem, as closures over an immutable
// dataset. `scaled_residual_jacobian` must return residuals r and Jacobian J
// scaled so that loss(θ) == ‖r‖² exactly (and therefore ∇loss == 2·Jᵀr);
// it is required by LM and ignored by the gradient-only algorithms.
// `minibatch_value_and_gradient` evaluates the same loss restricted to a row
// subset; it is optional and only consulted by mini-batch Adam.
struct Problem {
  int dim = 0;
  int sample_count = 0;
  std::function<double(const Vectord&)> loss;
  std::function<std::pair<double, Vectord>(const Vectord&)> value_and_gradient;
  std::function<net::ResidualJacobian(const Vectord&)> scaled_residual_jacobian;
  std::function<std::pair<double, Vectord>(const Vectord&, const std::vector<Eigen::Index>&)>
      minibatch_value_and_gradient;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  // 0 = full batch (the default protocol). A positive value makes each epoch
  // one shuffled pass of that batch size; exploration only.
  int batch_size = 0;
};

struct AdamState {
  AdamConfig cfg{};
  Vectord m;  // first-moment estimate
  Vectord v;  // second-moment estimate
  long t = 0; // completed steps

  AdamState(int dim, const AdamConfig& c)
      : cfg(c), m(Vectord::Zero(dim)), v(Vectord::Zero(dim)) {}
};

// One Adam update in place: t += 1, moment updates, bias correction,
// θ -= lr * m̂ / (sqrt(v̂) + eps).
void adam_step(AdamState& state, Vectord& params, const Vectord& grad);

// ---------------------------------------------------------------------------
// Strong-Wolfe line search
// ---------------------------------------------------------------------------

struct WolfeParams {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_evals = 50;
  double alpha_init = 1.0;
};

struct WolfeResult {
  double alpha = 0.0;  // accepted step (0 when nothing beat the start point)
  double f = 0.0;      // objective at θ + alpha·d
  Vectord g;           // gradient at θ + alpha·d
  bool success = false;
  int evals = 0;
};

// Objective restricted to a ray: returns (f, ∇f) at a full parameter vector.
using ValueGrad = std::function<std::pair<double, Vectord>(const Vectord&)>;

// Bracketing + zoom search for a step satisfying the strong Wolfe conditions
//   f(θ+αd) ≤ f(θ) + c1·α·g0ᵀd   and   |g(θ+αd)ᵀd| ≤ c2·|g0ᵀd|.
// Throws std::invalid_argument when d is not a descent direction. When the
// evaluation budget runs out the best point seen so far is returned with
// success=false (alpha may be 0, meaning no trial improved on θ).
// A slope that is exactly unchanged at machine precision (an exactly linear
// objective along d) is accepted once the sufficient-decrease condition
// holds, since no finite step can then shrink |φ'|.
WolfeResult wolfe_line_search(const ValueGrad& vg, const Vectord& params, const Vectord& direction,
                              double f0, const Vectord& g0, const WolfeParams& wp = {});

// ---------------------------------------------------------------------------
// BFGS / L-BFGS
// ---------------------------------------------------------------------------

// Dense inverse-Hessian approximation, kept symmetric positive definite by
// skipping updates whose curvature sᵀy is not safely positive.
struct BfgsState {
  Matrixd H;
  explicit BfgsState(int dim) : H(Matrixd::Identity(dim, dim)) {}
};

// Bounded-memory curvature history for the two-loop recursion, newest last.
struct LbfgsState {
  int memory = 10;
  std::deque<Vectord> s;
  std::deque<Vectord> y;
  std::deque<double> rho;  // 1 / (yᵀs)

  explicit LbfgsState(int mem) : memory(mem) {}
};

// What a quasi-Newton step hands back to the run loop: the objective and
// gradient at the new iterate (so the caller never re-evaluates) plus whether
// the line search met the Wolfe conditions.
struct StepOutcome {
  double loss = 0.0;
  Vectord grad;
  bool line_search_ok = true;
};

// d = -H·g, strong-Wolfe step, then the standard inverse-BFGS update
// H ← (I-ρsyᵀ)H(I-ρysᵀ) + ρssᵀ, skipped when sᵀy ≤ 1e-10·‖s‖‖y‖.
StepOutcome bfgs_step(BfgsState& state, Vectord& params, double f0, const Vectord& g0,
                      const ValueGrad& vg, const WolfeParams& wp = {});

// Two-loop recursion with initial scaling H0 = (sᵀy)/(yᵀy)·I from the newest
// pair (H0 = I when the memory is empty). Returns the step direction -H·g.
Vectord lbfgs_direction(const LbfgsState& state, const Vectord& grad);

// Direction from lbfgs_direction, strong-Wolfe step, then push (s, y) when the
// curvature condition holds, evicting the oldest pair beyond `memory`.
StepOutcome lbfgs_step(LbfgsState& state, Vectord& params, double f0, const Vectord& g0,
                       const ValueGrad& vg, const WolfeParams& wp = {});

// ---------------------------------------------------------------------------
// Levenberg-Marquardt
// ---------------------------------------------------------------------------

struct LmConfig {
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  int max_attempts = 10;
};

struct LmState {
  LmConfig cfg{};
  double lambda = 1e-3;

  explicit LmState(const LmConfig& c) : cfg(c), lambda(c.lambda0) {}
};

struct LmOutcome {
  double loss = 0.0;     // objective after the epoch (== f0 when rejected)
  bool accepted = false;
  int attempts = 0;      // solve attempts consumed this epoch
};

// One damped Gauss-Newton epoch: A = JᵀJ + λ·diag(JᵀJ) (diagonal clamped
// below at 1e-12 before scaling), b = -Jᵀr, δ from spd_solve. Accept when the
// loss does not increase (λ ← λ·λ_down), otherwise restore params, grow
// λ ← λ·λ_up and retry, up to max_attempts; a non-positive-definite system
// counts as a rejection. `rj` must be scaled so loss(θ) == ‖r‖².
LmOutcome lm_step(LmState& state, Vectord& params, const net::ResidualJacobian& rj,
                  const std::function<double(const Vectord&)>& loss, double f0);

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

enum class Algorithm { Adam, Bfgs, Lbfgs, Lm };

std::string algorithm_name(Algorithm alg);

// max_epochs must be >= 1. A tolerance of 0 disables that criterion;
// patience counts epochs without a new best loss (0 = disabled).
struct StopCriteria {
  long max_epochs = 0;
  double grad_tol = 0.0;   // on ‖∇‖∞, checked before each step
  double loss_tol = 0.0;   // on the recorded loss, checked after each step
  long patience = 0;
};

struct OptimizerConfig {
  AdamConfig adam{};
  WolfeParams wolfe{};
  LmConfig lm{};
  int lbfgs_memory = 10;
};

// One row per epoch. `loss` is the full objective after the epoch's step;
// `cumulative_evals` counts objective evaluations (a fused value+gradient or
// a residual-Jacobian assembly counts as one) since the run started.
struct RunRecord {
  long epoch = 0;
  double loss = 0.0;
  double elapsed_s = 0.0;
  long cumulative_evals = 0;
};

struct RunResult {
  Vectord final_params;
  Vectord best_params;
  double best_loss = 0.0;
  long best_epoch = 0;
  std::vector<RunRecord> records;
  std::string stop_reason;
  long total_evals = 0;
  long lm_accepted_epochs = 0;  // LM only: epochs whose proposal was accepted
};

// Drives one optimizer from `initial` until a stop criterion fires.
// One epoch = one optimizer step (for Adam: one full-batch gradient step, or
// one shuffled pass when a batch size is configured — `seed` feeds that
// shuffle and is otherwise unused). Deterministic: identical inputs produce
// bit-identical loss columns.
RunResult run_optimizer(const Problem& problem, Algorithm alg, const OptimizerConfig& cfg,
                        const StopCriteria& stop, const Vectord& initial, std::uint64_t seed = 0);

}  // namespace lmnet::optim
