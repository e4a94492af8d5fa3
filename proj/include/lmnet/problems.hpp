#pragma once

#include <cstdint>

#include "lmnet/linalg.hpp"
#include "lmnet/mlp.hpp"
#include "lmnet/optimizers.hpp"

// Concrete objective bundles: the sinc(10x) regression task and the Burgers
// equation physics-informed network, each exposing loss, gradient, and
// residual-Jacobian views consumable by any optimizer.
namespace lmnet::problems {

// sin(z)/z with the removable singularity filled by 1. Unnormalized uses
// z = 10x (the default convention); Normalized uses z = 10πx.
enum class SincKind { Unnormalized, Normalized };

double sinc_target(double x, SincKind kind = SincKind::Unnormalized);

// n evenly spaced samples of the target over [-1.5, 1.5].
struct SincDataset {
  Vectord xs;
  Vectord ys;
  int n = 0;
  SincKind kind = SincKind::Unnormalized;
};

SincDataset make_sinc_dataset(int n, SincKind kind = SincKind::Unnormalized);

// Objective bundle over the dataset: MSE loss, fused gradient, and residual
// rows scaled by 1/sqrt(n) so their squared norm equals the loss.
optim::Problem make_sinc_problem(const net::MlpSpec& spec, const SincDataset& data);

// ---------------------------------------------------------------------------
// Burgers' equation PINN
// ---------------------------------------------------------------------------

// Initial condition u(x, 0). NegSinPiX is -sin(πx) (the standard benchmark
// pairing with ν = 0.01/π); NegSinX is -sin(x).
enum class BurgersIc { NegSinPiX, NegSinX };

double burgers_ic_value(double x, BurgersIc ic);

// The PDE residual f = u_t + u·u_x - ν·u_xx.
double burgers_residual(double u, double u_x, double u_t, double u_xx, double nu);

// Training points for the PINN on x ∈ [-1, 1], t ∈ [0, 1]:
// initial-condition points (x, 0, ic(x)), boundary points (±1, t, 0), and
// Latin-hypercube collocation points (x, t) where the PDE residual is
// penalized. Deterministic per seed.
struct BurgersProblem {
  double nu = 0.01 / 3.14159265358979323846;
  BurgersIc ic = BurgersIc::NegSinPiX;
  Matrixd ic_points;    // n_ic x 3: (x, 0, target)
  Matrixd bc_points;    // n_bc x 3: (±1, t, 0)
  Matrixd collocation;  // n_f x 2: (x, t)
};

BurgersProblem make_burgers_problem(double nu, int n_ic, int n_bc, int n_f, std::uint64_t seed,
                                    BurgersIc ic = BurgersIc::NegSinPiX);

// Total loss MSE_u + MSE_f: the mean squared data residual over IC ∪ BC
// points plus the mean squared PDE residual over collocation points,
// weighted 1:1.
double pinn_loss(const net::MlpSpec& spec, const Vectord& params, const BurgersProblem& problem);

// Objective bundle whose residual rows are scaled (data rows by 1/sqrt(N_u),
// physics rows by 1/sqrt(N_f)) so their squared norm equals pinn_loss; the
// gradient is the exact 2·Jᵀr of that scaled system.
optim::Problem make_burgers_objective(const net::MlpSpec& spec, const BurgersProblem& problem);

// Lattice evaluation of the learned field for plotting/validation:
// nx × nt rows (x, t, u(x, t)) over [-1, 1] × [0, 1], x varying fastest.
Matrixd evaluate_field(const net::MlpSpec& spec, const Vectord& params, int nx, int nt);

}  // namespace lmnet::problems
