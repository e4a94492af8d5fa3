#include "lmnet/problems.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

namespace lmnet::problems {
namespace {

// Engine output mapped to [0, 1) by hand, matching net::init_params, so point
// sets are identical on every platform.
double unit_draw(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// In-place Fisher-Yates driven by the same engine.
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& eng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(eng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
}

// One Latin-hypercube coordinate column: stratum i gets one point, strata
// assigned to samples by a random permutation.
Vectord lhs_column(int n, double lo, double hi, std::mt19937_64& eng) {
  std::vector<double> jitter(n);
  for (double& u : jitter) u = unit_draw(eng);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle_indices(perm, eng);
  Vectord col(n);
  for (int i = 0; i < n; ++i) {
    col(i) = lo + (hi - lo) * ((perm[i] + jitter[i]) / n);
  }
  return col;
}

struct SincShared {
  net::MlpSpec spec;
  Matrixd inputs;   // n x 1
  Matrixd targets;  // n x 1
};

struct BurgersShared {
  net::MlpSpec spec;
  Matrixd data;         // (n_ic + n_bc) x 3
  Matrixd collocation;  // n_f x 2
  double nu = 0.0;
};

}  // namespace

double sinc_target(double x, SincKind kind) {
  const double z = (kind == SincKind::Unnormalized) ? 10.0 * x : 10.0 * std::numbers::pi * x;
  if (std::abs(z) < 1e-12) return 1.0;
  return std::sin(z) / z;
}

SincDataset make_sinc_dataset(int n, SincKind kind) {
  if (n < 2) throw std::invalid_argument("make_sinc_dataset: n must be >= 2");
  SincDataset d;
  d.n = n;
  d.kind = kind;
  d.xs.resize(n);
  d.ys.resize(n);
  for (int i = 0; i < n; ++i) {
    d.xs(i) = -1.5 + 3.0 * i / (n - 1);
    d.ys(i) = sinc_target(d.xs(i), kind);
  }
  return d;
}

optim::Problem make_sinc_problem(const net::MlpSpec& spec, const SincDataset& data) {
  net::validate(spec);
  if (spec.input_dim != 1 || spec.output_dim != 1) {
    throw std::invalid_argument("sinc regression needs a 1-input, 1-output network");
  }
  if (data.n < 2 || data.xs.size() != data.n || data.ys.size() != data.n) {
    throw std::invalid_argument("sinc dataset is inconsistent");
  }
  auto sh = std::make_shared<const SincShared>(SincShared{spec, data.xs, data.ys});

  optim::Problem p;
  p.dim = net::param_count(spec);
  p.sample_count = data.n;
  p.loss = [sh](const Vectord& theta) {
    return net::loss_mse(sh->spec, theta, sh->inputs, sh->targets);
  };
  p.value_and_gradient = [sh](const Vectord& theta) {
    return net::loss_and_gradient(sh->spec, theta, sh->inputs, sh->targets);
  };
  // Rows scaled by 1/sqrt(n) so that ‖r‖² equals the mean-squared loss.
  p.scaled_residual_jacobian = [sh](const Vectord& theta) {
    net::ResidualJacobian rj = net::residual_jacobian(sh->spec, theta, sh->inputs, sh->targets);
    const double s = 1.0 / std::sqrt(static_cast<double>(rj.residuals.size()));
    rj.residuals *= s;
    rj.jacobian *= s;
    return rj;
  };
  p.minibatch_value_and_gradient = [sh](const Vectord& theta,
                                        const std::vector<Eigen::Index>& idx) {
    Matrixd xs(idx.size(), 1);
    Matrixd ys(idx.size(), 1);
    for (size_t i = 0; i < idx.size(); ++i) {
      xs(i, 0) = sh->inputs(idx[i], 0);
      ys(i, 0) = sh->targets(idx[i], 0);
    }
    return net::loss_and_gradient(sh->spec, theta, xs, ys);
  };
  return p;
}

double burgers_ic_value(double x, BurgersIc ic) {
  return ic == BurgersIc::NegSinPiX ? -std::sin(std::numbers::pi * x) : -std::sin(x);
}

double burgers_residual(double u, double u_x, double u_t, double u_xx, double nu) {
  return u_t + u * u_x - nu * u_xx;
}

BurgersProblem make_burgers_problem(double nu, int n_ic, int n_bc, int n_f, std::uint64_t seed,
                                    BurgersIc ic) {
  if (n_ic < 1 || n_bc < 1 || n_f < 1) {
    throw std::invalid_argument("make_burgers_problem: point counts must be >= 1");
  }
  if (!(nu > 0.0)) {
    throw std::invalid_argument("make_burgers_problem: viscosity must be positive");
  }
  BurgersProblem bp;
  bp.nu = nu;
  bp.ic = ic;
  std::mt19937_64 eng(seed);

  // Draw order is fixed (IC x's, BC t's, then the two LHS columns) so a seed
  // pins the whole point set.
  bp.ic_points.resize(n_ic, 3);
  for (int i = 0; i < n_ic; ++i) {
    const double x = -1.0 + 2.0 * unit_draw(eng);
    bp.ic_points(i, 0) = x;
    bp.ic_points(i, 1) = 0.0;
    bp.ic_points(i, 2) = burgers_ic_value(x, ic);
  }
  bp.bc_points.resize(n_bc, 3);
  for (int i = 0; i < n_bc; ++i) {
    bp.bc_points(i, 0) = (i < n_bc / 2) ? -1.0 : 1.0;
    bp.bc_points(i, 1) = unit_draw(eng);
    bp.bc_points(i, 2) = 0.0;
  }
  bp.collocation.resize(n_f, 2);
  bp.collocation.col(0) = lhs_column(n_f, -1.0, 1.0, eng);
  bp.collocation.col(1) = lhs_column(n_f, 0.0, 1.0, eng);
  return bp;
}

namespace {

Matrixd stack_data_points(const BurgersProblem& problem) {
  Matrixd data(problem.ic_points.rows() + problem.bc_points.rows(), 3);
  data.topRows(problem.ic_points.rows()) = problem.ic_points;
  data.bottomRows(problem.bc_points.rows()) = problem.bc_points;
  return data;
}

}  // namespace

double pinn_loss(const net::MlpSpec& spec, const Vectord& params, const BurgersProblem& problem) {
  const Matrixd data = stack_data_points(problem);
  if (data.rows() < 1 || problem.collocation.rows() < 1) {
    throw std::invalid_argument("pinn_loss: empty point sets");
  }
  const Matrixd pred = net::forward(spec, params, data.leftCols(2));
  const double mse_u = (pred.col(0) - data.col(2)).squaredNorm() / data.rows();
  const net::PinnFieldBatch f = net::pinn_field(spec, params, problem.collocation);
  const double mse_f =
      (f.u_t.array() + f.u.array() * f.u_x.array() - problem.nu * f.u_xx.array())
          .matrix()
          .squaredNorm() /
      problem.collocation.rows();
  return mse_u + mse_f;
}

optim::Problem make_burgers_objective(const net::MlpSpec& spec, const BurgersProblem& problem) {
  net::validate(spec);
  if (spec.input_dim != 2 || spec.output_dim != 1) {
    throw std::invalid_argument("the Burgers PINN needs a 2-input, 1-output network");
  }
  auto sh = std::make_shared<const BurgersShared>(
      BurgersShared{spec, stack_data_points(problem), problem.collocation, problem.nu});
  if (sh->data.rows() < 1 || sh->collocation.rows() < 1) {
    throw std::invalid_argument("the Burgers PINN needs data and collocation points");
  }
  const double su = 1.0 / std::sqrt(static_cast<double>(sh->data.rows()));
  const double sf = 1.0 / std::sqrt(static_cast<double>(sh->collocation.rows()));

  // Data rows scaled by 1/sqrt(N_u) and physics rows by 1/sqrt(N_f) turn the
  // stacked system into one whose plain squared norm is MSE_u + MSE_f, so the
  // same Gauss-Newton step and gradient identities hold as for regression.
  auto scaled_rj = [sh, su, sf](const Vectord& theta) {
    net::ResidualJacobian rj =
        net::pinn_residual_jacobian(sh->spec, theta, sh->data, sh->collocation, sh->nu);
    const Eigen::Index nu_rows = sh->data.rows();
    const Eigen::Index nf_rows = sh->collocation.rows();
    rj.residuals.head(nu_rows) *= su;
    rj.jacobian.topRows(nu_rows) *= su;
    rj.residuals.tail(nf_rows) *= sf;
    rj.jacobian.bottomRows(nf_rows) *= sf;
    return rj;
  };

  optim::Problem p;
  p.dim = net::param_count(spec);
  p.sample_count = static_cast<int>(sh->data.rows() + sh->collocation.rows());
  p.loss = [sh](const Vectord& theta) {
    BurgersProblem view;  // cheap alias of the shared buffers for pinn_loss
    view.nu = sh->nu;
    view.ic_points = sh->data;
    view.bc_points.resize(0, 3);
    view.collocation = sh->collocation;
    return pinn_loss(sh->spec, theta, view);
  };
  // Exactness over speed: the gradient is assembled from the scaled residual
  // system (∇ = 2·Jᵀr), sharing one verified code path with LM.
  p.value_and_gradient = [scaled_rj](const Vectord& theta) {
    const net::ResidualJacobian rj = scaled_rj(theta);
    return std::pair<double, Vectord>{rj.residuals.squaredNorm(),
                                      2.0 * (rj.jacobian.transpose() * rj.residuals)};
  };
  p.scaled_residual_jacobian = scaled_rj;
  return p;
}

Matrixd evaluate_field(const net::MlpSpec& spec, const Vectord& params, int nx, int nt) {
  if (nx < 2 || nt < 2) {
    throw std::invalid_argument("evaluate_field: need at least a 2x2 lattice");
  }
  Matrixd points(static_cast<Eigen::Index>(nx) * nt, 2);
  Eigen::Index row = 0;
  for (int j = 0; j < nt; ++j) {
    const double t = static_cast<double>(j) / (nt - 1);
    for (int i = 0; i < nx; ++i, ++row) {
      points(row, 0) = -1.0 + 2.0 * i / (nx - 1);
      points(row, 1) = t;
    }
  }
  const Matrixd u = net::forward(spec, params, points);
  Matrixd field(points.rows(), 3);
  field.leftCols(2) = points;
  field.col(2) = u.col(0);
  return field;
}

}  // namespace lmnet::problems
