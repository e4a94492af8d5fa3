// Acceptance gate: trains every headline experiment end to end and checks the
// six release criteria, printing exactly one PASS/FAIL line per criterion.
// Runs on one core in well under the CI timeout; artifacts land in
// ./acceptance_out for later inspection.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lmnet/harness.hpp"

namespace fs = std::filesystem;
namespace net = lmnet::net;
namespace optim = lmnet::optim;
namespace problems = lmnet::problems;
namespace harness = lmnet::harness;
using lmnet::Matrixd;
using lmnet::Vectord;

namespace {

constexpr int kSeeds = 5;

struct CriterionResult {
  int id = 0;
  bool pass = false;
  std::string detail;
};

double median5(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

void dump_records(const fs::path& path, const optim::RunResult& run, const std::string& phase) {
  std::vector<harness::RecordRow> rows;
  rows.reserve(run.records.size());
  for (const auto& r : run.records) {
    rows.push_back({r.epoch, r.loss, r.elapsed_s, r.cumulative_evals, phase});
  }
  harness::write_records_csv(path, rows);
}

// Best-so-far value after the first `epochs` recorded epochs.
double best_through(const std::vector<optim::RunRecord>& records, long epochs) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (r.epoch > epochs) break;
    best = std::min(best, r.loss);
  }
  return best;
}

struct SincSeedStats {
  double lm_best = 0.0;
  double adam_best = 0.0;
  double adam_best_1300 = 0.0;
  double chained_bfgs_best = 0.0;
  double chained_lbfgs_best = 0.0;
};

// One seed of the full sinc protocol: LM alone, Adam alone, and both chained
// variants continuing from Adam's final iterate.
SincSeedStats run_sinc_seed(const optim::Problem& problem, const net::MlpSpec& spec,
                            std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const Vectord theta0 = net::init_params(spec, seed);

  optim::OptimizerConfig lm_cfg;
  const optim::RunResult lm = optim::run_optimizer(problem, optim::Algorithm::Lm, lm_cfg,
                                                   {150, 0.0, 0.0, 0}, theta0, seed);
  dump_records(out_dir / "lm.csv", lm, "lm");

  optim::OptimizerConfig adam_cfg;
  adam_cfg.adam.lr = 1e-2;  // full-batch plateau configuration
  const optim::RunResult adam = optim::run_optimizer(problem, optim::Algorithm::Adam, adam_cfg,
                                                     {1500, 0.0, 0.0, 0}, theta0, seed);
  dump_records(out_dir / "adam.csv", adam, "adam");

  // Chained second phases: capped at 5000 outer iterations; patience only
  // cuts off runs that have been numerically stationary for 500 straight
  // iterations (a failed line search repeats forever otherwise).
  optim::OptimizerConfig qn_cfg;
  optim::StopCriteria chain_stop{5000, 0.0, 0.0, 500};
  const optim::RunResult bfgs = optim::run_optimizer(problem, optim::Algorithm::Bfgs, qn_cfg,
                                                     chain_stop, adam.final_params, seed);
  dump_records(out_dir / "chained_bfgs.csv", bfgs, "bfgs");
  const optim::RunResult lbfgs = optim::run_optimizer(problem, optim::Algorithm::Lbfgs, qn_cfg,
                                                      chain_stop, adam.final_params, seed);
  dump_records(out_dir / "chained_lbfgs.csv", lbfgs, "lbfgs");

  SincSeedStats s;
  s.lm_best = lm.best_loss;
  s.adam_best = adam.best_loss;
  s.adam_best_1300 = best_through(adam.records, 1300);
  s.chained_bfgs_best = std::min(adam.best_loss, bfgs.best_loss);
  s.chained_lbfgs_best = std::min(adam.best_loss, lbfgs.best_loss);
  return s;
}

// Wall and antisymmetry sanity of the exported Burgers field.
bool field_sane(const net::MlpSpec& spec, const Vectord& params, double& wall_max,
                double& antisym_max) {
  const int nx = 101, nt = 51;
  const Matrixd field = problems::evaluate_field(spec, params, nx, nt);
  wall_max = 0.0;
  antisym_max = 0.0;
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double u = field(static_cast<Eigen::Index>(j) * nx + i, 2);
      if (i == 0 || i == nx - 1) wall_max = std::max(wall_max, std::abs(u));
      const double u_mirror = field(static_cast<Eigen::Index>(j) * nx + (nx - 1 - i), 2);
      antisym_max = std::max(antisym_max, std::abs(u + u_mirror));
    }
  }
  return wall_max <= 0.05 && antisym_max <= 0.1;
}

// ---------------------------------------------------------------------------
// Criterion 6 property checks (no training, seconds total).
// ---------------------------------------------------------------------------

std::mt19937_64 prop_rng(12345);

Matrixd random_matrix(int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrixd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = nd(prop_rng);
  }
  return m;
}

struct Quadratic {
  Matrixd a;
  Vectord b;
  explicit Quadratic(int n) {
    const Matrixd m = random_matrix(n, n);
    a = m.transpose() * m + n * Matrixd::Identity(n, n);
    b = random_matrix(n, 1);
  }
  double value(const Vectord& x) const { return 0.5 * x.dot(a * x) - b.dot(x); }
  Vectord grad(const Vectord& x) const { return a * x - b; }
  optim::ValueGrad vg() const {
    return [this](const Vectord& x) { return std::pair<double, Vectord>{value(x), grad(x)}; };
  }
};

bool prop_fd_gradient(std::string& why) {
  const net::MlpSpec spec{2, {8, 8}, 2};
  const Vectord theta = net::init_params(spec, 7);
  const Matrixd xs = random_matrix(12, 2);
  const Matrixd ys = random_matrix(12, 2);
  const auto [loss, grad] = net::loss_and_gradient(spec, theta, xs, ys);
  (void)loss;
  const double h = 1e-6;
  Vectord p = theta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = p(i);
    p(i) = saved + h;
    const double fp = net::loss_mse(spec, p, xs, ys);
    p(i) = saved - h;
    const double fm = net::loss_mse(spec, p, xs, ys);
    p(i) = saved;
    worst = std::max(worst, std::abs(grad(i) - (fp - fm) / (2 * h)));
  }
  const double tol = 1e-7 * (1.0 + grad.lpNorm<Eigen::Infinity>());
  why = "max gradient FD deviation " + sci(worst) + " (tol " + sci(tol) + ")";
  return worst <= tol;
}

bool prop_gradient_identity(std::string& why) {
  const net::MlpSpec spec{1, {6, 6}, 1};
  const Vectord theta = net::init_params(spec, 3);
  const Matrixd xs = random_matrix(40, 1);
  const Matrixd ys = random_matrix(40, 1);
  const auto [loss, grad] = net::loss_and_gradient(spec, theta, xs, ys);
  (void)loss;
  const net::ResidualJacobian rj = net::residual_jacobian(spec, theta, xs, ys);
  const Vectord via_j = (2.0 / 40.0) * (rj.jacobian.transpose() * rj.residuals);
  const double dev = (grad - via_j).lpNorm<Eigen::Infinity>();
  const double tol = 1e-10 * (1.0 + grad.lpNorm<Eigen::Infinity>());
  why = "grad vs (2/N) J^T r deviation " + sci(dev);
  return dev <= tol;
}

bool prop_lm_linear_exactness(std::string& why) {
  Matrixd j(3, 2);
  j << 2, 0, 0, 3, 1, 1;
  Vectord y(3);
  y << 4, 9, 5;
  const auto residuals_at = [&](const Vectord& x) -> Vectord { return j * x - y; };
  Vectord x = Vectord::Zero(2);
  optim::LmConfig cfg;
  cfg.lambda0 = 1e-12;
  optim::LmState st(cfg);
  net::ResidualJacobian rj;
  rj.residuals = residuals_at(x);
  rj.jacobian = j;
  const optim::LmOutcome out = optim::lm_step(
      st, x, rj, [&](const Vectord& q) { return residuals_at(q).squaredNorm(); },
      rj.residuals.squaredNorm());
  const double gnorm = (2.0 * (j.transpose() * residuals_at(x))).norm();
  why = "post-step gradient norm " + sci(gnorm) + (out.accepted ? "" : " (step rejected!)");
  return out.accepted && gnorm <= 1e-8;
}

bool prop_bfgs(std::string& why) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int p : {2, 4, 8}) {
    Quadratic q(p);
    optim::BfgsState st(p);
    Vectord x = random_matrix(p, 1);
    auto [f, g] = q.vg()(x);
    int iters = 0;
    while (g.lpNorm<Eigen::Infinity>() > 1e-10 && iters < 2 * p) {
      const optim::StepOutcome out = optim::bfgs_step(st, x, f, g, q.vg(), {});
      f = out.loss;
      g = out.grad;
      ++iters;
    }
    if (g.lpNorm<Eigen::Infinity>() > 1e-10) {
      why = "dim " + std::to_string(p) + " not converged in 2P iterations";
      return false;
    }
    if ((st.H - st.H.transpose()).lpNorm<Eigen::Infinity>() > 1e-12) {
      why = "H asymmetric at dim " + std::to_string(p);
      return false;
    }
    for (int t = 0; t < 100; ++t) {
      Vectord z(p);
      for (int i = 0; i < p; ++i) z(i) = ud(prop_rng);
      if (z.norm() > 0.0 && z.dot(st.H * z) <= 0.0) {
        why = "H not positive definite at dim " + std::to_string(p);
        return false;
      }
    }
  }
  why = "converged within 2P iterations for P in {2,4,8}; H symmetric positive definite";
  return true;
}

bool prop_lbfgs_equivalence(std::string& why) {
  double worst = 0.0;
  for (int p : {2, 4, 6}) {
    Quadratic q(p);
    optim::BfgsState bst(p);
    optim::LbfgsState lst(64);
    Vectord xb = random_matrix(p, 1);
    Vectord xl = xb;
    auto [fb, gb] = q.vg()(xb);
    double fl = fb;
    Vectord gl = gb;
    const auto exact_alpha = [&q](const Vectord& d, const Vectord& g) {
      return -g.dot(d) / d.dot(q.a * d);
    };
    for (int it = 0; it < 10; ++it) {
      if (gb.lpNorm<Eigen::Infinity>() <= 1e-12) break;
      const Vectord db = -(bst.H * gb);
      const Vectord dl = optim::lbfgs_direction(lst, gl);
      worst = std::max(
          worst, (db.normalized() - dl.normalized()).lpNorm<Eigen::Infinity>());
      optim::WolfeParams wb;
      wb.alpha_init = exact_alpha(db, gb);
      const optim::StepOutcome ob = optim::bfgs_step(bst, xb, fb, gb, q.vg(), wb);
      fb = ob.loss;
      gb = ob.grad;
      optim::WolfeParams wl;
      wl.alpha_init = exact_alpha(dl, gl);
      const optim::StepOutcome ol = optim::lbfgs_step(lst, xl, fl, gl, q.vg(), wl);
      fl = ol.loss;
      gl = ol.grad;
    }
  }
  why = "max unit-direction deviation " + sci(worst) + " under exact line search";
  return worst <= 1e-10;
}

bool prop_spd_solve(std::string& why) {
  double worst_ratio = 0.0;
  for (int n : {1, 5, 13, 50}) {
    const Matrixd m = random_matrix(n, n);
    const Matrixd a = m.transpose() * m + n * Matrixd::Identity(n, n);
    const Vectord b = random_matrix(n, 1);
    const Vectord x = lmnet::spd_solve(a, b);
    const double resid = (a * x - b).lpNorm<Eigen::Infinity>();
    worst_ratio = std::max(worst_ratio, resid / (1.0 + b.lpNorm<Eigen::Infinity>()));
  }
  why = "worst backward error ratio " + sci(worst_ratio) + " (tol 1e-8)";
  return worst_ratio <= 1e-8;
}

bool prop_determinism(std::string& why) {
  const net::MlpSpec spec{1, {8}, 1};
  const auto data = problems::make_sinc_dataset(200, problems::SincKind::Unnormalized);
  const optim::Problem prob = problems::make_sinc_problem(spec, data);
  const Vectord theta0 = net::init_params(spec, 7);
  for (optim::Algorithm alg : {optim::Algorithm::Lm, optim::Algorithm::Adam}) {
    const optim::RunResult a = optim::run_optimizer(prob, alg, {}, {10, 0.0, 0.0, 0}, theta0, 7);
    const optim::RunResult b = optim::run_optimizer(prob, alg, {}, {10, 0.0, 0.0, 0}, theta0, 7);
    if (a.records.size() != b.records.size()) {
      why = "record counts differ";
      return false;
    }
    for (size_t i = 0; i < a.records.size(); ++i) {
      if (a.records[i].loss != b.records[i].loss ||
          a.records[i].cumulative_evals != b.records[i].cumulative_evals) {
        why = "records differ at epoch " + std::to_string(i + 1);
        return false;
      }
    }
    if (!(a.final_params == b.final_params)) {
      why = "final parameters differ";
      return false;
    }
  }
  why = "repeat runs are bit-identical (records and parameters, LM and Adam)";
  return true;
}

}  // namespace

int main() {
  const fs::path out_root = "acceptance_out";
  fs::create_directories(out_root);
  std::vector<CriterionResult> results;

  // ------------------------------------------------------------------ sinc
  std::printf("== sinc protocol: 1x[20,20]x1 tanh net, 481 params, n=2000, seeds 0-4 ==\n");
  const net::MlpSpec sinc_spec{1, {20, 20}, 1};
  const auto sinc_data = problems::make_sinc_dataset(2000, problems::SincKind::Unnormalized);
  const optim::Problem sinc_prob = problems::make_sinc_problem(sinc_spec, sinc_data);

  std::vector<SincSeedStats> stats;
  for (int seed = 0; seed < kSeeds; ++seed) {
    stats.push_back(run_sinc_seed(sinc_prob, sinc_spec, seed,
                                  out_root / ("sinc_seed" + std::to_string(seed))));
    const SincSeedStats& s = stats.back();
    std::printf("  seed %d: LM %s | Adam %s (best@1300 %s) | +BFGS %s | +L-BFGS %s\n", seed,
                sci(s.lm_best).c_str(), sci(s.adam_best).c_str(), sci(s.adam_best_1300).c_str(),
                sci(s.chained_bfgs_best).c_str(), sci(s.chained_lbfgs_best).c_str());
    std::fflush(stdout);
  }

  {  // Criterion 1: LM headline.
    int hits = 0;
    std::string per_seed;
    for (const auto& s : stats) {
      if (s.lm_best <= 1e-6) ++hits;
      per_seed += (per_seed.empty() ? "" : ", ") + sci(s.lm_best);
    }
    results.push_back({1, hits >= 3,
                       "LM best MSE <= 1e-6 within 150 epochs on " + std::to_string(hits) +
                           "/5 seeds (" + per_seed + ")"});
  }

  {  // Criterion 2: optimizer ordering by median best MSE.
    std::vector<double> lm, adam, cb, cl;
    for (const auto& s : stats) {
      lm.push_back(s.lm_best);
      adam.push_back(s.adam_best);
      cb.push_back(s.chained_bfgs_best);
      cl.push_back(s.chained_lbfgs_best);
    }
    const double m_lm = median5(lm), m_adam = median5(adam), m_cb = median5(cb),
                 m_cl = median5(cl);
    const bool ordering = m_lm < m_cb && m_cb < m_cl && m_cl <= m_adam;
    const bool ratio = m_lm <= m_adam / 100.0;
    results.push_back(
        {2, ordering && ratio,
         "medians: LM " + sci(m_lm) + ", chained-BFGS " + sci(m_cb) + ", chained-L-BFGS " +
             sci(m_cl) + ", Adam " + sci(m_adam) + "; need LM < cBFGS < cL-BFGS <= Adam" +
             (ordering ? " (holds)" : " (violated)") + " and LM <= Adam/100" +
             (ratio ? " (holds)" : " (violated)")});
  }

  {  // Criterion 3: Adam window and plateau.
    int both = 0;
    std::string per_seed;
    for (const auto& s : stats) {
      const bool window = s.adam_best >= 5e-5 && s.adam_best <= 5e-3;
      const double improvement = (s.adam_best_1300 - s.adam_best) / s.adam_best_1300;
      const bool plateau = improvement < 0.10;
      if (window && plateau) ++both;
      per_seed += (per_seed.empty() ? "" : ", ") + sci(s.adam_best) + "/" +
                  sci(improvement) + (window && plateau ? " ok" : " no");
    }
    results.push_back({3, both >= 4,
                       "best in [5e-5,5e-3] and <10% improvement over the last 200 epochs on " +
                           std::to_string(both) + "/5 seeds (best/improvement: " + per_seed +
                           ")"});
  }

  // ------------------------------------------------------------------ grid
  std::printf("== grid: layers {1,2,3,4} x hidden {16,32,48,64,80}, Adam 5000 epochs ==\n");
  std::fflush(stdout);
  {
    harness::ExperimentConfig base;
    base.problem = "sinc";
    base.sinc_n = 2000;
    base.opt.adam.lr = 1e-2;
    const std::vector<int> hus{16, 32, 48, 64, 80};
    const std::vector<int> layers{1, 2, 3, 4};
    const auto cells = harness::run_grid(base, hus, layers, 5000, 0, out_root / "grid");

    auto cell = [&](int l, int h) -> const harness::GridCell& {
      for (const auto& c : cells) {
        if (c.layers == l && c.hidden_units == h) return c;
      }
      throw std::logic_error("grid cell missing");
    };
    for (const auto& c : cells) {
      std::printf("  L%d HU%-2d params %-5d best %s\n", c.layers, c.hidden_units, c.param_count,
                  sci(c.best_loss).c_str());
    }
    std::fflush(stdout);

    bool depth_ok = true;
    std::string depth_why;
    for (int h : hus) {
      if (!(cell(1, h).best_loss > cell(2, h).best_loss)) {
        depth_ok = false;
        depth_why += " HU" + std::to_string(h) + ": 1-layer " + sci(cell(1, h).best_loss) +
                     " !> 2-layer " + sci(cell(2, h).best_loss) + ";";
      }
    }
    double best3 = std::numeric_limits<double>::infinity();
    for (int h : hus) best3 = std::min(best3, cell(3, h).best_loss);

    const bool counts_ok = cell(1, 80).param_count == 241 && cell(2, 80).param_count == 6721 &&
                           cell(3, 64).param_count == 8513 && cell(3, 80).param_count == 13201 &&
                           cell(4, 48).param_count == 7201 && cell(4, 64).param_count == 12673 &&
                           net::param_count(net::MlpSpec{1, {20, 20}, 1}) == 481;

    results.push_back(
        {4, depth_ok && best3 < 1e-5 && counts_ok,
         std::string("1-layer worse than 2-layer at every width") +
             (depth_ok ? " (holds)" : " (violated:" + depth_why + ")") + "; best 3-layer " +
             sci(best3) + (best3 < 1e-5 ? " < 1e-5" : " >= 1e-5") + "; param counts " +
             (counts_ok ? "match 241/481/6721/8513/13201/7201/12673 exactly"
                        : "DO NOT match the pinned values")});
  }

  // --------------------------------------------------------------- burgers
  std::printf("== Burgers PINN: -sin(pi x), nu=0.01/pi, 2x[20x8]x1 net, LM 50 epochs ==\n");
  std::fflush(stdout);
  {
    const net::MlpSpec pinn_spec{2, std::vector<int>(8, 20), 1};
    const double nu = 0.01 / std::numbers::pi;
    int hits = 0;
    int fields_checked = 0;
    bool fields_ok = true;
    std::string per_seed, field_why;
    for (int seed = 0; seed < kSeeds; ++seed) {
      const auto bp = problems::make_burgers_problem(nu, 50, 50, 2000, seed);
      const optim::Problem prob = problems::make_burgers_objective(pinn_spec, bp);
      const Vectord theta0 = net::init_params(pinn_spec, seed);
      const optim::RunResult run = optim::run_optimizer(prob, optim::Algorithm::Lm, {},
                                                        {50, 0.0, 0.0, 0}, theta0, seed);
      dump_records(out_root / ("burgers_seed" + std::to_string(seed) + ".csv"), run, "lm");
      const bool hit = run.best_loss <= 1e-4;
      if (hit) {
        ++hits;
        ++fields_checked;
        double wall = 0.0, anti = 0.0;
        const bool sane = field_sane(pinn_spec, run.best_params, wall, anti);
        if (!sane) {
          fields_ok = false;
          field_why += " seed " + std::to_string(seed) + ": wall " + sci(wall) + ", antisym " +
                       sci(anti) + ";";
        }
        std::printf("  seed %d: best %s at epoch %ld; field wall %s antisym %s\n", seed,
                    sci(run.best_loss).c_str(), run.best_epoch, sci(wall).c_str(),
                    sci(anti).c_str());
      } else {
        std::printf("  seed %d: best %s at epoch %ld (miss)\n", seed, sci(run.best_loss).c_str(),
                    run.best_epoch);
      }
      std::fflush(stdout);
      per_seed += (per_seed.empty() ? "" : ", ") + sci(run.best_loss);
    }
    const std::string field_clause =
        fields_checked == 0
            ? "no converged seed, field sanity unchecked"
            : "field sanity on " + std::to_string(fields_checked) + " converged seed(s): " +
                  (fields_ok ? "|u(+-1,t)| <= 0.05 and |u(x,t)+u(-x,t)| <= 0.1 hold"
                             : "VIOLATED:" + field_why);
    results.push_back(
        {5, hits >= 3 && fields_ok,
         "total loss <= 1e-4 within 50 epochs on " + std::to_string(hits) + "/5 seeds (" +
             per_seed + "); " + field_clause});
  }

  // -------------------------------------------------------------- properties
  std::printf("== property suites ==\n");
  {
    struct Prop {
      const char* name;
      bool (*fn)(std::string&);
    };
    const Prop props[] = {
        {"gradient finite differences", prop_fd_gradient},
        {"grad = (2/N) J^T r", prop_gradient_identity},
        {"LM one-step linear exactness", prop_lm_linear_exactness},
        {"BFGS convergence/PD", prop_bfgs},
        {"L-BFGS/BFGS equivalence", prop_lbfgs_equivalence},
        {"spd_solve backward error", prop_spd_solve},
        {"determinism", prop_determinism},
    };
    bool all = true;
    std::string detail;
    for (const Prop& p : props) {
      std::string why;
      const bool ok = p.fn(why);
      all = all && ok;
      std::printf("  %s %s: %s\n", ok ? "ok  " : "FAIL", p.name, why.c_str());
      if (!ok) detail += std::string(detail.empty() ? "" : "; ") + p.name + " failed: " + why;
    }
    results.push_back({6, all, all ? "all property suites pass" : detail});
  }

  // ------------------------------------------------------------------ report
  std::printf("\n");
  int failures = 0;
  for (const auto& r : results) {
    std::printf("[%s] criterion %d: %s\n", r.pass ? "PASS" : "FAIL", r.id, r.detail.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("%d/6 criteria passed\n", 6 - failures);
  return failures == 0 ? 0 : 1;
}
