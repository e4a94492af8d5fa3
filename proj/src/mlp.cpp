#include "lmnet/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

namespace lmnet::net {
namespace {

using json = nlohmann::json;

// Per-layer geometry and offsets into the flat parameter vector.
struct Layout {
  std::vector<int> widths;  // d_0 .. d_{L}, length = layer count + 1
  std::vector<int> w_off;   // weight block offset per layer
  std::vector<int> b_off;   // bias block offset per layer
  int total = 0;
  int layers = 0;           // number of affine layers (hidden count + 1)
};

Layout make_layout(const MlpSpec& spec) {
  Layout lo;
  lo.widths.reserve(spec.hidden_widths.size() + 2);
  lo.widths.push_back(spec.input_dim);
  for (int w : spec.hidden_widths) lo.widths.push_back(w);
  lo.widths.push_back(spec.output_dim);
  lo.layers = static_cast<int>(lo.widths.size()) - 1;
  int off = 0;
  for (int l = 0; l < lo.layers; ++l) {
    const int in = lo.widths[l];
    const int out = lo.widths[l + 1];
    lo.w_off.push_back(off);
    off += in * out;
    lo.b_off.push_back(off);
    off += out;
  }
  lo.total = off;
  return lo;
}

using WMap = Eigen::Map<const Matrixd>;
using BMap = Eigen::Map<const Vectord>;

WMap weights(const Vectord& params, const Layout& lo, int l) {
  return WMap(params.data() + lo.w_off[l], lo.widths[l + 1], lo.widths[l]);
}

BMap biases(const Vectord& params, const Layout& lo, int l) {
  return BMap(params.data() + lo.b_off[l], lo.widths[l + 1]);
}

void check_params(const MlpSpec& spec, const Vectord& params, const Layout& lo) {
  validate(spec);
  if (params.size() != lo.total) {
    throw std::invalid_argument("params has length " + std::to_string(params.size()) +
                                " but the architecture needs " + std::to_string(lo.total));
  }
}

void check_batch(const MlpSpec& spec, const Matrixd& inputs, const Matrixd* targets) {
  if (inputs.rows() < 1) {
    throw std::invalid_argument("batch must contain at least one sample");
  }
  if (inputs.cols() != spec.input_dim) {
    throw std::invalid_argument("inputs have " + std::to_string(inputs.cols()) +
                                " columns but input_dim is " + std::to_string(spec.input_dim));
  }
  if (targets != nullptr) {
    if (targets->rows() != inputs.rows()) {
      throw std::invalid_argument("inputs and targets disagree on sample count");
    }
    if (targets->cols() != spec.output_dim) {
      throw std::invalid_argument("targets have " + std::to_string(targets->cols()) +
                                  " columns but output_dim is " + std::to_string(spec.output_dim));
    }
  }
}

// Activations per layer, samples as columns: acts[0] is d_0 x N inputs,
// acts[l+1] is layer l's output.
std::vector<Matrixd> forward_cache(const Vectord& params, const Layout& lo,
                                   const Matrixd& inputs) {
  std::vector<Matrixd> acts;
  acts.reserve(lo.layers + 1);
  acts.push_back(inputs.transpose());
  for (int l = 0; l < lo.layers; ++l) {
    Matrixd z = (weights(params, lo, l) * acts.back()).colwise() + biases(params, lo, l);
    if (l + 1 < lo.layers) {
      acts.push_back(z.array().tanh().matrix());
    } else {
      acts.push_back(std::move(z));
    }
  }
  return acts;
}

// Backpropagates output-layer sensitivities E (d_L x N) into a flat gradient.
Vectord backprop(const Vectord& params, const Layout& lo, const std::vector<Matrixd>& acts,
                 Matrixd E) {
  Vectord grad(lo.total);
  for (int l = lo.layers - 1; l >= 0; --l) {
    Eigen::Map<Matrixd> gw(grad.data() + lo.w_off[l], lo.widths[l + 1], lo.widths[l]);
    gw = E * acts[l].transpose();
    Eigen::Map<Vectord> gb(grad.data() + lo.b_off[l], lo.widths[l + 1]);
    gb = E.rowwise().sum();
    if (l > 0) {
      // tanh'(z) expressed through the cached activation: 1 - a^2.
      E = ((weights(params, lo, l).transpose() * E).array() *
           (1.0 - acts[l].array().square()))
              .matrix();
    }
  }
  return grad;
}

// Four-stream jet through the network: value, d/dx, d/dt, d2/dx2 of every
// activation with respect to the *network inputs* (x, t). Holding on to the
// intermediate streams lets the reverse pass differentiate the physics
// residual with respect to the parameters.
struct JetCache {
  // Pre-activation streams per layer (z) and post-activation streams (a).
  // a[0] holds the input jets; a[l+1] = activation(z[l]).
  std::vector<Matrixd> zv, zx, zt, zxx;
  std::vector<Matrixd> av, ax, at, axx;
};

JetCache jet_forward(const Vectord& params, const Layout& lo, const Matrixd& points) {
  const Eigen::Index n = points.rows();
  JetCache jc;
  jc.av.push_back(points.transpose());  // (x, t) values
  Matrixd ax0 = Matrixd::Zero(2, n);
  ax0.row(0).setOnes();  // dx/dx = 1, dt/dx = 0
  jc.ax.push_back(std::move(ax0));
  Matrixd at0 = Matrixd::Zero(2, n);
  at0.row(1).setOnes();  // dx/dt = 0, dt/dt = 1
  jc.at.push_back(std::move(at0));
  jc.axx.push_back(Matrixd::Zero(2, n));

  for (int l = 0; l < lo.layers; ++l) {
    const WMap w = weights(params, lo, l);
    jc.zv.push_back((w * jc.av[l]).colwise() + biases(params, lo, l));
    jc.zx.push_back(w * jc.ax[l]);
    jc.zt.push_back(w * jc.at[l]);
    jc.zxx.push_back(w * jc.axx[l]);
    if (l + 1 < lo.layers) {
      // tanh jets: s = tanh(z), p = 1 - s^2, q = p' = -2 s p.
      Matrixd s = jc.zv[l].array().tanh().matrix();
      Eigen::ArrayXXd p = 1.0 - s.array().square();
      Eigen::ArrayXXd q = -2.0 * s.array() * p;
      jc.ax.push_back((p * jc.zx[l].array()).matrix());
      jc.at.push_back((p * jc.zt[l].array()).matrix());
      jc.axx.push_back((q * jc.zx[l].array().square() + p * jc.zxx[l].array()).matrix());
      jc.av.push_back(std::move(s));
    } else {
      jc.av.push_back(jc.zv[l]);
      jc.ax.push_back(jc.zx[l]);
      jc.at.push_back(jc.zt[l]);
      jc.axx.push_back(jc.zxx[l]);
    }
  }
  return jc;
}

void check_pinn_spec(const MlpSpec& spec) {
  if (spec.input_dim != 2 || spec.output_dim != 1) {
    throw std::invalid_argument("PINN operations need a 2-input, 1-output network");
  }
}

}  // namespace

void validate(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1) {
    throw std::invalid_argument("input_dim and output_dim must be >= 1");
  }
  for (int w : spec.hidden_widths) {
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
  if (spec.hidden_activation != Activation::Tanh ||
      spec.output_activation != Activation::Linear) {
    throw std::invalid_argument("only tanh hidden layers with a linear output are supported");
  }
}

int param_count(const MlpSpec& spec) {
  validate(spec);
  return make_layout(spec).total;
}

Vectord init_params(const MlpSpec& spec, std::uint64_t seed) {
  const Layout lo = make_layout(spec);
  Vectord params = Vectord::Zero(lo.total);
  std::mt19937_64 eng(seed);
  // Engine output mapped to [0, 1) by hand so the stream is identical on
  // every platform (std::uniform_real_distribution is not portable).
  auto unit = [&eng]() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  for (int l = 0; l < lo.layers; ++l) {
    const double bound = std::sqrt(6.0 / (lo.widths[l] + lo.widths[l + 1]));
    double* w = params.data() + lo.w_off[l];
    const int count = lo.widths[l] * lo.widths[l + 1];
    for (int i = 0; i < count; ++i) {
      w[i] = bound * (2.0 * unit() - 1.0);
    }
    // biases stay zero
  }
  return params;
}

Matrixd forward(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs) {
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  check_batch(spec, inputs, nullptr);
  return forward_cache(params, lo, inputs).back().transpose();
}

double loss_mse(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs,
                const Matrixd& targets) {
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  check_batch(spec, inputs, &targets);
  const Matrixd pred = forward_cache(params, lo, inputs).back();
  return (pred - targets.transpose()).squaredNorm() / static_cast<double>(pred.size());
}

std::pair<double, Vectord> loss_and_gradient(const MlpSpec& spec, const Vectord& params,
                                             const Matrixd& inputs, const Matrixd& targets) {
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  check_batch(spec, inputs, &targets);
  const std::vector<Matrixd> acts = forward_cache(params, lo, inputs);
  const Matrixd resid = acts.back() - targets.transpose();
  const double scale = 2.0 / static_cast<double>(resid.size());
  const double loss = resid.squaredNorm() / static_cast<double>(resid.size());
  return {loss, backprop(params, lo, acts, scale * resid)};
}

Vectord loss_gradient(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs,
                      const Matrixd& targets) {
  return loss_and_gradient(spec, params, inputs, targets).second;
}

ResidualJacobian residual_jacobian(const MlpSpec& spec, const Vectord& params,
                                   const Matrixd& inputs, const Matrixd& targets) {
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  check_batch(spec, inputs, &targets);
  const Eigen::Index n = inputs.rows();
  const int k = spec.output_dim;
  const std::vector<Matrixd> acts = forward_cache(params, lo, inputs);

  ResidualJacobian rj;
  rj.residuals.resize(n * k);
  rj.jacobian.resize(n * k, lo.total);
  for (int out = 0; out < k; ++out) {
    for (Eigen::Index i = 0; i < n; ++i) {
      rj.residuals(i * k + out) = acts.back()(out, i) - targets(i, out);
    }
    // One delta stream per output component: D_l holds d r/d z_l for every
    // sample as columns; the Jacobian block for layer l is the per-sample
    // outer product D_l[:,i] · A_l[:,i]ᵀ.
    std::vector<Matrixd> deltas(lo.layers);
    Matrixd d = Matrixd::Zero(spec.output_dim, n);
    d.row(out).setOnes();
    deltas[lo.layers - 1] = d;
    for (int l = lo.layers - 1; l > 0; --l) {
      deltas[l - 1] = ((weights(params, lo, l).transpose() * deltas[l]).array() *
                       (1.0 - acts[l].array().square()))
                          .matrix();
    }
    for (int l = 0; l < lo.layers; ++l) {
      const int in = lo.widths[l];
      const int outw = lo.widths[l + 1];
      for (Eigen::Index i = 0; i < n; ++i) {
        double* row = rj.jacobian.data() + (i * k + out) * lo.total;
        Eigen::Map<Matrixd> wblk(row + lo.w_off[l], outw, in);
        wblk = deltas[l].col(i) * acts[l].col(i).transpose();
        Eigen::Map<Vectord> bblk(row + lo.b_off[l], outw);
        bblk = deltas[l].col(i);
      }
    }
  }
  return rj;
}

InputDerivatives input_derivatives(const MlpSpec& spec, const Vectord& params, double x,
                                   double t) {
  Matrixd point(1, 2);
  point << x, t;
  const PinnFieldBatch f = pinn_field(spec, params, point);
  return {f.u(0), f.u_x(0), f.u_t(0), f.u_xx(0)};
}

PinnFieldBatch pinn_field(const MlpSpec& spec, const Vectord& params, const Matrixd& points) {
  check_pinn_spec(spec);
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  check_batch(spec, points, nullptr);
  const JetCache jc = jet_forward(params, lo, points);
  PinnFieldBatch out;
  out.u = jc.av.back().row(0).transpose();
  out.u_x = jc.ax.back().row(0).transpose();
  out.u_t = jc.at.back().row(0).transpose();
  out.u_xx = jc.axx.back().row(0).transpose();
  return out;
}

ResidualJacobian pinn_residual_jacobian(const MlpSpec& spec, const Vectord& params,
                                        const Matrixd& data_points, const Matrixd& collocation,
                                        double nu) {
  check_pinn_spec(spec);
  const Layout lo = make_layout(spec);
  check_params(spec, params, lo);
  if (data_points.rows() < 1 || collocation.rows() < 1) {
    throw std::invalid_argument("PINN needs at least one data point and one collocation point");
  }
  if (data_points.cols() != 3 || collocation.cols() != 2) {
    throw std::invalid_argument("data points must be (x, t, target); collocation (x, t)");
  }

  const Eigen::Index nu_rows = data_points.rows();
  const Eigen::Index nf = collocation.rows();
  ResidualJacobian rj;
  rj.residuals.resize(nu_rows + nf);
  rj.jacobian.resize(nu_rows + nf, lo.total);

  // Data rows are plain value residuals; reuse the regression machinery.
  {
    const Matrixd inputs = data_points.leftCols(2);
    const Matrixd targets = data_points.col(2);
    const ResidualJacobian data = residual_jacobian(spec, params, inputs, targets);
    rj.residuals.head(nu_rows) = data.residuals;
    rj.jacobian.topRows(nu_rows) = data.jacobian;
  }

  // Physics rows: f = u_t + u·u_x - ν·u_xx at each collocation point.
  const JetCache jc = jet_forward(params, lo, collocation);
  const Eigen::ArrayXXd u = jc.av.back().array();
  const Eigen::ArrayXXd ux = jc.ax.back().array();
  const Eigen::ArrayXXd ut = jc.at.back().array();
  const Eigen::ArrayXXd uxx = jc.axx.back().array();
  rj.residuals.tail(nf) = (ut + u * ux - nu * uxx).matrix().row(0).transpose();

  // Reverse pass through the jet forward. Bars (adjoints) of the four
  // pre-activation streams, one column per collocation point; the seed is
  // df/d(output streams) with the linear output layer's z == a.
  Matrixd bzv = ux.matrix();
  Matrixd bzx = u.matrix();
  Matrixd bzt = Matrixd::Ones(1, nf);
  Matrixd bzxx = Matrixd::Constant(1, nf, -nu);

  for (int l = lo.layers - 1; l >= 0; --l) {
    const int in = lo.widths[l];
    const int outw = lo.widths[l + 1];
    // Parameter blocks: every stream contributes an outer product with the
    // matching input-side jet; only the value stream reaches the bias.
    for (Eigen::Index j = 0; j < nf; ++j) {
      double* row = rj.jacobian.data() + (nu_rows + j) * lo.total;
      Eigen::Map<Matrixd> wblk(row + lo.w_off[l], outw, in);
      wblk = bzv.col(j) * jc.av[l].col(j).transpose();
      wblk.noalias() += bzx.col(j) * jc.ax[l].col(j).transpose();
      wblk.noalias() += bzt.col(j) * jc.at[l].col(j).transpose();
      wblk.noalias() += bzxx.col(j) * jc.axx[l].col(j).transpose();
      Eigen::Map<Vectord> bblk(row + lo.b_off[l], outw);
      bblk = bzv.col(j);
    }
    if (l == 0) break;

    // Through the affine map into the previous layer's activation bars.
    const WMap w = weights(params, lo, l);
    const Matrixd bav = w.transpose() * bzv;
    const Matrixd bax = w.transpose() * bzx;
    const Matrixd bat = w.transpose() * bzt;
    const Matrixd baxx = w.transpose() * bzxx;

    // Through the previous layer's tanh jets. With s = tanh(zv), p = 1-s²,
    // q = -2sp and rr = q' = -2(p² + s·q):
    //   av = s, ax = p·zx, at = p·zt, axx = q·zx² + p·zxx.
    const int prev = l - 1;
    const Eigen::ArrayXXd s = jc.av[l].array();  // == tanh(zv[prev])
    const Eigen::ArrayXXd p = 1.0 - s.square();
    const Eigen::ArrayXXd q = -2.0 * s * p;
    const Eigen::ArrayXXd rr = -2.0 * (p.square() + s * q);
    const Eigen::ArrayXXd zx = jc.zx[prev].array();
    const Eigen::ArrayXXd zt = jc.zt[prev].array();
    const Eigen::ArrayXXd zxx = jc.zxx[prev].array();

    bzx = (bax.array() * p + baxx.array() * 2.0 * q * zx).matrix();
    bzt = (bat.array() * p).matrix();
    bzxx = (baxx.array() * p).matrix();
    bzv = (bav.array() * p + bax.array() * zx * q + bat.array() * zt * q +
           baxx.array() * (zx.square() * rr + zxx * q))
              .matrix();
  }
  return rj;
}

void save_params(const std::filesystem::path& path, const MlpSpec& spec, const Vectord& params) {
  const int count = param_count(spec);
  if (params.size() != count) {
    throw std::invalid_argument("params length does not match the architecture");
  }
  json header = {{"format", "lmnet-params"},
                 {"version", 1},
                 {"input_dim", spec.input_dim},
                 {"hidden_widths", spec.hidden_widths},
                 {"output_dim", spec.output_dim},
                 {"param_count", count}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(sizeof(double)) * params.size());
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::pair<MlpSpec, Vectord> load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open params file " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("params file " + path.string() + " is missing its header");
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument("params file " + path.string() + " has a bad header: " +
                                e.what());
  }
  if (header.value("format", "") != "lmnet-params") {
    throw std::invalid_argument(path.string() + " is not a parameter file");
  }
  MlpSpec spec;
  spec.input_dim = header.at("input_dim").get<int>();
  spec.hidden_widths = header.at("hidden_widths").get<std::vector<int>>();
  spec.output_dim = header.at("output_dim").get<int>();
  const int count = param_count(spec);
  if (header.at("param_count").get<int>() != count) {
    throw std::invalid_argument(path.string() + ": header param_count disagrees with the " +
                                "architecture");
  }
  Vectord params(count);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(sizeof(double)) * count);
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double)) * count) {
    throw std::invalid_argument(path.string() + " is truncated");
  }
  return {spec, std::move(params)};
}

}  // namespace lmnet::net
