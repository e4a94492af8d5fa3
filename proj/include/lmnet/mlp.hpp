#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lmnet/linalg.hpp"

// Dense feed-forward networks: forward evaluation, reverse-mode parameter
// gradients, per-sample residual Jacobians, and the input derivatives
// (u_x, u_t, u_xx) needed by physics-informed losses. All functions are pure
// in (spec, params, batch) and safe to call concurrently.
namespace lmnet::net {

enum class Activation { Tanh, Linear };

// Architecture description. Hidden layers are tanh, the output layer is
// linear; zero hidden layers gives a plain affine model (useful in optimizer
// unit tests).
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_widths{};
  int output_dim = 1;
  Activation hidden_activation = Activation::Tanh;
  Activation output_activation = Activation::Linear;

  bool operator==(const MlpSpec&) const = default;
};

// Throws std::invalid_argument unless every width is >= 1 and the activation
// pair is the supported (Tanh hidden, Linear output) combination.
void validate(const MlpSpec& spec);

// Total number of trainable parameters: sum over layers of in*out + out.
int param_count(const MlpSpec& spec);

// The canonical flat parameter layout shared by gradients, Jacobians, and
// optimizer state alike: for each layer in forward order, the weight matrix
// in row-major [out x in] order followed by the bias vector [out].
// Glorot-uniform weights (uniform in ±sqrt(6/(fan_in+fan_out))), zero biases;
// deterministic for a fixed seed.
Vectord init_params(const MlpSpec& spec, std::uint64_t seed);

// Batched forward pass. `inputs` is N x input_dim (one sample per row);
// the result is N x output_dim.
Matrixd forward(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs);

// Mean squared error over every residual entry: (1/(N*K)) * sum (pred - y)^2
// for N samples and K output components.
double loss_mse(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs,
                const Matrixd& targets);

// Exact reverse-mode gradient of loss_mse in the flat parameter layout.
Vectord loss_gradient(const MlpSpec& spec, const Vectord& params, const Matrixd& inputs,
                      const Matrixd& targets);

// Fused loss + gradient (one forward pass, one backward pass).
std::pair<double, Vectord> loss_and_gradient(const MlpSpec& spec, const Vectord& params,
                                             const Matrixd& inputs, const Matrixd& targets);

// Residual vector and its Jacobian with respect to the parameters.
// Sign convention: r_i = model(x_i) - target_i. Rows are ordered sample-major
// (sample 0's outputs, then sample 1's, ...); for single-output nets row i is
// simply sample i. Consistency: loss_gradient == (2/rows) * Jᵀ r.
struct ResidualJacobian {
  Vectord residuals;  // length N*K
  Matrixd jacobian;   // (N*K) x param_count
};

ResidualJacobian residual_jacobian(const MlpSpec& spec, const Vectord& params,
                                   const Matrixd& inputs, const Matrixd& targets);

// First- and second-order derivatives of a scalar field u(x, t) represented
// by a 2-input, 1-output network. Computed analytically by propagating
// (value, d/dx, d/dt, d2/dx2) jets through every layer.
struct InputDerivatives {
  double u = 0.0;
  double du_dx = 0.0;
  double du_dt = 0.0;
  double d2u_dx2 = 0.0;
};

InputDerivatives input_derivatives(const MlpSpec& spec, const Vectord& params, double x,
                                   double t);

// Batched version of input_derivatives: `points` is N x 2 with columns (x, t);
// each returned vector has length N.
struct PinnFieldBatch {
  Vectord u;
  Vectord u_x;
  Vectord u_t;
  Vectord u_xx;
};

PinnFieldBatch pinn_field(const MlpSpec& spec, const Vectord& params, const Matrixd& points);

// Stacked residual vector and Jacobian for a physics-informed loss on
// Burgers' equation. `data_points` is N_u x 3 with columns (x, t, target) and
// contributes rows r_i = u(x_i, t_i) - target_i; `collocation` is N_f x 2 and
// contributes rows f_j = u_t + u*u_x - nu*u_xx. Rows are unscaled; callers
// weight them as their loss demands. The physics rows' parameter derivatives
// are exact (reverse pass through the jet-propagated forward pass).
ResidualJacobian pinn_residual_jacobian(const MlpSpec& spec, const Vectord& params,
                                        const Matrixd& data_points, const Matrixd& collocation,
                                        double nu);

// Parameter persistence: a single-line JSON header carrying the architecture
// and parameter count, a newline, then the raw little-endian 64-bit floats.
void save_params(const std::filesystem::path& path, const MlpSpec& spec, const Vectord& params);
std::pair<MlpSpec, Vectord> load_params(const std::filesystem::path& path);

}  // namespace lmnet::net
