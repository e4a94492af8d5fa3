// lmnet command-line harness: train small dense nets on the bundled
// function-fitting and Burgers PINN problems and write records/params/curves.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmnet/harness.hpp"

namespace {

using lmnet::harness::ExperimentConfig;
using lmnet::harness::RunOutput;

struct CommonArgs {
  std::string config_path;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<long> epochs;
  std::optional<std::string> optimizer;
  bool full = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "JSON experiment config")->required();
  cmd->add_option("-o,--out-dir", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override RNG seed");
  cmd->add_option("--epochs", args.epochs, "override stop.max_epochs");
  cmd->add_option("--optimizer", args.optimizer, "override optimizer (adam|bfgs|lbfgs|lm)");
  cmd->add_flag("--full", args.full, "full-scale sampling (sinc n=20000, burgers n_f=10000)");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = lmnet::harness::load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.epochs) {
    if (*args.epochs < 1) throw std::invalid_argument("--epochs must be >= 1");
    cfg.stop.max_epochs = *args.epochs;
  }
  if (args.optimizer) {
    ExperimentConfig probe = lmnet::harness::parse_config_text("{\"optimizer\":\"" +
                                                               *args.optimizer + "\"}");
    cfg.algorithm = probe.algorithm;
  }
  if (args.full) {
    cfg.sinc_n = 20000;
    cfg.n_f = 10000;
  }
  return cfg;
}

void print_outcome(const RunOutput& out) {
  std::cout << "best_loss=" << lmnet::harness::format_double(out.best_loss) << " best_epoch="
            << out.best_epoch << " phase=" << out.best_phase << " params=" << out.param_count
            << " time_s=" << out.total_time_s << '\n';
  std::cout << "records: " << out.records_csv.string() << '\n';
  if (out.numerical_failure) {
    std::cout << "numerical failure: no step was accepted\n";
  }
}

int run_fit_sinc(const CommonArgs& args, std::optional<long> sinc_n, bool normalized) {
  ExperimentConfig cfg = load_with_overrides(args);
  if (cfg.problem != "sinc") throw std::invalid_argument("fit-sinc needs a sinc config");
  if (sinc_n) cfg.sinc_n = *sinc_n;
  if (normalized) cfg.sinc_kind = lmnet::problems::SincKind::Normalized;
  const RunOutput out = lmnet::harness::run_single(cfg, args.out_dir);
  lmnet::harness::export_fit_curve(cfg.spec, out.best_params, 601, cfg.sinc_kind,
                                   args.out_dir / "curve.csv");
  print_outcome(out);
  return out.numerical_failure ? 2 : 0;
}

int run_fit_burgers(const CommonArgs& args, std::optional<long> n_f, std::optional<double> nu,
                    int field_nx, int field_nt) {
  ExperimentConfig cfg = load_with_overrides(args);
  if (cfg.problem != "burgers") throw std::invalid_argument("fit-burgers needs a burgers config");
  if (n_f) cfg.n_f = *n_f;
  if (nu) cfg.nu = *nu;
  const RunOutput out = lmnet::harness::run_single(cfg, args.out_dir);
  lmnet::harness::export_field_csv(cfg.spec, out.best_params, field_nx, field_nt,
                                   args.out_dir / "field.csv");
  print_outcome(out);
  return out.numerical_failure ? 2 : 0;
}

int run_chain(const CommonArgs& args, std::optional<std::string> second,
              std::optional<long> second_epochs) {
  ExperimentConfig cfg = load_with_overrides(args);
  if (second) {
    ExperimentConfig probe =
        lmnet::harness::parse_config_text("{\"chain\":{\"second\":\"" + *second + "\"}}");
    cfg.chain_second = probe.chain_second;
  }
  if (second_epochs) {
    if (*second_epochs < 1) throw std::invalid_argument("--second-epochs must be >= 1");
    cfg.chain_stop.max_epochs = *second_epochs;
  }
  const RunOutput out = lmnet::harness::run_chained(cfg, args.out_dir);
  print_outcome(out);
  return 0;
}

int run_grid_cmd(const CommonArgs& args, std::vector<int> hidden_units, std::vector<int> layers) {
  ExperimentConfig cfg = load_with_overrides(args);
  if (!hidden_units.empty()) cfg.grid_hidden_units = hidden_units;
  if (!layers.empty()) cfg.grid_layers = layers;
  if (args.epochs) cfg.grid_epochs = *args.epochs;
  const std::vector<lmnet::harness::GridCell> cells = lmnet::harness::run_grid(
      cfg, cfg.grid_hidden_units, cfg.grid_layers, cfg.grid_epochs, cfg.seed, args.out_dir);
  for (const lmnet::harness::GridCell& c : cells) {
    std::cout << "L" << c.layers << " HU" << c.hidden_units << " params=" << c.param_count
              << " best_loss=" << lmnet::harness::format_double(c.best_loss) << '\n';
  }
  std::cout << "grid summary: " << (args.out_dir / "grid_summary.csv").string() << '\n';
  return 0;
}

int run_export_curve(const std::string& params_path, const std::string& csv_path, int n_points,
                     bool normalized) {
  const auto [spec, params] = lmnet::net::load_params(params_path);
  lmnet::harness::export_fit_curve(spec, params, n_points,
                                   normalized ? lmnet::problems::SincKind::Normalized
                                              : lmnet::problems::SincKind::Unnormalized,
                                   csv_path);
  std::cout << "wrote " << csv_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lmnet: least-squares training for small dense networks"};
  app.require_subcommand(1);

  CommonArgs sinc_args;
  std::optional<long> sinc_n;
  bool sinc_normalized = false;
  CLI::App* fit_sinc = app.add_subcommand("fit-sinc", "train a net on the sinc target");
  add_common(fit_sinc, sinc_args);
  fit_sinc->add_option("--sinc-n", sinc_n, "number of training points");
  fit_sinc->add_flag("--normalized", sinc_normalized, "fit sin(pi a x)/(pi a x) instead");

  CommonArgs burgers_args;
  std::optional<long> n_f;
  std::optional<double> nu;
  int field_nx = 101, field_nt = 51;
  CLI::App* fit_burgers =
      app.add_subcommand("fit-burgers", "train a PINN on the viscous Burgers equation");
  add_common(fit_burgers, burgers_args);
  fit_burgers->add_option("--n-f", n_f, "number of collocation points");
  fit_burgers->add_option("--nu", nu, "viscosity");
  fit_burgers->add_option("--field-nx", field_nx, "x resolution of the exported field");
  fit_burgers->add_option("--field-nt", field_nt, "t resolution of the exported field");

  CommonArgs chain_args;
  std::optional<std::string> chain_second;
  std::optional<long> second_epochs;
  CLI::App* chain =
      app.add_subcommand("chain", "run Adam, then continue with a quasi-Newton method");
  add_common(chain, chain_args);
  chain->add_option("--second", chain_second, "second-phase optimizer (bfgs|lbfgs)");
  chain->add_option("--second-epochs", second_epochs, "second-phase iteration cap");

  CommonArgs grid_args;
  std::vector<int> grid_hu, grid_layers;
  CLI::App* grid = app.add_subcommand("grid", "sweep depth x width on the sinc target");
  add_common(grid, grid_args);
  grid->add_option("--hidden-units", grid_hu, "hidden units per layer to sweep");
  grid->add_option("--layers", grid_layers, "layer counts to sweep");

  std::string params_path, curve_path = "curve.csv";
  int curve_points = 601;
  bool curve_normalized = false;
  CLI::App* export_curve =
      app.add_subcommand("export-curve", "evaluate saved params against the sinc target");
  export_curve->add_option("-p,--params", params_path, "params.bin file")->required();
  export_curve->add_option("-o,--output", curve_path, "output CSV path");
  export_curve->add_option("--points", curve_points, "number of sample points");
  export_curve->add_flag("--normalized", curve_normalized, "compare against the normalized sinc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // keep --help/--version at 0, fold parse errors to 1
  }

  try {
    if (fit_sinc->parsed()) return run_fit_sinc(sinc_args, sinc_n, sinc_normalized);
    if (fit_burgers->parsed()) return run_fit_burgers(burgers_args, n_f, nu, field_nx, field_nt);
    if (chain->parsed()) return run_chain(chain_args, chain_second, second_epochs);
    if (grid->parsed()) return run_grid_cmd(grid_args, grid_hu, grid_layers);
    if (export_curve->parsed()) {
      return run_export_curve(params_path, curve_path, curve_points, curve_normalized);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
