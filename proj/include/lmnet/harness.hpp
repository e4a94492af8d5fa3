#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lmnet/mlp.hpp"
#include "lmnet/optimizers.hpp"
#include "lmnet/problems.hpp"

// Experiment orchestration: JSON configuration, seeded single/chained/grid
// runs, and CSV/JSON persistence of run records, fitted curves, and field
// exports. This is the layer the CLI binary calls into.
namespace lmnet::harness {

// One experiment, fully specified. JSON schema documented in the README;
// every field has a default so a minimal config is `{}`.
struct ExperimentConfig {
  std::string problem = "sinc";  // "sinc" | "burgers"
  net::MlpSpec spec{1, {20, 20}, 1};
  bool spec_given = false;  // whether the config named an architecture
  optim::Algorithm algorithm = optim::Algorithm::Lm;
  optim::OptimizerConfig opt{};
  optim::StopCriteria stop{150, 0.0, 0.0, 0};
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> warm_start;

  // sinc sizing
  int sinc_n = 2000;
  problems::SincKind sinc_kind = problems::SincKind::Unnormalized;

  // burgers sizing
  double nu = 0.01 / 3.14159265358979323846;
  int n_ic = 50;
  int n_bc = 50;
  int n_f = 2000;
  problems::BurgersIc ic = problems::BurgersIc::NegSinPiX;

  // chained runs: the follow-up optimizer and its stop criteria
  optim::Algorithm chain_second = optim::Algorithm::Bfgs;
  optim::StopCriteria chain_stop{5000, 0.0, 0.0, 0};

  // grid search over depth x width
  std::vector<int> grid_hidden_units{16, 32, 48, 64, 80};
  std::vector<int> grid_layers{1, 2, 3, 4};
  long grid_epochs = 5000;
};

// Parse + validate. Unknown enum strings, non-positive counts, or malformed
// JSON throw std::invalid_argument (the CLI maps that to exit code 1).
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// One CSV row of a training log; `phase` tags which optimizer produced it.
struct RecordRow {
  long epoch = 0;
  double loss = 0.0;
  double elapsed_s = 0.0;
  long cumulative_evals = 0;
  std::string phase;
};

// Round-trippable persistence: floats are written with 17 significant digits
// so re-parsing reproduces the in-memory values exactly.
std::string format_double(double v);
void write_records_csv(const std::filesystem::path& path, const std::vector<RecordRow>& rows);
std::vector<RecordRow> read_records_csv(const std::filesystem::path& path);

struct PhaseSummary {
  std::string phase;
  double best_loss = 0.0;
  long best_epoch = 0;
  double final_loss = 0.0;
  long epochs_run = 0;
  double wall_time_s = 0.0;
  long cumulative_evals = 0;
  std::string stop_reason;
};

struct RunOutput {
  std::vector<PhaseSummary> phases;
  double best_loss = 0.0;       // best across phases
  long best_epoch = 0;          // epoch within its phase
  std::string best_phase;
  double total_time_s = 0.0;
  int param_count = 0;
  bool numerical_failure = false;  // e.g. LM never accepted a proposal
  std::filesystem::path records_csv;
  std::filesystem::path summary_json;
  std::filesystem::path params_final;
  std::filesystem::path params_best;
  Vectord final_params;
  Vectord best_params;
};

// Builds the problem and net, runs the configured optimizer, and writes
// records.csv, summary.json, params.bin (final) and params_best.bin under
// out_dir. A warm-start file that cannot be read or whose architecture does
// not match throws std::invalid_argument before any training.
RunOutput run_single(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Phase 1: Adam per `cfg` (cfg.algorithm is ignored); phase 2: cfg.chain_second
// warm-started from phase 1's final parameters under cfg.chain_stop. Records
// from both phases share one CSV, tagged by phase; the summary reports both
// phases and the cross-phase best.
RunOutput run_chained(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct GridCell {
  int layers = 0;
  int hidden_units = 0;
  int param_count = 0;
  double best_loss = 0.0;
  long best_epoch = 0;
  std::filesystem::path records_csv;
};

// One Adam run per (layers, hidden_units) pair, each `epochs` epochs from the
// same seed; writes per-cell records plus grid_summary.{csv,json}.
std::vector<GridCell> run_grid(const ExperimentConfig& base, const std::vector<int>& hidden_units,
                               const std::vector<int>& layers, long epochs, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

// Model-vs-target curve on n_points evenly spaced x in [-1.5, 1.5], written
// as CSV columns x,y_model,y_target.
void export_fit_curve(const net::MlpSpec& spec, const Vectord& params, int n_points,
                      problems::SincKind kind, const std::filesystem::path& csv_path);

// Learned Burgers field u(x, t) on an nx × nt lattice, CSV columns x,t,u.
void export_field_csv(const net::MlpSpec& spec, const Vectord& params, int nx, int nt,
                      const std::filesystem::path& csv_path);

}  // namespace lmnet::harness
