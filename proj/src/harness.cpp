#include "lmnet/harness.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lmnet::harness {
namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) {
  throw std::invalid_argument("config error: " + msg);
}

optim::Algorithm parse_algorithm(const std::string& name) {
  if (name == "adam") return optim::Algorithm::Adam;
  if (name == "bfgs") return optim::Algorithm::Bfgs;
  if (name == "lbfgs") return optim::Algorithm::Lbfgs;
  if (name == "lm") return optim::Algorithm::Lm;
  config_error("unknown optimizer '" + name + "' (expected adam|bfgs|lbfgs|lm)");
}

optim::StopCriteria parse_stop(const json& j, optim::StopCriteria base) {
  base.max_epochs = j.value("max_epochs", base.max_epochs);
  base.grad_tol = j.value("grad_tol", base.grad_tol);
  base.loss_tol = j.value("loss_tol", base.loss_tol);
  base.patience = j.value("patience", base.patience);
  if (base.max_epochs < 1) config_error("stop.max_epochs must be >= 1");
  if (base.grad_tol < 0 || base.loss_tol < 0 || base.patience < 0) {
    config_error("stop tolerances must be >= 0");
  }
  return base;
}

json phase_to_json(const PhaseSummary& p) {
  return {{"phase", p.phase},
          {"best_loss", p.best_loss},
          {"best_epoch", p.best_epoch},
          {"final_loss", p.final_loss},
          {"epochs_run", p.epochs_run},
          {"wall_time_s", p.wall_time_s},
          {"cumulative_evals", p.cumulative_evals},
          {"stop_reason", p.stop_reason}};
}

void write_summary_json(const std::filesystem::path& path, const ExperimentConfig& cfg,
                        const RunOutput& out) {
  json j = {{"problem", cfg.problem},
            {"seed", cfg.seed},
            {"net",
             {{"input_dim", cfg.spec.input_dim},
              {"hidden_widths", cfg.spec.hidden_widths},
              {"output_dim", cfg.spec.output_dim}}},
            {"param_count", out.param_count},
            {"best_loss", out.best_loss},
            {"best_epoch", out.best_epoch},
            {"best_phase", out.best_phase},
            {"total_time_s", out.total_time_s},
            {"numerical_failure", out.numerical_failure},
            {"records_csv", out.records_csv.filename().string()},
            {"params_final", out.params_final.filename().string()},
            {"params_best", out.params_best.filename().string()},
            {"phases", json::array()}};
  for (const PhaseSummary& p : out.phases) j["phases"].push_back(phase_to_json(p));
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

optim::Problem build_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "sinc") {
    if (cfg.spec.input_dim != 1 || cfg.spec.output_dim != 1) {
      config_error("the sinc problem needs a 1-input, 1-output net");
    }
    return problems::make_sinc_problem(cfg.spec,
                                       problems::make_sinc_dataset(cfg.sinc_n, cfg.sinc_kind));
  }
  if (cfg.problem == "burgers") {
    if (cfg.spec.input_dim != 2 || cfg.spec.output_dim != 1) {
      config_error("the Burgers problem needs a 2-input, 1-output net");
    }
    return problems::make_burgers_objective(
        cfg.spec,
        problems::make_burgers_problem(cfg.nu, cfg.n_ic, cfg.n_bc, cfg.n_f, cfg.seed, cfg.ic));
  }
  config_error("unknown problem '" + cfg.problem + "'");
}

PhaseSummary summarize(const std::string& phase, const optim::RunResult& run) {
  PhaseSummary p;
  p.phase = phase;
  p.best_loss = run.best_loss;
  p.best_epoch = run.best_epoch;
  p.final_loss = run.records.empty() ? run.best_loss : run.records.back().loss;
  p.epochs_run = static_cast<long>(run.records.size());
  p.wall_time_s = run.records.empty() ? 0.0 : run.records.back().elapsed_s;
  p.cumulative_evals = run.total_evals;
  p.stop_reason = run.stop_reason;
  return p;
}

void append_rows(std::vector<RecordRow>& rows, const optim::RunResult& run,
                 const std::string& phase) {
  for (const optim::RunRecord& r : run.records) {
    rows.push_back({r.epoch, r.loss, r.elapsed_s, r.cumulative_evals, phase});
  }
}

// Starting parameters: a warm-start file when configured, Glorot otherwise.
Vectord initial_params(const ExperimentConfig& cfg) {
  if (cfg.warm_start) {
    std::pair<net::MlpSpec, Vectord> loaded = net::load_params(*cfg.warm_start);
    if (!(loaded.first == cfg.spec)) {
      config_error("warm-start file " + cfg.warm_start->string() +
                   " holds a different architecture than the configured net");
    }
    return std::move(loaded.second);
  }
  return net::init_params(cfg.spec, cfg.seed);
}

RunOutput finalize_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                       const std::vector<RecordRow>& rows, std::vector<PhaseSummary> phases,
                       const Vectord& final_params, const Vectord& best_params,
                       double best_loss, long best_epoch, const std::string& best_phase,
                       bool numerical_failure) {
  std::filesystem::create_directories(out_dir);
  RunOutput out;
  out.phases = std::move(phases);
  out.best_loss = best_loss;
  out.best_epoch = best_epoch;
  out.best_phase = best_phase;
  out.numerical_failure = numerical_failure;
  out.param_count = net::param_count(cfg.spec);
  for (const PhaseSummary& p : out.phases) out.total_time_s += p.wall_time_s;
  out.records_csv = out_dir / "records.csv";
  out.summary_json = out_dir / "summary.json";
  out.params_final = out_dir / "params.bin";
  out.params_best = out_dir / "params_best.bin";
  out.final_params = final_params;
  out.best_params = best_params;
  write_records_csv(out.records_csv, rows);
  net::save_params(out.params_final, cfg.spec, final_params);
  net::save_params(out.params_best, cfg.spec, best_params);
  write_summary_json(out.summary_json, cfg, out);
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("top level must be a JSON object");

  static const std::set<std::string> known = {
      "problem", "net",  "optimizer", "seed",   "stop",       "adam",
      "wolfe",   "lm",   "lbfgs_memory", "sinc", "burgers",   "warm_start",
      "chain",   "grid"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) config_error("unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  try {
    cfg.problem = j.value("problem", cfg.problem);
    if (cfg.problem != "sinc" && cfg.problem != "burgers") {
      config_error("problem must be 'sinc' or 'burgers'");
    }
    if (cfg.problem == "burgers") cfg.spec = net::MlpSpec{2, std::vector<int>(8, 20), 1};

    if (j.contains("net")) {
      const json& n = j.at("net");
      cfg.spec_given = true;
      cfg.spec.input_dim = n.value("input_dim", cfg.spec.input_dim);
      cfg.spec.output_dim = n.value("output_dim", cfg.spec.output_dim);
      if (n.contains("hidden")) cfg.spec.hidden_widths = n.at("hidden").get<std::vector<int>>();
      net::validate(cfg.spec);
    }

    if (j.contains("optimizer")) cfg.algorithm = parse_algorithm(j.at("optimizer").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("stop")) cfg.stop = parse_stop(j.at("stop"), cfg.stop);

    if (j.contains("adam")) {
      const json& a = j.at("adam");
      cfg.opt.adam.lr = a.value("lr", cfg.opt.adam.lr);
      cfg.opt.adam.beta1 = a.value("beta1", cfg.opt.adam.beta1);
      cfg.opt.adam.beta2 = a.value("beta2", cfg.opt.adam.beta2);
      cfg.opt.adam.eps = a.value("eps", cfg.opt.adam.eps);
      cfg.opt.adam.batch_size = a.value("batch_size", cfg.opt.adam.batch_size);
      if (cfg.opt.adam.lr <= 0 || cfg.opt.adam.batch_size < 0) {
        config_error("adam.lr must be > 0 and adam.batch_size >= 0");
      }
    }
    if (j.contains("wolfe")) {
      const json& w = j.at("wolfe");
      cfg.opt.wolfe.c1 = w.value("c1", cfg.opt.wolfe.c1);
      cfg.opt.wolfe.c2 = w.value("c2", cfg.opt.wolfe.c2);
      cfg.opt.wolfe.max_evals = w.value("max_evals", cfg.opt.wolfe.max_evals);
      cfg.opt.wolfe.alpha_init = w.value("alpha_init", cfg.opt.wolfe.alpha_init);
      if (!(0 < cfg.opt.wolfe.c1 && cfg.opt.wolfe.c1 < cfg.opt.wolfe.c2 && cfg.opt.wolfe.c2 < 1)) {
        config_error("wolfe constants need 0 < c1 < c2 < 1");
      }
    }
    if (j.contains("lm")) {
      const json& l = j.at("lm");
      cfg.opt.lm.lambda0 = l.value("lambda0", cfg.opt.lm.lambda0);
      cfg.opt.lm.lambda_up = l.value("lambda_up", cfg.opt.lm.lambda_up);
      cfg.opt.lm.lambda_down = l.value("lambda_down", cfg.opt.lm.lambda_down);
      cfg.opt.lm.max_attempts = l.value("max_attempts", cfg.opt.lm.max_attempts);
      if (!(cfg.opt.lm.lambda0 > 0) || cfg.opt.lm.lambda_up <= 1 ||
          !(0 < cfg.opt.lm.lambda_down && cfg.opt.lm.lambda_down < 1) ||
          cfg.opt.lm.max_attempts < 1) {
        config_error("lm damping schedule is out of range");
      }
    }
    cfg.opt.lbfgs_memory = j.value("lbfgs_memory", cfg.opt.lbfgs_memory);
    if (cfg.opt.lbfgs_memory < 0) config_error("lbfgs_memory must be >= 0");

    if (j.contains("sinc")) {
      const json& s = j.at("sinc");
      cfg.sinc_n = s.value("n", cfg.sinc_n);
      if (s.value("normalized", false)) cfg.sinc_kind = problems::SincKind::Normalized;
      if (cfg.sinc_n < 2) config_error("sinc.n must be >= 2");
    }
    if (j.contains("burgers")) {
      const json& b = j.at("burgers");
      cfg.nu = b.value("nu", cfg.nu);
      cfg.n_ic = b.value("n_ic", cfg.n_ic);
      cfg.n_bc = b.value("n_bc", cfg.n_bc);
      cfg.n_f = b.value("n_f", cfg.n_f);
      if (b.contains("ic")) {
        const std::string ic = b.at("ic").get<std::string>();
        if (ic == "neg_sin_pi_x") cfg.ic = problems::BurgersIc::NegSinPiX;
        else if (ic == "neg_sin_x") cfg.ic = problems::BurgersIc::NegSinX;
        else config_error("burgers.ic must be neg_sin_pi_x or neg_sin_x");
      }
      if (cfg.n_ic < 1 || cfg.n_bc < 1 || cfg.n_f < 1 || !(cfg.nu > 0)) {
        config_error("burgers point counts must be >= 1 and nu > 0");
      }
    }
    if (j.contains("warm_start")) {
      cfg.warm_start = std::filesystem::path(j.at("warm_start").get<std::string>());
    }
    if (j.contains("chain")) {
      const json& c = j.at("chain");
      if (c.contains("second")) {
        cfg.chain_second = parse_algorithm(c.at("second").get<std::string>());
        if (cfg.chain_second != optim::Algorithm::Bfgs &&
            cfg.chain_second != optim::Algorithm::Lbfgs) {
          config_error("chain.second must be bfgs or lbfgs");
        }
      }
      if (c.contains("stop")) cfg.chain_stop = parse_stop(c.at("stop"), cfg.chain_stop);
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      if (g.contains("hidden_units")) {
        cfg.grid_hidden_units = g.at("hidden_units").get<std::vector<int>>();
      }
      if (g.contains("layers")) cfg.grid_layers = g.at("layers").get<std::vector<int>>();
      cfg.grid_epochs = g.value("epochs", cfg.grid_epochs);
      if (cfg.grid_hidden_units.empty() || cfg.grid_layers.empty() || cfg.grid_epochs < 1) {
        config_error("grid needs nonempty hidden_units/layers and epochs >= 1");
      }
      for (int h : cfg.grid_hidden_units) {
        if (h < 1) config_error("grid hidden_units must be >= 1");
      }
      for (int l : cfg.grid_layers) {
        if (l < 1) config_error("grid layers must be >= 1");
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("bad value type: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) config_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_records_csv(const std::filesystem::path& path, const std::vector<RecordRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "epoch,loss,elapsed_s,cumulative_evals,phase\n";
  for (const RecordRow& r : rows) {
    f << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.elapsed_s) << ','
      << r.cumulative_evals << ',' << r.phase << '\n';
  }
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<RecordRow> read_records_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "epoch,loss,elapsed_s,cumulative_evals,phase") {
    throw std::runtime_error(path.string() + " is not a records CSV");
  }
  std::vector<RecordRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    RecordRow r;
    std::string field;
    std::getline(ss, field, ',');
    r.epoch = std::stol(field);
    std::getline(ss, field, ',');
    r.loss = std::stod(field);
    std::getline(ss, field, ',');
    r.elapsed_s = std::stod(field);
    std::getline(ss, field, ',');
    r.cumulative_evals = std::stol(field);
    std::getline(ss, r.phase);
    rows.push_back(std::move(r));
  }
  return rows;
}

RunOutput run_single(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  net::validate(cfg.spec);
  const Vectord theta0 = initial_params(cfg);
  const optim::Problem problem = build_problem(cfg);
  const std::string phase = optim::algorithm_name(cfg.algorithm);

  optim::RunResult run =
      optim::run_optimizer(problem, cfg.algorithm, cfg.opt, cfg.stop, theta0, cfg.seed);

  std::vector<RecordRow> rows;
  rows.reserve(run.records.size());
  append_rows(rows, run, phase);
  const bool failed = cfg.algorithm == optim::Algorithm::Lm && run.lm_accepted_epochs == 0;
  return finalize_run(cfg, out_dir, rows, {summarize(phase, run)}, run.final_params,
                      run.best_params, run.best_loss, run.best_epoch, phase, failed);
}

RunOutput run_chained(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  net::validate(cfg.spec);
  if (cfg.chain_second != optim::Algorithm::Bfgs && cfg.chain_second != optim::Algorithm::Lbfgs) {
    config_error("chained runs follow Adam with bfgs or lbfgs");
  }
  const Vectord theta0 = initial_params(cfg);
  const optim::Problem problem = build_problem(cfg);

  optim::RunResult adam =
      optim::run_optimizer(problem, optim::Algorithm::Adam, cfg.opt, cfg.stop, theta0, cfg.seed);
  optim::RunResult second = optim::run_optimizer(problem, cfg.chain_second, cfg.opt,
                                                 cfg.chain_stop, adam.final_params, cfg.seed);

  const std::string second_name = optim::algorithm_name(cfg.chain_second);
  std::vector<RecordRow> rows;
  rows.reserve(adam.records.size() + second.records.size());
  append_rows(rows, adam, "adam");
  append_rows(rows, second, second_name);

  // Cross-phase best: phase 2 starts from phase 1's final iterate and both
  // track best-so-far, so this can never be worse than phase 1's best.
  double best_loss = adam.best_loss;
  long best_epoch = adam.best_epoch;
  std::string best_phase = "adam";
  Vectord best_params = adam.best_params;
  if (second.best_loss < best_loss) {
    best_loss = second.best_loss;
    best_epoch = second.best_epoch;
    best_phase = second_name;
    best_params = second.best_params;
  }
  return finalize_run(cfg, out_dir, rows, {summarize("adam", adam), summarize(second_name, second)},
                      second.final_params, best_params, best_loss, best_epoch, best_phase, false);
}

std::vector<GridCell> run_grid(const ExperimentConfig& base, const std::vector<int>& hidden_units,
                               const std::vector<int>& layers, long epochs, std::uint64_t seed,
                               const std::filesystem::path& out_dir) {
  if (hidden_units.empty() || layers.empty()) {
    config_error("grid needs nonempty hidden-unit and layer sets");
  }
  std::filesystem::create_directories(out_dir);
  std::vector<GridCell> cells;
  json jcells = json::array();
  for (int nl : layers) {
    for (int hu : hidden_units) {
      ExperimentConfig cfg = base;
      cfg.problem = "sinc";
      cfg.algorithm = optim::Algorithm::Adam;
      cfg.spec = net::MlpSpec{1, std::vector<int>(nl, hu), 1};
      cfg.stop = optim::StopCriteria{epochs, 0.0, 0.0, 0};
      cfg.seed = seed;
      cfg.warm_start.reset();
      const std::filesystem::path cell_dir =
          out_dir / ("L" + std::to_string(nl) + "_HU" + std::to_string(hu));
      const RunOutput run = run_single(cfg, cell_dir);

      GridCell cell;
      cell.layers = nl;
      cell.hidden_units = hu;
      cell.param_count = run.param_count;
      cell.best_loss = run.best_loss;
      cell.best_epoch = run.best_epoch;
      cell.records_csv = run.records_csv;
      cells.push_back(cell);
      jcells.push_back({{"layers", nl},
                        {"hidden_units", hu},
                        {"param_count", cell.param_count},
                        {"best_loss", cell.best_loss},
                        {"best_epoch", cell.best_epoch},
                        {"records_csv", cell.records_csv.string()}});
    }
  }
  {
    std::ofstream f(out_dir / "grid_summary.json");
    f << jcells.dump(2) << '\n';
  }
  {
    std::ofstream f(out_dir / "grid_summary.csv");
    f << "layers,hidden_units,param_count,best_loss,best_epoch,records_csv\n";
    for (const GridCell& c : cells) {
      f << c.layers << ',' << c.hidden_units << ',' << c.param_count << ','
        << format_double(c.best_loss) << ',' << c.best_epoch << ',' << c.records_csv.string()
        << '\n';
    }
  }
  return cells;
}

void export_fit_curve(const net::MlpSpec& spec, const Vectord& params, int n_points,
                      problems::SincKind kind, const std::filesystem::path& csv_path) {
  if (n_points < 2) throw std::invalid_argument("export_fit_curve: n_points must be >= 2");
  Matrixd xs(n_points, 1);
  for (int i = 0; i < n_points; ++i) xs(i, 0) = -1.5 + 3.0 * i / (n_points - 1);
  const Matrixd ys = net::forward(spec, params, xs);
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write " + csv_path.string());
  f << "x,y_model,y_target\n";
  for (int i = 0; i < n_points; ++i) {
    f << format_double(xs(i, 0)) << ',' << format_double(ys(i, 0)) << ','
      << format_double(problems::sinc_target(xs(i, 0), kind)) << '\n';
  }
}

void export_field_csv(const net::MlpSpec& spec, const Vectord& params, int nx, int nt,
                      const std::filesystem::path& csv_path) {
  const Matrixd field = problems::evaluate_field(spec, params, nx, nt);
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write " + csv_path.string());
  f << "x,t,u\n";
  for (Eigen::Index i = 0; i < field.rows(); ++i) {
    f << format_double(field(i, 0)) << ',' << format_double(field(i, 1)) << ','
      << format_double(field(i, 2)) << '\n';
  }
}

}  // namespace lmnet::harness
