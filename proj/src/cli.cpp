#include "drddp/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "drddp/errors.hpp"

namespace drddp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  return out;
}

// Written first with status "running" and rewritten when the command ends.
class Manifest {
 public:
  Manifest(const std::string& command, const RunConfig& cfg, std::vector<std::string> artifacts)
      : dir_(cfg.out_dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError(fmt::format("cannot create output directory {}", dir_.string()));
    const std::string canonical = cfg.canonical();
    doc_["command"] = command;
    doc_["config_source"] = cfg.source;
    doc_["config"] = canonical;
    doc_["input_hash"] = git_blob_sha1(command + "\n" + canonical);
    doc_["seed"] = cfg.seed;
    doc_["started_at"] = utc_now();
    artifacts.insert(artifacts.begin(), "config.cfg");
    doc_["artifacts"] = artifacts;
    doc_["status"] = "running";
    write();
    open_output(dir_ / "config.cfg") << canonical;
  }

  void finish(const std::string& status, const json& extra = json::object()) {
    doc_["status"] = status;
    doc_["finished_at"] = utc_now();
    for (const auto& [k, v] : extra.items()) doc_[k] = v;
    write();
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

 private:
  void write() const { open_output(dir_ / "manifest.json") << doc_.dump(2) << '\n'; }

  fs::path dir_;
  json doc_;
};

std::string num(double v) { return fmt::format("{}", v); }

void write_vector_cells(std::ostream& out, const Vector* v, int n) {
  for (int k = 0; k < n; ++k) out << ',' << (v ? num((*v)(k)) : "");
}

void write_trajectory(const fs::path& path, const NominalTrajectories& tr, const Dims& d) {
  std::ofstream out = open_output(path);
  out << "t";
  for (int k = 0; k < d.nx; ++k) out << ",x_" << k + 1;
  for (int k = 0; k < d.nu; ++k) out << ",u_" << k + 1;
  for (int k = 0; k < d.nw; ++k) out << ",w_" << k + 1;
  out << '\n';
  for (int t = 0; t <= d.horizon; ++t) {
    out << t;
    write_vector_cells(out, &tr.x[t], d.nx);
    write_vector_cells(out, t < d.horizon ? &tr.u[t] : nullptr, d.nu);
    write_vector_cells(out, t < d.horizon ? &tr.w[t] : nullptr, d.nw);
    out << '\n';
  }
}

void write_iterations(const fs::path& path, const fs::path& timing_path, const Solution& sol) {
  std::ofstream out = open_output(path);
  out << "iteration,cost_penalized,cost_nominal,alpha,mu,max_feedforward,accepted\n";
  std::ofstream timing = open_output(timing_path);
  timing << "iteration,wall_time\n";
  for (const IterationRecord& r : sol.history) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.iteration, num(r.cost_penalized),
                       num(r.cost_nominal), num(r.alpha), num(r.mu), num(r.max_feedforward),
                       r.accepted ? 1 : 0);
    timing << fmt::format("{},{}\n", r.iteration, num(r.wall_time));
  }
}

void write_policy_summary(const fs::path& path, const Solution& sol) {
  std::ofstream out = open_output(path);
  out << "t,norm_K,norm_k,norm_H,norm_h_bar\n";
  for (std::size_t t = 0; t < sol.policies.size(); ++t) {
    const PolicyStep& p = sol.policies[t];
    out << fmt::format("{},{},{},{},{}\n", t, num(p.K.norm()), num(p.k.norm()), num(p.H.norm()),
                       num(p.h_bar.norm()));
  }
}

double resolve_gamma(const RunConfig& cfg, const BenchmarkInstance& bench) {
  if (cfg.minimax_gamma > 0.0) return cfg.minimax_gamma;
  const std::vector<double> grid = cfg.gamma_grid.empty() ? log_grid(1.0, 1e6, 2) : cfg.gamma_grid;
  const double g = select_minimax_gamma(*bench.model, bench.x0, cfg.solver, grid).gamma;
  spdlog::info("minimax-DDP: gamma_w = {:g}", g);
  return g;
}

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = fmt::format("blob {}", content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DRDDP_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

RunConfig resolve_config(const CliOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.out) cfg.out_dir = *opts.out;
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.solver.seed = cfg.seed;
    cfg.eval.seed = cfg.seed;
  }
  if (opts.controller) {
    cfg.controller = parse_controller(*opts.controller);
    cfg.eval_controllers = {cfg.controller};
  }
  if (opts.lambda_grid) cfg.lambda_grid = parse_double_list(*opts.lambda_grid, "--lambda-grid");
  if (opts.sizes) cfg.sizes = parse_int_list(*opts.sizes, "--sizes");
  for (double l : cfg.lambda_grid)
    if (!(l > 0.0)) throw ConfigError("lambda grid entries must be positive");
  return cfg;
}

int cmd_solve(const RunConfig& cfg) {
  Manifest manifest("solve", cfg,
                    {"dataset.csv", "traj.csv", "iters.csv", "iters_timing.csv", "policy.csv"});
  const BenchmarkInstance bench = make_benchmark(cfg.benchmark, cfg.seed);
  const DisturbanceDataset ds = benchmark_dataset(bench, cfg.seed);
  write_dataset_csv(ds, manifest.path("dataset.csv"));

  const double gamma = cfg.controller == ControllerKind::kMinimaxDdp ? resolve_gamma(cfg, bench) : 0.0;
  const Solution sol = solve_controller(cfg.controller, *bench.model, bench.x0, ds, cfg.solver, gamma);
  const Dims d = bench.model->dims();
  write_trajectory(manifest.path("traj.csv"), sol.nominal, d);
  write_iterations(manifest.path("iters.csv"), manifest.path("iters_timing.csv"), sol);
  write_policy_summary(manifest.path("policy.csv"), sol);

  fmt::print("{} on {}: {} in {} iterations, J_lambda = {}, J = {}\n",
             controller_label(cfg.controller), bench.name,
             sol.converged ? "converged" : "did not converge", sol.iterations,
             num(sol.final_cost_penalized()), num(sol.final_cost_nominal()));
  manifest.finish(sol.converged ? "ok" : "not_converged",
                  {{"iterations", sol.iterations}, {"converged", sol.converged}});
  return sol.converged ? kExitOk : kExitNotConverged;
}

int cmd_tune(const RunConfig& cfg) {
  if (cfg.lambda_grid.empty()) {
    throw ConfigError(fmt::format("{}: [tune] lambda_grid is empty", cfg.source));
  }
  Manifest manifest("tune", cfg, {"dataset.csv", "bounds.csv"});
  const BenchmarkInstance bench = make_benchmark(cfg.benchmark, cfg.seed);
  const DisturbanceDataset ds = benchmark_dataset(bench, cfg.seed);
  write_dataset_csv(ds, manifest.path("dataset.csv"));

  TuneResult res;
  try {
    res = tune_lambda(*bench.model, bench.x0, ds, cfg.solver.theta, cfg.lambda_grid,
                      cfg.tune_runs, cfg.solver, cfg.eval.threads);
  } catch (const NumericalFailure& err) {
    spdlog::error("{}", err.what());
    manifest.finish("not_converged");
    return kExitNotConverged;
  }
  std::ofstream out = open_output(manifest.path("bounds.csv"));
  out << "lambda,penalty_term,sup_J_lambda_est,bound,converged,minimizer\n";
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const TuneRow& r = res.rows[i];
    out << fmt::format("{},{},{},{},{},{}\n", num(r.lambda), num(r.penalty_term),
                       num(r.sup_j_lambda), num(r.bound), r.converged ? 1 : 0,
                       static_cast<int>(i) == res.best_index ? 1 : 0);
  }
  fmt::print("lambda* = {} (bound {})\n", num(res.lambda_star), num(res.rows[res.best_index].bound));
  manifest.finish("ok", {{"lambda_star", res.lambda_star}});
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  Manifest manifest("eval", cfg, {"dataset.csv", "eval.csv", "eval_summary.csv", "eval_timing.csv"});
  const BenchmarkInstance bench = make_benchmark(cfg.benchmark, cfg.seed);
  const DisturbanceDataset ds = benchmark_dataset(bench, cfg.seed);
  write_dataset_csv(ds, manifest.path("dataset.csv"));

  CompareOptions opts;
  opts.solver = cfg.solver;
  opts.eval = cfg.eval;
  opts.minimax_gamma = cfg.minimax_gamma;
  opts.gamma_grid = cfg.gamma_grid;
  const std::vector<ControllerResult> rows =
      compare_controllers(bench, ds, cfg.eval_controllers, opts);

  std::ofstream out = open_output(manifest.path("eval.csv"));
  out << "controller,run,cost,collided\n";
  std::ofstream summary = open_output(manifest.path("eval_summary.csv"));
  summary << "controller,parameter,mean_cost,std_cost,min_cost,max_cost,collision_rate,diverged,"
             "iterations,converged,failed\n";
  std::ofstream timing = open_output(manifest.path("eval_timing.csv"));
  timing << "controller,wall_time_iter_mean,wall_time_iter_std,total_time\n";
  int failures = 0;
  for (const ControllerResult& row : rows) {
    const EvalReport& rep = row.report;
    const std::string name = controller_name(row.kind);
    for (std::size_t r = 0; r < rep.costs.size(); ++r) {
      out << fmt::format("{},{},{},{}\n", name, r, num(rep.costs[r]),
                         rep.has_collisions ? num(rep.collided[r]) : "");
    }
    summary << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", name, num(row.lambda),
                           num(rep.mean_cost), num(rep.std_cost), num(rep.min_cost),
                           num(rep.max_cost),
                           rep.has_collisions ? num(rep.collision_rate) : "", rep.diverged,
                           rep.iterations, rep.converged ? 1 : 0, row.failed ? 1 : 0);
    timing << fmt::format("{},{},{},{}\n", name, num(rep.iter_time_mean), num(rep.iter_time_std),
                          num(rep.total_time));
    fmt::print("{:<28} mean {:>12.6g}  std {:>10.4g}{}{}\n", row.label, rep.mean_cost,
               rep.std_cost,
               rep.has_collisions ? fmt::format("  collisions {:.3f}", rep.collision_rate) : "",
               row.failed ? "  FAILED: " + row.error : "");
    failures += row.failed ? 1 : 0;
  }
  const bool all_failed = failures == static_cast<int>(rows.size());
  manifest.finish(all_failed ? "failed" : "ok");
  return all_failed ? kExitNumericalFailure : kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  if (cfg.sizes.empty()) throw ConfigError(fmt::format("{}: [bench] sizes is empty", cfg.source));
  Manifest manifest("bench", cfg, {"timing.csv"});
  double gamma = 0.0;
  if (cfg.controller == ControllerKind::kMinimaxDdp) {
    if (!(cfg.minimax_gamma > 0.0)) {
      throw ConfigError(fmt::format("{}: [eval] minimax_gamma is required to bench minimax_ddp",
                                    cfg.source));
    }
    gamma = cfg.minimax_gamma;
  }
  const std::vector<TimingRow> rows =
      timing_sweep(cfg.benchmark, cfg.sizes, cfg.controller, cfg.solver, cfg.seed, gamma);
  std::ofstream out = open_output(manifest.path("timing.csv"));
  out << "size,iter_time_mean,iter_time_std,iterations,failed\n";
  int failures = 0;
  for (const TimingRow& r : rows) {
    out << fmt::format("{},{},{},{},{}\n", r.size, num(r.iter_time_mean), num(r.iter_time_std),
                       r.iterations, r.failed ? 1 : 0);
    failures += r.failed ? 1 : 0;
  }
  const double slope = loglog_slope(rows);
  fmt::print("log-log slope of time per iteration vs size: {:.3f}\n", slope);
  const bool all_failed = failures == static_cast<int>(rows.size());
  manifest.finish(all_failed ? "failed" : "ok", {{"loglog_slope", slope}});
  return all_failed ? kExitNumericalFailure : kExitOk;
}

int run_command(const CliOptions& opts) {
  try {
    const RunConfig cfg = resolve_config(opts);
    if (opts.command == "solve") return cmd_solve(cfg);
    if (opts.command == "tune") return cmd_tune(cfg);
    if (opts.command == "eval") return cmd_eval(cfg);
    if (opts.command == "bench") return cmd_bench(cfg);
    throw ConfigError(fmt::format("unknown command '{}'", opts.command));
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfigError;
  } catch (const InputError& err) {
    std::cerr << "input error: " << err.what() << '\n';
    return kExitConfigError;
  } catch (const NumericalFailure& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumericalFailure;
  } catch (const BackwardPassError& err) {
    std::cerr << "numerical failure at t=" << err.timestep() << ": " << err.what() << '\n';
    return kExitNumericalFailure;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumericalFailure;
  }
}

}  // namespace drddp
