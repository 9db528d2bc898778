#include "drddp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "drddp/errors.hpp"
#include "drddp/parallel.hpp"
#include "drddp/random.hpp"

namespace drddp {

void EvalConfig::validate() const {
  if (runs < 1) throw ConfigError("eval.runs must be >= 1");
  if (samples_per_run < 1) throw ConfigError("eval.samples_per_run must be >= 1");
  if (!(collision_threshold >= 0.0)) throw ConfigError("eval.collision_threshold must be >= 0");
  if (threads < 1) throw ConfigError("eval.threads must be >= 1");
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double c : v) mean += c;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double c : v) ss += (c - mean) * (c - mean);
  const double std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, std};
}

void fill_timing(const Solution& sol, EvalReport& rep) {
  std::vector<double> times;
  for (const IterationRecord& r : sol.history)
    if (r.iteration > 0) times.push_back(r.wall_time);
  if (!times.empty()) std::tie(rep.iter_time_mean, rep.iter_time_std) = mean_std(times);
  rep.total_time = sol.total_time;
  rep.iterations = sol.iterations;
  rep.converged = sol.converged;
}

}  // namespace

EvalReport out_of_sample(const OcpModel& model, const Solution& solution,
                         const TrueDistribution& truth, const EvalConfig& cfg,
                         const std::string& label) {
  cfg.validate();
  const Dims d = model.dims();
  if (truth.dim() != d.nw) {
    throw InputError(fmt::format("true distribution has dimension {}, model needs {}",
                                 truth.dim(), d.nw));
  }
  const bool car = dynamic_cast<const CarModel*>(&model) != nullptr;

  struct RunResult {
    double cost_sum = 0.0;
    int finite = 0;
    int collisions = 0;
    int diverged = 0;
  };
  std::vector<RunResult> results(cfg.runs);
  parallel_for(cfg.runs, cfg.threads, [&](int r) {
    Rng rng = make_rng(cfg.seed, stream::kEvaluation, r);
    auto draw = [&](int, const Vector&, const Vector&) { return truth.sample(rng); };
    RunResult& out = results[r];
    for (int s = 0; s < cfg.samples_per_run; ++s) {
      const RolloutResult res = policy_rollout(model, solution.nominal, solution.policies, draw);
      if (res.diverged) {
        ++out.diverged;
        continue;
      }
      out.cost_sum += res.cost_nominal;
      ++out.finite;
      if (car) {
        double closest = std::numeric_limits<double>::infinity();
        for (const Vector& x : res.trajectories.x) closest = std::min(closest, CarModel::clearance(x));
        if (closest < cfg.collision_threshold) ++out.collisions;
      }
    }
  });

  EvalReport rep;
  rep.controller = label;
  rep.has_collisions = car;
  int paths = 0;
  int collisions = 0;
  for (const RunResult& r : results) {
    rep.diverged += r.diverged;
    const int total = r.finite + r.diverged;
    rep.collided.push_back(total > 0 ? static_cast<double>(r.collisions) / total : 0.0);
    collisions += r.collisions;
    paths += total;
    if (r.finite > 0) rep.costs.push_back(r.cost_sum / r.finite);
  }
  if (rep.costs.empty()) {
    rep.mean_cost = rep.std_cost = rep.min_cost = rep.max_cost = std::nan("");
  } else {
    std::tie(rep.mean_cost, rep.std_cost) = mean_std(rep.costs);
    rep.min_cost = *std::min_element(rep.costs.begin(), rep.costs.end());
    rep.max_cost = *std::max_element(rep.costs.begin(), rep.costs.end());
  }
  rep.collision_rate = paths > 0 ? static_cast<double>(collisions) / paths : 0.0;
  fill_timing(solution, rep);
  return rep;
}

Solution solve_controller(ControllerKind kind, const OcpModel& model, const Vector& x0,
                          const DisturbanceDataset& ds, const SolverConfig& config,
                          double minimax_gamma) {
  switch (kind) {
    case ControllerKind::kDrDdp:
      return solve(model, x0, ds, config);
    case ControllerKind::kBoxDdp:
      return solve_box_ddp(model, x0, config);
    case ControllerKind::kMinimaxDdp:
      return solve_minimax_ddp(model, x0, config, minimax_gamma);
  }
  throw InputError("unknown controller");
}

std::vector<ControllerResult> compare_controllers(const BenchmarkInstance& bench,
                                                  const DisturbanceDataset& ds,
                                                  const std::vector<ControllerKind>& controllers,
                                                  const CompareOptions& options) {
  if (controllers.empty()) throw ConfigError("no controllers to compare");
  const OcpModel& model = *bench.model;
  double gamma = options.minimax_gamma;

  std::vector<ControllerResult> rows;
  for (ControllerKind kind : controllers) {
    ControllerResult row;
    row.kind = kind;
    row.label = controller_label(kind);
    try {
      if (kind == ControllerKind::kMinimaxDdp && !(gamma > 0.0)) {
        const std::vector<double> grid =
            options.gamma_grid.empty() ? log_grid(1.0, 1e6, 2) : options.gamma_grid;
        gamma = select_minimax_gamma(model, bench.x0, options.solver, grid).gamma;
        spdlog::info("minimax-DDP: gamma_w = {:g}", gamma);
      }
      row.lambda = kind == ControllerKind::kMinimaxDdp ? gamma
                   : kind == ControllerKind::kDrDdp   ? options.solver.lambda
                                                      : 0.0;
      const Solution sol = solve_controller(kind, model, bench.x0, ds, options.solver, gamma);
      row.report = out_of_sample(model, sol, bench.true_dist, options.eval, row.label);
    } catch (const std::exception& err) {
      spdlog::warn("{} failed: {}", row.label, err.what());
      row.failed = true;
      row.error = err.what();
      row.report.controller = row.label;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TimingRow> timing_sweep(const BenchmarkSettings& family, const std::vector<int>& sizes,
                                    ControllerKind controller, const SolverConfig& config,
                                    std::uint64_t seed, double minimax_gamma) {
  if (sizes.empty()) throw ConfigError("timing sweep needs at least one size");
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw ConfigError("sizes must be ascending");
  if (family.name != "kuramoto" && family.name != "lq") {
    throw ConfigError("timing sweep supports the kuramoto and lq families");
  }
  std::vector<TimingRow> rows;
  for (int size : sizes) {
    TimingRow row;
    row.size = size;
    try {
      BenchmarkSettings s = family;
      if (s.name == "kuramoto") {
        s.kuramoto.oscillators = size;
      } else {
        s.lq.nx = size;
      }
      const BenchmarkInstance bench = make_benchmark(s, seed);
      const DisturbanceDataset ds = benchmark_dataset(bench, seed);
      SolverConfig cfg = config;
      cfg.lambda = config.lambda > 0.0 ? config.lambda : bench.lambda;
      const Solution sol =
          solve_controller(controller, *bench.model, bench.x0, ds, cfg, minimax_gamma);
      std::vector<double> times;
      for (const IterationRecord& r : sol.history)
        if (r.iteration > 0) times.push_back(r.wall_time);
      std::tie(row.iter_time_mean, row.iter_time_std) = mean_std(times);
      row.iterations = sol.iterations;
      row.failed = times.empty();
    } catch (const std::exception& err) {
      spdlog::warn("size {} failed: {}", size, err.what());
      row.failed = true;
    }
    rows.push_back(row);
  }
  return rows;
}

double loglog_slope(const std::vector<TimingRow>& rows) {
  std::vector<double> lx, ly;
  for (const TimingRow& r : rows) {
    if (r.failed || !(r.iter_time_mean > 0.0)) continue;
    lx.push_back(std::log(static_cast<double>(r.size)));
    ly.push_back(std::log(r.iter_time_mean));
  }
  if (lx.size() < 2) return std::nan("");
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

DisturbanceDataset benchmark_dataset(const BenchmarkInstance& bench, std::uint64_t seed) {
  return draw_dataset(bench.true_dist, bench.model->dims().horizon, bench.samples,
                      derive_seed(seed, stream::kDataset));
}

}  // namespace drddp
