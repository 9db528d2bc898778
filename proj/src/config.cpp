#include "drddp/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "drddp/errors.hpp"
#include "drddp/parallel.hpp"

namespace drddp {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Typed access to one INI section; remembers which keys were read so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name, std::string source)
      : tree_(tree), name_(std::move(name)), source_(std::move(source)) {}

  bool has(const std::string& key) const {
    return tree_ != nullptr && tree_->find(key) != tree_->not_found();
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return trim(tree_->get<std::string>(key));
  }

  double get_double(const std::string& key, double fallback) {
    const std::string raw = get_string(key, "");
    if (!has(key)) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(raw, &pos);
      if (pos != raw.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw error(key, fmt::format("expected a number, got '{}'", raw));
    }
  }

  long long get_int(const std::string& key, long long fallback) {
    const std::string raw = get_string(key, "");
    if (!has(key)) return fallback;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(raw, &pos);
      if (pos != raw.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw error(key, fmt::format("expected an integer, got '{}'", raw));
    }
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) {
    const std::string raw = get_string(key, "");
    if (!has(key)) return fallback;
    try {
      std::size_t pos = 0;
      if (!raw.empty() && raw[0] == '-') throw std::invalid_argument("negative");
      const unsigned long long v = std::stoull(raw, &pos);
      if (pos != raw.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw error(key, fmt::format("expected a nonnegative integer, got '{}'", raw));
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    const std::string raw = get_string(key, "");
    if (!has(key)) return fallback;
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw error(key, fmt::format("expected true/false, got '{}'", raw));
  }

  void check_unknown() const {
    if (tree_ == nullptr) return;
    for (const auto& kv : *tree_) {
      if (!used_.count(kv.first)) throw error(kv.first, "unknown key");
    }
  }

  ConfigError error(const std::string& key, const std::string& what) const {
    return ConfigError(fmt::format("{}: [{}] {}: {}", source_, name_, key, what));
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::string source_;
  std::set<std::string> used_;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt::format("{}", v[i]);
  return out;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", field, item));
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& field) {
  std::vector<int> out;
  for (const std::string& item : split_list(text)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: '{}' is not an integer", field, item));
    }
  }
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& err) {
    throw ConfigError(fmt::format("{}:{}: {}", source, err.line(), err.message()));
  }
  static const std::set<std::string> kSections = {"run", "benchmark", "solver",
                                                  "eval", "tune", "bench"};
  for (const auto& kv : root) {
    if (kv.second.empty() && !kv.second.data().empty()) {
      throw ConfigError(fmt::format("{}: key '{}' outside of any section", source, kv.first));
    }
    if (!kSections.count(kv.first)) {
      throw ConfigError(fmt::format("{}: unknown section [{}]", source, kv.first));
    }
  }
  auto section = [&](const std::string& name) {
    const auto it = root.find(name);
    return Section(it == root.not_found() ? nullptr : &it->second, name, source);
  };

  RunConfig cfg;
  cfg.source = source;

  Section run = section("run");
  cfg.seed = run.get_seed("seed", 0);
  cfg.out_dir = run.get_string("out", "out");
  cfg.benchmark.name = run.get_string("benchmark", "");
  if (cfg.benchmark.name.empty()) throw run.error("benchmark", "required");
  const auto names = benchmark_names();
  if (std::find(names.begin(), names.end(), cfg.benchmark.name) == names.end()) {
    throw run.error("benchmark", fmt::format("unknown benchmark '{}'", cfg.benchmark.name));
  }
  try {
    cfg.controller = parse_controller(run.get_string("controller", "dr_ddp"));
  } catch (const ConfigError& err) {
    throw run.error("controller", err.what());
  }
  run.check_unknown();

  Section b = section("benchmark");
  int horizon = 0;
  double default_lambda = 1.0;
  if (cfg.benchmark.name == "car") {
    CarSettings& c = cfg.benchmark.car;
    c.horizon = static_cast<int>(b.get_int("horizon", c.horizon));
    c.dt = b.get_double("dt", c.dt);
    c.wheelbase = b.get_double("wheelbase", c.wheelbase);
    c.ref_speed = b.get_double("ref_speed", c.ref_speed);
    c.obstacle_speed = b.get_double("obstacle_speed", c.obstacle_speed);
    c.noise = b.get_double("noise", c.noise);
    c.samples = static_cast<int>(b.get_int("samples", c.samples));
    c.lambda = b.get_double("lambda", c.lambda);
    c.reference_file = b.get_string("reference_file", "");
    c.drift_file = b.get_string("drift_file", "");
    if (c.horizon < 1) throw b.error("horizon", "must be >= 1");
    if (!(c.dt > 0.0)) throw b.error("dt", "must be positive");
    if (!(c.wheelbase > 0.0)) throw b.error("wheelbase", "must be positive");
    if (!(c.noise >= 0.0)) throw b.error("noise", "must be >= 0");
    if (c.samples < 1) throw b.error("samples", "must be >= 1");
    horizon = c.horizon;
    default_lambda = c.lambda;
  } else if (cfg.benchmark.name == "kuramoto") {
    KuramotoSettings& k = cfg.benchmark.kuramoto;
    k.oscillators = static_cast<int>(b.get_int("oscillators", k.oscillators));
    k.horizon = static_cast<int>(b.get_int("horizon", k.horizon));
    k.dt = b.get_double("dt", k.dt);
    k.coupling = b.get_double("coupling", k.coupling);
    k.control_weight = b.get_double("control_weight", k.control_weight);
    k.omega_variance = b.get_double("omega_variance", k.omega_variance);
    k.noise_mean = b.get_double("noise_mean", k.noise_mean);
    k.noise_variance = b.get_double("noise_variance", k.noise_variance);
    k.initial_spread = b.get_double("initial_spread", k.initial_spread);
    k.samples = static_cast<int>(b.get_int("samples", k.samples));
    k.lambda = b.get_double("lambda", k.lambda);
    if (k.oscillators < 2) throw b.error("oscillators", "must be >= 2");
    if (k.horizon < 1) throw b.error("horizon", "must be >= 1");
    if (!(k.dt > 0.0)) throw b.error("dt", "must be positive");
    if (!(k.omega_variance >= 0.0)) throw b.error("omega_variance", "must be >= 0");
    if (!(k.noise_variance >= 0.0)) throw b.error("noise_variance", "must be >= 0");
    if (k.samples < 1) throw b.error("samples", "must be >= 1");
    horizon = k.horizon;
    default_lambda = k.lambda;
  } else {
    LqSettings& l = cfg.benchmark.lq;
    l.nx = static_cast<int>(b.get_int("nx", l.nx));
    l.nu = static_cast<int>(b.get_int("nu", l.nu));
    l.nw = static_cast<int>(b.get_int("nw", l.nw));
    l.horizon = static_cast<int>(b.get_int("horizon", l.horizon));
    l.samples = static_cast<int>(b.get_int("samples", l.samples));
    l.noise_std = b.get_double("noise_std", l.noise_std);
    l.lambda = b.get_double("lambda", l.lambda);
    if (l.nx < 1 || l.nu < 1 || l.nw < 1) throw b.error("nx/nu/nw", "must be >= 1");
    if (l.horizon < 1) throw b.error("horizon", "must be >= 1");
    if (l.samples < 1) throw b.error("samples", "must be >= 1");
    if (!(l.noise_std >= 0.0)) throw b.error("noise_std", "must be >= 0");
    horizon = l.horizon;
    default_lambda = l.lambda;
  }
  b.check_unknown();

  Section s = section("solver");
  SolverConfig& sc = cfg.solver;
  cfg.lambda_set = s.has("lambda");
  sc.lambda = s.get_double("lambda", default_lambda);
  sc.theta = s.get_double("theta", sc.theta);
  sc.max_iters = static_cast<int>(s.get_int("max_iters", sc.max_iters));
  sc.cost_tolerance = s.get_double("cost_tolerance", sc.cost_tolerance);
  sc.gradient_tolerance = s.get_double("gradient_tolerance", sc.gradient_tolerance);
  sc.gauss_newton = s.get_bool("gauss_newton", sc.gauss_newton);
  sc.regularization.mu = s.get_double("mu_init", sc.regularization.mu);
  sc.regularization.increase_factor = s.get_double("mu_increase", sc.regularization.increase_factor);
  sc.regularization.decrease_factor = s.get_double("mu_decrease", sc.regularization.decrease_factor);
  sc.regularization.mu_floor = s.get_double("mu_floor", sc.regularization.mu_floor);
  sc.regularization.mu_cap = s.get_double("mu_cap", sc.regularization.mu_cap);
  sc.line_search.alpha0 = s.get_double("alpha0", sc.line_search.alpha0);
  sc.line_search.backtrack = s.get_double("backtrack", sc.line_search.backtrack);
  sc.line_search.max_trials = static_cast<int>(s.get_int("max_trials", sc.line_search.max_trials));
  sc.line_search.armijo = s.get_double("armijo", sc.line_search.armijo);
  s.check_unknown();
  sc.seed = cfg.seed;
  try {
    sc.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(fmt::format("{}: [solver] {}", source, err.what()));
  }
  cfg.ambiguity.theta = sc.theta;
  cfg.ambiguity.lambda = sc.lambda;
  cfg.ambiguity.horizon = horizon;

  Section e = section("eval");
  cfg.eval.runs = static_cast<int>(e.get_int("runs", cfg.eval.runs));
  cfg.eval.samples_per_run = static_cast<int>(e.get_int("samples_per_run", cfg.eval.samples_per_run));
  cfg.eval.collision_threshold = e.get_double("collision_threshold", cfg.eval.collision_threshold);
  cfg.eval.threads = static_cast<int>(e.get_int("threads", 0));
  if (cfg.eval.threads <= 0) cfg.eval.threads = default_threads();
  cfg.eval.seed = cfg.seed;
  const std::string ctrl = e.get_string("controllers", "");
  try {
    for (const std::string& name : split_list(ctrl)) cfg.eval_controllers.push_back(parse_controller(name));
  } catch (const ConfigError& err) {
    throw e.error("controllers", err.what());
  }
  if (cfg.eval_controllers.empty()) cfg.eval_controllers.push_back(cfg.controller);
  cfg.minimax_gamma = e.get_double("minimax_gamma", 0.0);
  cfg.gamma_grid = parse_double_list(e.get_string("gamma_grid", ""), "[eval] gamma_grid");
  e.check_unknown();
  try {
    cfg.eval.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(fmt::format("{}: [eval] {}", source, err.what()));
  }

  Section t = section("tune");
  cfg.lambda_grid = parse_double_list(t.get_string("lambda_grid", ""), "[tune] lambda_grid");
  cfg.tune_runs = static_cast<int>(t.get_int("runs", cfg.tune_runs));
  if (cfg.tune_runs < 1) throw t.error("runs", "must be >= 1");
  for (double l : cfg.lambda_grid)
    if (!(l > 0.0)) throw t.error("lambda_grid", "entries must be positive");
  t.check_unknown();

  Section bn = section("bench");
  cfg.sizes = parse_int_list(bn.get_string("sizes", ""), "[bench] sizes");
  bn.check_unknown();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

std::string RunConfig::canonical() const {
  std::string o;
  auto line = [&](const std::string& k, const auto& v) { o += fmt::format("{} = {}\n", k, v); };
  o += "[run]\n";
  line("benchmark", benchmark.name);
  line("controller", controller_name(controller));
  line("seed", seed);
  line("out", out_dir.string());
  o += "\n[benchmark]\n";
  if (benchmark.name == "car") {
    const CarSettings& c = benchmark.car;
    line("horizon", c.horizon);
    line("dt", c.dt);
    line("wheelbase", c.wheelbase);
    line("ref_speed", c.ref_speed);
    line("obstacle_speed", c.obstacle_speed);
    line("noise", c.noise);
    line("samples", c.samples);
    line("lambda", c.lambda);
    if (!c.reference_file.empty()) line("reference_file", c.reference_file);
    if (!c.drift_file.empty()) line("drift_file", c.drift_file);
  } else if (benchmark.name == "kuramoto") {
    const KuramotoSettings& k = benchmark.kuramoto;
    line("oscillators", k.oscillators);
    line("horizon", k.horizon);
    line("dt", k.dt);
    line("coupling", k.coupling);
    line("control_weight", k.control_weight);
    line("omega_variance", k.omega_variance);
    line("noise_mean", k.noise_mean);
    line("noise_variance", k.noise_variance);
    line("initial_spread", k.initial_spread);
    line("samples", k.samples);
    line("lambda", k.lambda);
  } else {
    const LqSettings& l = benchmark.lq;
    line("nx", l.nx);
    line("nu", l.nu);
    line("nw", l.nw);
    line("horizon", l.horizon);
    line("samples", l.samples);
    line("noise_std", l.noise_std);
    line("lambda", l.lambda);
  }
  o += "\n[solver]\n";
  line("lambda", solver.lambda);
  line("theta", solver.theta);
  line("max_iters", solver.max_iters);
  line("cost_tolerance", solver.cost_tolerance);
  line("gradient_tolerance", solver.gradient_tolerance);
  line("gauss_newton", solver.gauss_newton ? "true" : "false");
  line("mu_init", solver.regularization.mu);
  line("mu_increase", solver.regularization.increase_factor);
  line("mu_decrease", solver.regularization.decrease_factor);
  line("mu_floor", solver.regularization.mu_floor);
  line("mu_cap", solver.regularization.mu_cap);
  line("alpha0", solver.line_search.alpha0);
  line("backtrack", solver.line_search.backtrack);
  line("max_trials", solver.line_search.max_trials);
  line("armijo", solver.line_search.armijo);
  o += "\n[eval]\n";
  line("runs", eval.runs);
  line("samples_per_run", eval.samples_per_run);
  line("collision_threshold", eval.collision_threshold);
  std::vector<std::string> names;
  for (ControllerKind k : eval_controllers) names.push_back(controller_name(k));
  line("controllers", join(names));
  line("minimax_gamma", minimax_gamma);
  if (!gamma_grid.empty()) line("gamma_grid", join(gamma_grid));
  o += "\n[tune]\n";
  if (!lambda_grid.empty()) line("lambda_grid", join(lambda_grid));
  line("runs", tune_runs);
  o += "\n[bench]\n";
  if (!sizes.empty()) line("sizes", join(sizes));
  return o;
}

}  // namespace drddp
