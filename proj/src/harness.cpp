#include "crorl/harness.hpp"

#include "crorl/adversary.hpp"
#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/eval.hpp"
#include "crorl/io.hpp"
#include "crorl/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <limits>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace crorl {

namespace {

// Stream tags for mix_seed. Cell seeds use the cell id directly.
constexpr std::uint64_t kInstanceTag = 0x6d6470;  // "mdp"
constexpr std::uint64_t kCollectStream = 1;
constexpr std::uint64_t kAttackStream = 2;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_long(const std::string& s, long& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::string real(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw std::runtime_error(fmt::format("config line {}: expected \"key = value\"", line));
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(fmt::format("config line {}: empty key", line));
    for (char ch : key)
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'))
        throw std::runtime_error(fmt::format("config line {}: invalid key \"{}\"", line, key));
    if (value.empty()) throw std::runtime_error(fmt::format("config line {}: key \"{}\" has no value", line, key));
    if (cfg.values_.count(key))
      throw std::runtime_error(fmt::format("config line {}: key \"{}\" repeated (first on line {})", line, key,
                                           cfg.values_.at(key).line));
    cfg.values_[key] = {value, line};
  }
  return cfg;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

const Config::Entry* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_[key] = true;
  return &it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
  const auto it = values_.find(key);
  const int line = it == values_.end() ? 0 : it->second.line;
  throw std::runtime_error(fmt::format("config key \"{}\" (line {}): {}", key, line, what));
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_real(const std::string& key, double fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_real(e->value, v)) fail(key, fmt::format("expected a number, got \"{}\"", e->value));
  return v;
}

long Config::get_int(const std::string& key, long fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  long v = 0;
  if (!parse_long(e->value, v)) fail(key, fmt::format("expected an integer, got \"{}\"", e->value));
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  fail(key, fmt::format("expected true or false, got \"{}\"", e->value));
}

std::vector<double> Config::get_reals(const std::string& key, std::vector<double> fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    double v = 0.0;
    if (!parse_real(item, v)) fail(key, fmt::format("expected a number, got \"{}\"", item));
    out.push_back(v);
  }
  return out;
}

std::vector<long> Config::get_ints(const std::string& key, std::vector<long> fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<long> out;
  for (const auto& item : split_list(e->value)) {
    long v = 0;
    if (!parse_long(item, v)) fail(key, fmt::format("expected an integer, got \"{}\"", item));
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, std::vector<std::string> fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  return split_list(e->value);
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

ExperimentSpec parse_experiment(const Config& cfg) {
  ExperimentSpec spec;
  auto guard = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("config key \"{}\": {}", key, e.what()));
    }
  };
  spec.master_seed = static_cast<std::uint64_t>(cfg.get_int("master_seed", 1));
  spec.mdp_kind = cfg.get("mdp.kind", spec.mdp_kind);
  if (spec.mdp_kind != "linear" && spec.mdp_kind != "tabular")
    throw std::runtime_error(fmt::format("config key \"mdp.kind\": unknown kind \"{}\"", spec.mdp_kind));
  spec.d = static_cast<int>(cfg.get_int("mdp.d", spec.d));
  spec.S = static_cast<int>(cfg.get_int("mdp.S", spec.S));
  spec.A = static_cast<int>(cfg.get_int("mdp.A", spec.A));
  spec.H = static_cast<int>(cfg.get_int("mdp.H", spec.H));
  spec.reward_noise = cfg.get_real("mdp.reward_noise", spec.reward_noise);
  spec.instance = cfg.get("mdp.instance", spec.instance);
  if (spec.instance != "per_seed" && spec.instance != "fixed")
    throw std::runtime_error(fmt::format("config key \"mdp.instance\": unknown value \"{}\"", spec.instance));
  spec.mdp_seed = static_cast<std::uint64_t>(cfg.get_int("mdp.seed", 0));
  spec.behavior = cfg.get("behavior.kind", spec.behavior);
  if (spec.behavior != "uniform" && spec.behavior != "eps_greedy")
    throw std::runtime_error(fmt::format("config key \"behavior.kind\": unknown value \"{}\"", spec.behavior));
  spec.explore = cfg.get_real("behavior.explore", spec.explore);

  const std::string mode = cfg.get("attack.mode", "none");
  if (mode != "none") guard("attack.mode", [&] { spec.attack_mode = parse_attack_mode(mode); });
  guard("attack.timing", [&] { spec.timing = parse_attack_timing(cfg.get("attack.timing", "post_hoc")); });

  spec.ns = cfg.get_ints("sweep.n", spec.ns);
  spec.cs = cfg.get_reals("sweep.c", spec.cs);
  spec.epss = cfg.get_reals("sweep.eps", spec.epss);
  spec.alphas = cfg.get_reals("sweep.alpha", spec.alphas);
  spec.seeds = static_cast<int>(cfg.get_int("sweep.seeds", spec.seeds));

  auto& s = spec.solver;
  s.lambda = cfg.get_real("solver.lambda", s.lambda);
  s.beta_scale = cfg.get_real("solver.beta_scale", s.beta_scale);
  s.delta = cfg.get_real("solver.delta", s.delta);
  s.gamma = cfg.get_real("solver.gamma", s.gamma);
  s.eta = cfg.get_real("solver.eta", s.eta);
  guard("solver.beta_mode", [&] { s.beta_mode = parse_beta_mode(cfg.get("solver.beta_mode", "plugin")); });
  guard("solver.weighting", [&] { s.weighting = parse_weighting(cfg.get("solver.weighting", "uncertainty")); });
  spec.defaults = cfg.get("solver.defaults", spec.defaults);
  if (spec.defaults != "manual" && spec.defaults != "theorem")
    throw std::runtime_error(fmt::format("config key \"solver.defaults\": unknown value \"{}\"", spec.defaults));
  spec.zeta_budget = cfg.get("solver.zeta_budget", spec.zeta_budget);
  if (spec.zeta_budget != "none" && spec.zeta_budget != "approx" && spec.zeta_budget != "exact")
    throw std::runtime_error(fmt::format("config key \"solver.zeta_budget\": unknown value \"{}\"", spec.zeta_budget));

  if (cfg.has("algorithms")) {
    spec.algorithms.clear();
    for (const auto& a : cfg.get_strings("algorithms", {}))
      guard("algorithms", [&] { spec.algorithms.push_back(parse_algorithm(a)); });
  }
  spec.cords_rho = cfg.get_real("cords.rho", spec.cords_rho);
  spec.timing_enabled = cfg.get_bool("output.timing", spec.timing_enabled);
  spec.coverage = cfg.get_bool("output.coverage", spec.coverage);

  if (const auto extra = cfg.unused(); !extra.empty())
    throw std::runtime_error(fmt::format("config key \"{}\": unknown key", extra.front()));
  if (spec.seeds < 1) throw std::runtime_error("config key \"sweep.seeds\": must be >= 1");
  if (spec.ns.empty() || spec.cs.empty() || spec.epss.empty() || spec.alphas.empty())
    throw std::runtime_error("config: sweep lists must be non-empty");
  for (long n : spec.ns)
    if (n < 1) throw std::runtime_error("config key \"sweep.n\": values must be >= 1");
  if (spec.algorithms.empty()) throw std::runtime_error("config key \"algorithms\": empty list");
  return spec;
}

std::vector<ExperimentCell> expand_cells(const ExperimentSpec& spec) {
  std::vector<ExperimentCell> cells;
  int id = 0;
  for (long n : spec.ns)
    for (double c : spec.cs)
      for (double eps : spec.epss)
        for (double alpha : spec.alphas)
          for (int seed = 0; seed < spec.seeds; ++seed) {
            ExperimentCell cell;
            cell.cell_id = id;
            cell.seed_index = seed;
            cell.n = n;
            cell.c = c;
            cell.eps = eps;
            cell.alpha = alpha;
            cell.derived_seed = mix_seed(spec.master_seed, static_cast<std::uint64_t>(id));
            cell.instance_seed = spec.instance == "fixed"
                                     ? spec.mdp_seed
                                     : mix_seed(mix_seed(spec.master_seed, kInstanceTag), static_cast<std::uint64_t>(seed));
            cells.push_back(cell);
            ++id;
          }
  return cells;
}

std::vector<ResultsRow> run_cell(const ExperimentSpec& spec, const ExperimentCell& cell) {
  const auto start = std::chrono::steady_clock::now();
  LinearMDP lin = spec.mdp_kind == "linear"
                      ? build_linear_mdp(spec.d, spec.S, spec.A, spec.H, cell.instance_seed)
                      : tabular_as_linear(build_random_tabular(spec.S, spec.A, spec.H, cell.instance_seed));
  lin.base.reward_noise = spec.reward_noise;
  const TabularMDP& mdp = lin.base;
  const auto backend = FunctionClassBackend::linear(lin.phi, mdp.S, mdp.A);
  const auto opt = solve_optimal(mdp);
  const Policy behavior =
      spec.behavior == "uniform" ? Policy::uniform(mdp.H, mdp.S, mdp.A) : epsilon_greedy(opt.policy, spec.explore);

  std::optional<AttackSpec> attack;
  if (spec.attack_mode && cell.c > 0.0) {
    AttackSpec a;
    a.mode = *spec.attack_mode;
    a.c = cell.c;
    a.eps = cell.eps;
    a.timing = spec.timing;
    a.seed = mix_seed(cell.derived_seed, kAttackStream);
    attack = a;
  }
  if (cell.n > std::numeric_limits<int>::max()) throw std::runtime_error("n too large");
  const auto collected = collect(mdp, behavior, static_cast<int>(cell.n), mix_seed(cell.derived_seed, kCollectStream),
                                 attack, &opt.values);
  const auto& ds = collected.data;
  const auto acct = account_corruption(mdp, ds, collected.truth);

  SolverConfig cfg = spec.solver;
  cfg.alpha = cell.alpha;
  if (spec.zeta_budget == "approx")
    cfg.zeta_per_h.assign(static_cast<std::size_t>(mdp.H), acct.zeta_approx / mdp.H);
  else if (spec.zeta_budget == "exact")
    cfg.zeta_per_h = acct.zeta_exact_per_h;
  if (spec.defaults == "theorem") {
    const auto d = theorem_defaults(ds.n, mdp.H, backend, cfg.zeta_per_h, cfg.delta, cfg.beta_scale, cfg.beta_mode);
    cfg.alpha = d.alpha;
    cfg.lambda = d.lambda;
    cfg.gamma = d.gamma;
  }

  double cc_w = 0.0;
  double cc_u = 0.0;
  double min_eig = 0.0;
  if (spec.coverage) {
    const auto cov = coverage_coefficient(mdp, ds, backend, cfg);
    cc_w = cov.cc_weighted;
    cc_u = cov.cc_unweighted;
    min_eig = cov.min_eig_per_h.empty() ? 0.0 : *std::min_element(cov.min_eig_per_h.begin(), cov.min_eig_per_h.end());
  }

  std::vector<ResultsRow> rows;
  for (Algorithm alg : spec.algorithms) {
    SolverConfig c = cfg;
    if (alg == Algorithm::cords_pevi) c.rho.assign(static_cast<std::size_t>(ds.n), spec.cords_rho);
    const auto rep = solve(alg, ds, backend, c);
    ResultsRow row;
    row.cell_id = cell.cell_id;
    row.seed = cell.seed_index;
    row.n = cell.n;
    row.H = mdp.H;
    row.d = lin.d;
    row.S = mdp.S;
    row.A = mdp.A;
    row.attack_mode = attack ? to_string(attack->mode) : "none";
    row.c = cell.c;
    row.eps = cell.eps;
    row.zeta_exact = acct.zeta_exact();
    row.zeta_approx = acct.zeta_approx;
    row.alpha = c.alpha;
    row.lambda = c.lambda;
    row.beta_scale = c.beta_scale;
    row.weighting = alg == Algorithm::pevi ? "unit" : to_string(c.weighting);
    row.algorithm = to_string(alg);
    row.suboptimality = suboptimality(mdp, rep.policy);
    row.cc_weighted = cc_w;
    row.cc_unweighted = cc_u;
    row.min_eig = min_eig;
    rows.push_back(std::move(row));
  }
  if (spec.timing_enabled) {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : rows) r.wall_time_ms = ms;
  }
  return rows;
}

std::string csv_header() {
  return "cell_id,seed,n,H,d,S,A,attack_mode,c,eps,zeta_exact,zeta_approx,alpha,lambda,beta_scale,weighting,"
         "algorithm,suboptimality,cc_weighted,cc_unweighted,min_eig,wall_time_ms";
}

std::string csv_line(const ResultsRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.cell_id, r.seed, r.n, r.H,
                     r.d, r.S, r.A, r.attack_mode, real(r.c), real(r.eps), real(r.zeta_exact), real(r.zeta_approx),
                     real(r.alpha), real(r.lambda), real(r.beta_scale), r.weighting, r.algorithm,
                     real(r.suboptimality), real(r.cc_weighted), real(r.cc_unweighted), real(r.min_eig),
                     real(r.wall_time_ms));
}

SweepOutcome run_sweep(const ExperimentSpec& spec, int jobs) {
  const auto cells = expand_cells(spec);
  std::vector<std::vector<ResultsRow>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(spec, cells[i]);
      } catch (const std::exception& e) {
        errors[i] = fmt::format("cell {}: {}", cells[i].cell_id, e.what());
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  SweepOutcome out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) {
      out.errors.push_back(errors[i]);
      continue;
    }
    for (auto& r : results[i]) out.rows.push_back(std::move(r));
  }
  out.exit_code = out.errors.empty() ? 0 : 2;
  return out;
}

SweepOutcome run_sweep_to_dir(const ExperimentSpec& spec, int jobs, const std::string& out_dir) {
  auto out = run_sweep(spec, jobs);
  std::string csv = csv_header() + "\n";
  for (const auto& r : out.rows) csv += csv_line(r) + "\n";
  write_file((std::filesystem::path(out_dir) / "results.csv").string(), csv);
  const auto log_path = std::filesystem::path(out_dir) / "errors.log";
  if (!out.errors.empty()) {
    std::string log;
    for (const auto& e : out.errors) log += e + "\n";
    write_file(log_path.string(), log);
  } else if (std::filesystem::exists(log_path)) {
    std::filesystem::remove(log_path);
  }
  return out;
}

}  // namespace crorl
