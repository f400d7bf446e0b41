#pragma once

#include "crorl/attack.hpp"
#include "crorl/solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crorl {

/// Flat "key = value" configuration with '#' comments and dotted keys.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_reals(const std::string& key, std::vector<double> fallback) const;
  std::vector<long> get_ints(const std::string& key, std::vector<long> fallback) const;
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = {value, 0}; }

  /// Keys that were read by none of the getters (typos).
  std::vector<std::string> unused() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, Entry> values_;
  mutable std::map<std::string, bool> used_;
};

struct ExperimentSpec {
  std::uint64_t master_seed = 1;
  std::string mdp_kind = "linear";  // linear | tabular
  int d = 4;
  int S = 8;
  int A = 2;
  int H = 3;
  double reward_noise = 0.0;
  std::string instance = "per_seed";  // per_seed | fixed
  std::uint64_t mdp_seed = 0;
  std::string behavior = "uniform";   // uniform | eps_greedy
  double explore = 0.3;
  std::optional<AttackMode> attack_mode;
  AttackTiming timing = AttackTiming::post_hoc;
  std::vector<long> ns{1000};
  std::vector<double> cs{0.0};
  std::vector<double> epss{1.0};
  std::vector<double> alphas{1.0};
  int seeds = 1;
  SolverConfig solver;
  std::string defaults = "manual";  // manual | theorem
  std::string zeta_budget = "none";  // none | approx | exact
  std::vector<Algorithm> algorithms{Algorithm::cr_pevi, Algorithm::pevi};
  double cords_rho = 1.0;
  bool timing_enabled = false;
  bool coverage = true;
};

ExperimentSpec parse_experiment(const Config& cfg);

struct ExperimentCell {
  int cell_id = 0;
  int seed_index = 0;
  long n = 0;
  double c = 0.0;
  double eps = 1.0;
  double alpha = 1.0;
  std::uint64_t derived_seed = 0;  // mix_seed(master_seed, cell_id)
  std::uint64_t instance_seed = 0;
};

/// Cells in nesting order n, c, eps, alpha, seed.
std::vector<ExperimentCell> expand_cells(const ExperimentSpec& spec);

struct ResultsRow {
  int cell_id = 0;
  int seed = 0;
  long n = 0;
  int H = 0;
  int d = 0;
  int S = 0;
  int A = 0;
  std::string attack_mode = "none";
  double c = 0.0;
  double eps = 0.0;
  double zeta_exact = 0.0;
  double zeta_approx = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
  double beta_scale = 0.0;
  std::string weighting;
  std::string algorithm;
  double suboptimality = 0.0;
  double cc_weighted = 0.0;
  double cc_unweighted = 0.0;
  double min_eig = 0.0;
  double wall_time_ms = 0.0;
};

/// Runs one cell: build MDP, collect, attack, solve with every configured
/// algorithm, evaluate. Throws on any failure.
std::vector<ResultsRow> run_cell(const ExperimentSpec& spec, const ExperimentCell& cell);

std::string csv_header();
std::string csv_line(const ResultsRow& row);

struct SweepOutcome {
  std::vector<ResultsRow> rows;
  std::vector<std::string> errors;  // "cell <id>: <message>"
  int exit_code = 0;                // 0 on success, 2 if any cell failed
};

/// Runs every cell with up to `jobs` worker threads; rows come back in cell order.
SweepOutcome run_sweep(const ExperimentSpec& spec, int jobs);

/// Writes results.csv (and errors.log when needed) into out_dir.
SweepOutcome run_sweep_to_dir(const ExperimentSpec& spec, int jobs, const std::string& out_dir);

}  // namespace crorl
