#include "crorl/harness.hpp"
#include "crorl/plot.hpp"
#include "crorl/rng.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace crorl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "crorl_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string load_config_text(const std::string& name) {
  return read_file(fs::path(CRORL_SOURCE_DIR) / "configs" / name);
}

std::string error_of(const std::string& text) {
  try {
    parse_experiment(Config::parse(text));
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::string csv_of(const SweepOutcome& out) {
  std::string csv = csv_header() + "\n";
  for (const auto& r : out.rows) csv += csv_line(r) + "\n";
  return csv;
}

int count(const std::string& text, const std::string& needle) {
  int k = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++k;
  return k;
}

const char* kSmallGrid = R"(master_seed = 3
mdp.d = 3
mdp.S = 6
mdp.A = 2
mdp.H = 3
attack.mode = random_reward
sweep.n = 60, 120
sweep.c = 0.1
sweep.eps = 1
sweep.alpha = 0.2
sweep.seeds = 3
solver.beta_scale = 0.05
algorithms = cr_pevi, pevi
)";

}  // namespace

TEST(Config, ErrorsNameKeyAndLine) {
  EXPECT_NE(error_of("mdp.d = 4\nmdp.S = eight\n").find("mdp.S\" (line 2)"), std::string::npos);
  EXPECT_NE(error_of("mdp.d = 4\n\n# comment\nmdp.d = 5\n").find("line 4"), std::string::npos);
  EXPECT_NE(error_of("mdp.d 4\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("sweep.n = 100, x\n").find("sweep.n"), std::string::npos);
  EXPECT_NE(error_of("mdp.kind = grid\n").find("mdp.kind"), std::string::npos);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_NE(error_of("mdp.dd = 4\n").find("\"mdp.dd\": unknown key"), std::string::npos);
}

TEST(Config, CommentsAndWhitespace) {
  const auto cfg = Config::parse("  # header\n mdp.d=5   # trailing\n\nsweep.n = 10 ,20\n");
  const auto spec = parse_experiment(cfg);
  EXPECT_EQ(spec.d, 5);
  EXPECT_EQ(spec.ns, (std::vector<long>{10, 20}));
}

TEST(Cells, NestingOrderAndDistinctSeeds) {
  auto spec = parse_experiment(Config::parse(
      "sweep.n = 10, 20\nsweep.c = 0, 0.1\nsweep.eps = 1, 2\nsweep.alpha = 0.5\nsweep.seeds = 3\n"));
  const auto cells = expand_cells(spec);
  ASSERT_EQ(cells.size(), 24u);
  EXPECT_EQ(cells[0].n, 10);
  EXPECT_EQ(cells[1].seed_index, 1);
  EXPECT_EQ(cells[3].eps, 2.0);
  EXPECT_EQ(cells[6].c, 0.1);
  EXPECT_EQ(cells[12].n, 20);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].cell_id, static_cast<int>(i));
    EXPECT_EQ(cells[i].derived_seed, mix_seed(spec.master_seed, i));
    seeds.insert(cells[i].derived_seed);
  }
  EXPECT_EQ(seeds.size(), cells.size());
  // Instances depend on the seed index only, so grid points share them.
  EXPECT_EQ(cells[0].instance_seed, cells[3].instance_seed);
  EXPECT_NE(cells[0].instance_seed, cells[1].instance_seed);
}

TEST(Sweep, LargeAlphaSingleCellGivesEqualRows) {
  const auto spec = parse_experiment(Config::parse(
      "mdp.d = 3\nmdp.S = 6\nsweep.n = 200\nsweep.alpha = 1e6\nsolver.beta_scale = 0.05\nalgorithms = cr_pevi, pevi\n"));
  const auto out = run_sweep(spec, 1);
  ASSERT_EQ(out.exit_code, 0);
  ASSERT_EQ(out.rows.size(), 2u);
  EXPECT_EQ(out.rows[0].algorithm, "cr_pevi");
  EXPECT_EQ(out.rows[1].algorithm, "pevi");
  EXPECT_EQ(out.rows[0].suboptimality, out.rows[1].suboptimality);
  EXPECT_EQ(out.rows[1].weighting, "unit");
}

TEST(Sweep, RerunAndJobCountAreByteIdentical) {
  const auto spec = parse_experiment(Config::parse(kSmallGrid));
  const auto a = run_sweep(spec, 1);
  const auto b = run_sweep(spec, 1);
  const auto c = run_sweep(spec, 3);
  ASSERT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.rows.size(), 12u);
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_EQ(csv_of(a), csv_of(c));
}

TEST(Sweep, RowsAreSane) {
  const auto out = run_sweep(parse_experiment(Config::parse(kSmallGrid)), 2);
  for (const auto& r : out.rows) {
    EXPECT_GE(r.suboptimality, 0.0);
    EXPECT_EQ(r.attack_mode, "random_reward");
    EXPECT_NEAR(r.zeta_approx, r.n * r.H * r.c * r.eps, 1e-9);
    EXPECT_GE(r.zeta_exact, 0.0);
    EXPECT_EQ(r.wall_time_ms, 0.0);
  }
}

TEST(Sweep, FailingCellDoesNotTouchOthers) {
  std::string bad = kSmallGrid;
  bad.replace(bad.find("sweep.eps = 1"), 13, "sweep.eps = 1, -1");
  const auto spec = parse_experiment(Config::parse(bad));
  const auto mixed = run_sweep(spec, 3);
  EXPECT_EQ(mixed.exit_code, 2);
  ASSERT_EQ(mixed.errors.size(), 6u);
  for (const auto& e : mixed.errors) EXPECT_EQ(e.rfind("cell ", 0), 0u) << e;
  ASSERT_EQ(mixed.rows.size(), 12u);
  // Every surviving row matches the same cell run on its own.
  const auto cells = expand_cells(spec);
  for (std::size_t i = 0; i < mixed.rows.size(); i += 2) {
    const auto& cell = cells[static_cast<std::size_t>(mixed.rows[i].cell_id)];
    EXPECT_EQ(cell.eps, 1.0);
    const auto alone = run_cell(spec, cell);
    ASSERT_EQ(alone.size(), 2u);
    EXPECT_EQ(csv_line(alone[0]), csv_line(mixed.rows[i]));
    EXPECT_EQ(csv_line(alone[1]), csv_line(mixed.rows[i + 1]));
  }
}

TEST(Sweep, CleanScalingMeanDecreasesInN) {
  auto text = load_config_text("clean_rate.cfg");
  text.replace(text.find("algorithms = cr_pevi"), 20, "algorithms = cr_pevi, pevi");
  const auto out = run_sweep(parse_experiment(Config::parse(text)), 4);
  ASSERT_EQ(out.exit_code, 0);
  ASSERT_EQ(out.rows.size(), 80u);
  std::map<std::pair<std::string, long>, std::vector<double>> groups;
  for (const auto& r : out.rows) groups[{r.algorithm, r.n}].push_back(r.suboptimality);
  ASSERT_EQ(groups.size(), 8u);
  for (const std::string alg : {"cr_pevi", "pevi"}) {
    double prev_mean = 0.0, prev_se = 0.0;
    bool first = true;
    for (long n : {100L, 400L, 1600L, 6400L}) {
      const auto& v = groups[{alg, n}];
      double mean = 0.0, sq = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      for (double x : v) sq += (x - mean) * (x - mean);
      const double se = std::sqrt(sq / (v.size() - 1) / v.size());
      if (!first) EXPECT_LE(mean, prev_mean + 2.0 * std::hypot(se, prev_se)) << alg << " n=" << n;
      first = false;
      prev_mean = mean;
      prev_se = se;
    }
  }
}

TEST(Sweep, WritesResultsAndErrorLog) {
  const auto dir = scratch("sweep_dir");
  std::ofstream(dir / "errors.log") << "stale\n";
  const auto out = run_sweep_to_dir(parse_experiment(Config::parse(kSmallGrid)), 2, dir.string());
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_FALSE(fs::exists(dir / "errors.log"));
  const auto csv = read_file(dir / "results.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header());
  EXPECT_EQ(count(csv, "\n"), 13);
}

TEST(Csv, HeaderIsStable) {
  EXPECT_EQ(csv_header(),
            "cell_id,seed,n,H,d,S,A,attack_mode,c,eps,zeta_exact,zeta_approx,alpha,lambda,beta_scale,weighting,"
            "algorithm,suboptimality,cc_weighted,cc_unweighted,min_eig,wall_time_ms");
  ResultsRow r;
  r.suboptimality = 0.1;
  EXPECT_NE(csv_line(r).find("0.10000000000000001"), std::string::npos);
}

TEST(Plot, EmptyTableIsAnErrorAndWritesNothing) {
  const auto dir = scratch("plot_empty");
  std::ofstream(dir / "results.csv") << csv_header() << "\n";
  EXPECT_THROW(emit_plots((dir / "results.csv").string(), (dir / "out").string()), std::exception);
  EXPECT_FALSE(fs::exists(dir / "out" / "subopt_vs_n.svg"));
}

TEST(Plot, TwoAlgorithmsFourSizes) {
  const auto dir = scratch("plot_two");
  std::ofstream csv(dir / "results.csv");
  csv << csv_header() << "\n";
  int id = 0;
  for (long n : {100L, 400L, 1600L, 6400L})
    for (int seed = 0; seed < 2; ++seed) {
      for (const char* alg : {"cr_pevi", "pevi"}) {
        ResultsRow r;
        r.cell_id = id;
        r.seed = seed;
        r.n = n;
        r.algorithm = alg;
        r.suboptimality = 1.0 / std::sqrt(static_cast<double>(n)) * (seed + 1);
        csv << csv_line(r) << "\n";
      }
      ++id;
    }
  csv.close();
  const auto written = emit_plots((dir / "results.csv").string(), dir.string());
  ASSERT_EQ(written.size(), 1u);
  const auto svg = read_file(dir / "subopt_vs_n.svg");
  EXPECT_EQ(count(svg, "<polyline class=\"series\""), 2);
  EXPECT_EQ(count(svg, "<g class=\"legend-entry\""), 2);
  EXPECT_EQ(count(svg, "<polygon class=\"band\""), 2);
  std::vector<std::string> ticks;
  for (auto pos = svg.find("class=\"xtick\""); pos != std::string::npos; pos = svg.find("class=\"xtick\"", pos + 1)) {
    const auto open = svg.find('>', pos) + 1;
    ticks.push_back(svg.substr(open, svg.find('<', open) - open));
  }
  EXPECT_EQ(ticks, (std::vector<std::string>{"100", "400", "1600", "6400"}));
  EXPECT_FALSE(fs::exists(dir / "subopt_vs_zeta.svg"));
}

TEST(Plot, MissingColumnIsNamed) {
  const auto dir = scratch("plot_missing");
  std::ofstream(dir / "results.csv") << "n,algorithm\n100,pevi\n";
  try {
    emit_plots((dir / "results.csv").string(), dir.string());
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("suboptimality"), std::string::npos) << e.what();
  }
}
