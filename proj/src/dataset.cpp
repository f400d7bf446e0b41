#include "crorl/dataset.hpp"

#include "crorl/adversary.hpp"
#include "crorl/rng.hpp"

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crorl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kAdversaryStream = 0xad;

std::string real(double v) { return fmt::format("{:.17g}", v); }

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw std::runtime_error(fmt::format("line {}: {}", line, what));
}

json parse_line(const std::string& text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    line_error(line, fmt::format("malformed JSON ({})", e.what()));
  }
}

void require_keys(const json& j, std::initializer_list<const char*> keys, std::size_t line) {
  if (!j.is_object()) line_error(line, "expected a JSON object");
  if (j.size() != keys.size()) line_error(line, fmt::format("expected exactly {} keys", keys.size()));
  for (const char* k : keys)
    if (!j.contains(k)) line_error(line, fmt::format("missing key \"{}\"", k));
}

int get_int(const json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) line_error(line, fmt::format("key \"{}\" must be an integer", key));
  return v.get<int>();
}

double get_real(const json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number()) line_error(line, fmt::format("key \"{}\" must be a number", key));
  return v.get<double>();
}

json attack_to_json(const AttackSpec& spec) {
  return json{{"mode", to_string(spec.mode)},
              {"c", spec.c},
              {"eps", spec.eps},
              {"timing", to_string(spec.timing)},
              {"seed", spec.seed}};
}

AttackSpec attack_from_json(const json& j) {
  AttackSpec spec;
  spec.mode = parse_attack_mode(j.at("mode").get<std::string>());
  spec.c = j.at("c").get<double>();
  spec.eps = j.at("eps").get<double>();
  spec.timing = parse_attack_timing(j.at("timing").get<std::string>());
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

double sample_reward(const TabularMDP& mdp, int h0, int x, int a, Rng& rng) {
  const double mean = mdp.r(h0, x, a);
  if (mdp.bernoulli_scale > 0.0)
    return rng.bernoulli(mean / mdp.bernoulli_scale) ? mdp.bernoulli_scale : 0.0;
  if (mdp.reward_noise > 0.0) return mean + rng.uniform(-mdp.reward_noise, mdp.reward_noise);
  return mean;
}

}  // namespace

void OfflineDataset::validate() const {
  if (n < 1 || H < 1 || S < 1 || A < 1) throw std::invalid_argument("OfflineDataset: n, H, S, A must be >= 1");
  if (records.size() != static_cast<std::size_t>(n) * H)
    throw std::invalid_argument(
        fmt::format("OfflineDataset: expected {} records, found {}", static_cast<long>(n) * H, records.size()));
  // A post-hoc dynamics attack rewrites x_next without re-simulating, so the
  // next record's x keeps the clean state.
  const bool chained = !(meta.attack && meta.attack->timing == AttackTiming::post_hoc && meta.attack->is_dynamics());
  for (int i = 0; i < n; ++i)
    for (int h0 = 0; h0 < H; ++h0) {
      const auto& rec = at(i, h0);
      if (rec.episode != i || rec.h != h0 + 1)
        throw std::invalid_argument(fmt::format("OfflineDataset: record order broken at episode {} step {}", i, h0 + 1));
      if (rec.x < 0 || rec.x >= S || rec.x_next < 0 || rec.x_next >= S || rec.a < 0 || rec.a >= A)
        throw std::invalid_argument(fmt::format("OfflineDataset: id out of range at episode {} step {}", i, h0 + 1));
      if (!std::isfinite(rec.r))
        throw std::invalid_argument(fmt::format("OfflineDataset: non-finite reward at episode {} step {}", i, h0 + 1));
      if (chained && h0 > 0 && rec.x != at(i, h0 - 1).x_next)
        throw std::invalid_argument(fmt::format("OfflineDataset: chaining broken at episode {} step {}", i, h0 + 1));
    }
}

Policy epsilon_greedy(const Policy& base, double explore) {
  if (!(explore >= 0.0 && explore <= 1.0)) throw std::invalid_argument("epsilon_greedy: explore must lie in [0, 1]");
  Policy out = base;
  for (int h = 0; h < base.H; ++h)
    for (int s = 0; s < base.S; ++s)
      for (int a = 0; a < base.A; ++a)
        out.prob[(static_cast<std::size_t>(h) * base.S + s) * base.A + a] =
            (1.0 - explore) * base.pr(h, s, a) + explore / base.A;
  return out;
}

CollectResult collect(const TabularMDP& mdp, const Policy& behavior, int n, std::uint64_t seed,
                      const std::optional<AttackSpec>& adversary, const ValueTables* qoracle) {
  mdp.validate();
  behavior.validate();
  if (behavior.H != mdp.H || behavior.S != mdp.S || behavior.A != mdp.A)
    throw std::invalid_argument("collect: behavior policy dimensions do not match MDP");
  if (n < 1) throw std::invalid_argument("collect: n must be >= 1");

  const bool on_the_fly = adversary && adversary->timing == AttackTiming::on_the_fly;
  std::optional<ValueTables> own_oracle;
  if (adversary) {
    adversary->validate();
    if (adversary->is_dynamics() && mdp.S < 2)
      throw std::invalid_argument("collect: dynamics attack needs at least two states");
    if (adversary->mode == AttackMode::adversarial_dynamics && qoracle == nullptr) {
      own_oracle = solve_optimal(mdp).values;
      qoracle = &*own_oracle;
    }
  }

  CollectResult out;
  auto& ds = out.data;
  ds.n = n;
  ds.H = mdp.H;
  ds.S = mdp.S;
  ds.A = mdp.A;
  ds.meta.mdp_hash = hash_mdp(mdp);
  ds.meta.behavior_hash = hash_policy(behavior);
  ds.meta.seed = seed;
  if (on_the_fly) ds.meta.attack = adversary;
  ds.records.reserve(static_cast<std::size_t>(n) * mdp.H);
  out.truth.entries.reserve(ds.records.capacity());

  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    Rng adv_rng(mix_seed(mix_seed(adversary ? adversary->seed : 0, kAdversaryStream), static_cast<std::uint64_t>(i)));
    int x = static_cast<int>(rng.categorical(mdp.x1));
    for (int h0 = 0; h0 < mdp.H; ++h0) {
      const int a = static_cast<int>(
          rng.categorical({behavior.prob.data() + (static_cast<std::size_t>(h0) * mdp.S + x) * mdp.A,
                           static_cast<std::size_t>(mdp.A)}));
      const double r = sample_reward(mdp, h0, x, a, rng);
      const int x_next = static_cast<int>(rng.categorical(mdp.next(h0, x, a)));
      TransitionRecord rec{i, h0 + 1, x, a, r, x_next};
      SidecarEntry truth{r, x_next, false, 0.0};
      if (on_the_fly && adv_rng.bernoulli(adversary->c)) {
        const auto p = perturb_transition(*adversary, mdp, h0, r, x_next, qoracle, adv_rng);
        rec.r = p.r;
        rec.x_next = p.x_next;
        truth.corrupted = true;
        truth.zeta = record_zeta_bound(p.r, p.x_next, r, x_next);
      }
      ds.records.push_back(rec);
      out.truth.entries.push_back(truth);
      x = rec.x_next;
    }
  }

  if (adversary && !on_the_fly) {
    auto attacked = corrupt(ds, &out.truth, *adversary, mdp, qoracle);
    out.data = std::move(attacked.data);
    out.truth = std::move(attacked.truth);
  }
  return out;
}

void serialize_dataset(const OfflineDataset& ds, const TruthSidecar* sidecar, const std::string& prefix) {
  if (sidecar && sidecar->entries.size() != ds.records.size())
    throw std::invalid_argument("serialize_dataset: sidecar length differs from record count");
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  {
    auto out = fmt::output_file(prefix + ".data.jsonl");
    for (const auto& r : ds.records)
      out.print("{{\"episode\":{},\"h\":{},\"x\":{},\"a\":{},\"r\":{},\"x_next\":{}}}\n", r.episode, r.h, r.x, r.a,
                real(r.r), r.x_next);
  }
  if (sidecar) {
    auto out = fmt::output_file(prefix + ".sidecar.jsonl");
    for (const auto& e : sidecar->entries)
      out.print("{{\"clean_r\":{},\"clean_x_next\":{},\"corrupted\":{},\"zeta\":{}}}\n", real(e.clean_r),
                e.clean_x_next, e.corrupted, real(e.zeta));
  }
  json meta{{"n", ds.n},
            {"H", ds.H},
            {"S", ds.S},
            {"A", ds.A},
            {"mdp_hash", ds.meta.mdp_hash},
            {"behavior_hash", ds.meta.behavior_hash},
            {"seed", ds.meta.seed},
            {"attack", ds.meta.attack ? attack_to_json(*ds.meta.attack) : json(nullptr)}};
  std::ofstream(prefix + ".meta.json") << meta.dump(2) << '\n';
}

std::vector<TransitionRecord> parse_records(std::istream& in) {
  std::vector<TransitionRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) line_error(line, "empty line");
    const json j = parse_line(text, line);
    require_keys(j, {"episode", "h", "x", "a", "r", "x_next"}, line);
    out.push_back({get_int(j, "episode", line), get_int(j, "h", line), get_int(j, "x", line), get_int(j, "a", line),
                   get_real(j, "r", line), get_int(j, "x_next", line)});
  }
  return out;
}

std::vector<SidecarEntry> parse_sidecar(std::istream& in) {
  std::vector<SidecarEntry> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) line_error(line, "empty line");
    const json j = parse_line(text, line);
    require_keys(j, {"clean_r", "clean_x_next", "corrupted", "zeta"}, line);
    if (!j.at("corrupted").is_boolean()) line_error(line, "key \"corrupted\" must be a boolean");
    out.push_back({get_real(j, "clean_r", line), get_int(j, "clean_x_next", line), j.at("corrupted").get<bool>(),
                   get_real(j, "zeta", line)});
  }
  return out;
}

LoadedDataset load_dataset(const std::string& prefix) {
  LoadedDataset out;
  auto& ds = out.data;
  {
    std::ifstream in(prefix + ".data.jsonl");
    if (!in) throw std::runtime_error(fmt::format("cannot open {}.data.jsonl", prefix));
    try {
      ds.records = parse_records(in);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(fmt::format("{}.data.jsonl: {}", prefix, e.what()));
    }
  }
  if (ds.records.empty()) throw std::runtime_error(fmt::format("{}.data.jsonl: no records", prefix));

  std::ifstream meta_in(prefix + ".meta.json");
  if (meta_in) {
    const json meta = json::parse(meta_in);
    ds.n = meta.at("n").get<int>();
    ds.H = meta.at("H").get<int>();
    ds.S = meta.at("S").get<int>();
    ds.A = meta.at("A").get<int>();
    ds.meta.mdp_hash = meta.at("mdp_hash").get<std::uint64_t>();
    ds.meta.behavior_hash = meta.at("behavior_hash").get<std::uint64_t>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    if (!meta.at("attack").is_null()) ds.meta.attack = attack_from_json(meta.at("attack"));
  } else {
    // Without metadata the dimensions are inferred from the largest ids seen.
    for (const auto& r : ds.records) {
      ds.n = std::max(ds.n, r.episode + 1);
      ds.H = std::max(ds.H, r.h);
      ds.S = std::max({ds.S, r.x + 1, r.x_next + 1});
      ds.A = std::max(ds.A, r.a + 1);
    }
  }
  ds.validate();

  std::ifstream side_in(prefix + ".sidecar.jsonl");
  if (side_in) {
    TruthSidecar truth;
    try {
      truth.entries = parse_sidecar(side_in);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(fmt::format("{}.sidecar.jsonl: {}", prefix, e.what()));
    }
    if (truth.entries.size() != ds.records.size())
      throw std::runtime_error(fmt::format("{}.sidecar.jsonl: {} lines for {} records", prefix, truth.entries.size(),
                                           ds.records.size()));
    out.truth = std::move(truth);
  }
  return out;
}

}  // namespace crorl
