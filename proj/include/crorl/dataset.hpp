#pragma once

#include "crorl/attack.hpp"
#include "crorl/envs.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crorl {

/// One logged transition. `h` is 1-based here, matching the on-disk format.
struct TransitionRecord {
  int episode = 0;
  int h = 1;
  int x = 0;
  int a = 0;
  double r = 0.0;
  int x_next = 0;

  bool operator==(const TransitionRecord&) const = default;
};

struct DatasetMeta {
  std::uint64_t mdp_hash = 0;
  std::uint64_t behavior_hash = 0;
  std::uint64_t seed = 0;
  std::optional<AttackSpec> attack;

  bool operator==(const DatasetMeta&) const = default;
};

/// Solver-facing data: no clean values, no flags.
struct OfflineDataset {
  int n = 0;
  int H = 0;
  int S = 0;
  int A = 0;
  std::vector<TransitionRecord> records;  // episode-major, then step
  DatasetMeta meta;

  std::size_t size() const { return records.size(); }
  const TransitionRecord& at(int episode, int h0) const {
    return records[static_cast<std::size_t>(episode) * H + h0];
  }
  /// Throws std::invalid_argument on count, range or chaining violations.
  void validate() const;

  bool operator==(const OfflineDataset&) const = default;
};

struct SidecarEntry {
  double clean_r = 0.0;
  int clean_x_next = 0;
  bool corrupted = false;
  double zeta = 0.0;  // per-record Bellman-gap upper bound

  bool operator==(const SidecarEntry&) const = default;
};

struct TruthSidecar {
  std::vector<SidecarEntry> entries;
  bool operator==(const TruthSidecar&) const = default;
};

struct CollectResult {
  OfflineDataset data;
  TruthSidecar truth;
};

/// Roll out n episodes of `behavior` in `mdp`. Episode i draws from
/// Rng(mix_seed(seed, i)); an on-the-fly adversary draws from a separate
/// stream so the clean randomness is unchanged by the attack. `qoracle` is
/// required for adversarial dynamics (defaults to the clean optimum).
CollectResult collect(const TabularMDP& mdp, const Policy& behavior, int n, std::uint64_t seed,
                      const std::optional<AttackSpec>& adversary = std::nullopt,
                      const ValueTables* qoracle = nullptr);

/// Epsilon-greedy mixture of a deterministic policy and the uniform policy.
Policy epsilon_greedy(const Policy& base, double explore);

/// Writes <prefix>.data.jsonl, <prefix>.sidecar.jsonl and <prefix>.meta.json.
void serialize_dataset(const OfflineDataset& ds, const TruthSidecar* sidecar, const std::string& prefix);

struct LoadedDataset {
  OfflineDataset data;
  std::optional<TruthSidecar> truth;
};

/// Loads the dataset; the sidecar is read only when its file exists.
LoadedDataset load_dataset(const std::string& prefix);

/// Parse a dataset JSON-lines stream alone. Errors name the 1-based line.
std::vector<TransitionRecord> parse_records(std::istream& in);
std::vector<SidecarEntry> parse_sidecar(std::istream& in);

}  // namespace crorl
