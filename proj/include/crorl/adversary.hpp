#pragma once

#include "crorl/attack.hpp"
#include "crorl/dataset.hpp"
#include "crorl/envs.hpp"
#include "crorl/rng.hpp"

#include <optional>
#include <vector>

namespace crorl {

struct CorruptionReport {
  int num_corrupted = 0;
  double zeta_approx = 0.0;  // |D| * c * eps
  std::vector<double> zeta_exact_per_h;  // 0-based steps; empty when not computed
  std::optional<AttackSpec> attack;

  double zeta_exact() const;
};

/// States whose index lies within `radius` of `center`, in increasing order.
std::vector<int> neighborhood(int S, int center, int radius);

struct Perturbed {
  double r = 0.0;
  int x_next = 0;
};

/// Apply one attack to a single transition at 0-based step h0. For
/// adversarial dynamics the candidate with the smallest next-step value
/// max_a Q[h0 + 1] wins; ties keep the clean state, then the lower index.
Perturbed perturb_transition(const AttackSpec& spec, const TabularMDP& mdp, int h0, double r, int x_next,
                             const ValueTables* qoracle, Rng& rng);

/// Per-record Bellman-gap bound |r - clean_r| + 1[x_next != clean_x_next].
/// The indicator is the total-variation distance between the realized point
/// masses, an upper bound for any value table with range [0, 1].
double record_zeta_bound(double r, int x_next, double clean_r, int clean_x_next);

double zeta_approx(double num_records, double c, double eps);

struct CorruptResult {
  OfflineDataset data;
  TruthSidecar truth;
  CorruptionReport report;
};

/// Post-hoc attack on a saved dataset: exactly round(c * |D|) records, drawn
/// uniformly without replacement, are modified. Episodes are not re-simulated.
/// When `sidecar` is null the input is taken to be clean.
CorruptResult corrupt(const OfflineDataset& ds, const TruthSidecar* sidecar, const AttackSpec& spec,
                      const TabularMDP& mdp, const ValueTables* qoracle = nullptr);

/// Recompute the corruption totals from the sidecar.
CorruptionReport account_corruption(const TabularMDP& clean_mdp, const OfflineDataset& ds,
                                    const TruthSidecar& sidecar);

}  // namespace crorl
