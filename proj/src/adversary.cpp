#include "crorl/adversary.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crorl {

namespace {

constexpr std::uint64_t kSelectStream = 0xc0;

double next_step_value(const ValueTables& q, int h, int s) {
  if (h >= q.H) return 0.0;
  double best = q.q(h, s, 0);
  for (int a = 1; a < q.A; ++a) best = std::max(best, q.q(h, s, a));
  return best;
}

}  // namespace

void AttackSpec::validate() const {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("AttackSpec: c must lie in [0, 1]");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("AttackSpec: eps must be finite and > 0");
}

int AttackSpec::radius() const { return std::max(1, static_cast<int>(std::ceil(eps))); }

std::string to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::random_reward: return "random_reward";
    case AttackMode::random_dynamics: return "random_dynamics";
    case AttackMode::adversarial_reward: return "adversarial_reward";
    case AttackMode::adversarial_dynamics: return "adversarial_dynamics";
  }
  return "unknown";
}

std::string to_string(AttackTiming timing) {
  return timing == AttackTiming::on_the_fly ? "on_the_fly" : "post_hoc";
}

AttackMode parse_attack_mode(std::string_view text) {
  if (text == "random_reward") return AttackMode::random_reward;
  if (text == "random_dynamics") return AttackMode::random_dynamics;
  if (text == "adversarial_reward") return AttackMode::adversarial_reward;
  if (text == "adversarial_dynamics") return AttackMode::adversarial_dynamics;
  throw std::invalid_argument(fmt::format("unknown attack mode \"{}\"", text));
}

AttackTiming parse_attack_timing(std::string_view text) {
  if (text == "on_the_fly") return AttackTiming::on_the_fly;
  if (text == "post_hoc") return AttackTiming::post_hoc;
  throw std::invalid_argument(fmt::format("unknown attack timing \"{}\"", text));
}

double CorruptionReport::zeta_exact() const {
  return std::accumulate(zeta_exact_per_h.begin(), zeta_exact_per_h.end(), 0.0);
}

std::vector<int> neighborhood(int S, int center, int radius) {
  std::vector<int> out;
  for (int s = std::max(0, center - radius); s <= std::min(S - 1, center + radius); ++s) out.push_back(s);
  return out;
}

Perturbed perturb_transition(const AttackSpec& spec, const TabularMDP& mdp, int h0, double r, int x_next,
                             const ValueTables* qoracle, Rng& rng) {
  switch (spec.mode) {
    case AttackMode::random_reward:
      return {rng.uniform(-spec.eps, spec.eps), x_next};
    case AttackMode::adversarial_reward:
      return {-spec.eps * r, x_next};
    case AttackMode::random_dynamics: {
      auto nb = neighborhood(mdp.S, x_next, spec.radius());
      std::erase(nb, x_next);
      if (nb.empty()) throw std::invalid_argument("random_dynamics: empty neighborhood");
      return {r, nb[rng.index(nb.size())]};
    }
    case AttackMode::adversarial_dynamics: {
      if (qoracle == nullptr) throw std::invalid_argument("adversarial_dynamics: Q oracle required");
      if (qoracle->S != mdp.S || qoracle->A != mdp.A || qoracle->H != mdp.H)
        throw std::invalid_argument("adversarial_dynamics: Q oracle dimensions do not match MDP");
      int best = x_next;
      double best_v = next_step_value(*qoracle, h0 + 1, x_next);
      for (int s : neighborhood(mdp.S, x_next, spec.radius())) {
        const double v = next_step_value(*qoracle, h0 + 1, s);
        if (v < best_v) {
          best = s;
          best_v = v;
        }
      }
      return {r, best};
    }
  }
  throw std::logic_error("perturb_transition: unhandled mode");
}

double record_zeta_bound(double r, int x_next, double clean_r, int clean_x_next) {
  return std::abs(r - clean_r) + (x_next != clean_x_next ? 1.0 : 0.0);
}

double zeta_approx(double num_records, double c, double eps) { return num_records * c * eps; }

CorruptResult corrupt(const OfflineDataset& ds, const TruthSidecar* sidecar, const AttackSpec& spec,
                      const TabularMDP& mdp, const ValueTables* qoracle) {
  spec.validate();
  ds.validate();
  if (spec.timing != AttackTiming::post_hoc)
    throw std::invalid_argument("corrupt: on-the-fly attacks are applied inside collect");
  if (ds.S != mdp.S || ds.A != mdp.A || ds.H != mdp.H)
    throw std::invalid_argument("corrupt: dataset dimensions do not match MDP");
  if (spec.mode == AttackMode::adversarial_dynamics && qoracle == nullptr)
    throw std::invalid_argument("corrupt: adversarial_dynamics requires a Q oracle");
  if (spec.is_dynamics() && mdp.S < 2) throw std::invalid_argument("corrupt: dynamics attack needs at least two states");
  if (sidecar && sidecar->entries.size() != ds.records.size())
    throw std::invalid_argument("corrupt: sidecar length differs from record count");

  CorruptResult out;
  out.data = ds;
  out.data.meta.attack = spec;
  if (sidecar) {
    out.truth = *sidecar;
  } else {
    out.truth.entries.reserve(ds.records.size());
    for (const auto& r : ds.records) out.truth.entries.push_back({r.r, r.x_next, false, 0.0});
  }

  const std::size_t total = ds.records.size();
  const double target = spec.c * static_cast<double>(total);
  std::size_t k = static_cast<std::size_t>(std::llround(target));
  if (target < 1.0) {
    if (spec.c > 0.0)
      fmt::print(stderr, "warning: c * |D| = {:.3g} < 1, no records corrupted\n", target);
    k = 0;
  }

  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  Rng rng(mix_seed(spec.seed, kSelectStream));
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(total - i)]);
  std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());

  std::vector<double> per_h(static_cast<std::size_t>(ds.H), 0.0);
  for (std::size_t i : chosen) {
    auto& rec = out.data.records[i];
    auto& truth = out.truth.entries[i];
    const auto p = perturb_transition(spec, mdp, rec.h - 1, rec.r, rec.x_next, qoracle, rng);
    rec.r = p.r;
    rec.x_next = p.x_next;
    truth.corrupted = true;
    truth.zeta = record_zeta_bound(rec.r, rec.x_next, truth.clean_r, truth.clean_x_next);
  }
  for (std::size_t i = 0; i < total; ++i) per_h[out.data.records[i].h - 1] += out.truth.entries[i].zeta;

  out.report.num_corrupted = static_cast<int>(k);
  out.report.zeta_approx = zeta_approx(static_cast<double>(total), spec.c, spec.eps);
  out.report.zeta_exact_per_h = std::move(per_h);
  out.report.attack = spec;
  return out;
}

CorruptionReport account_corruption(const TabularMDP& clean_mdp, const OfflineDataset& ds,
                                    const TruthSidecar& sidecar) {
  if (sidecar.entries.size() != ds.records.size())
    throw std::invalid_argument("account_corruption: sidecar length differs from record count");
  if (ds.S != clean_mdp.S || ds.A != clean_mdp.A || ds.H != clean_mdp.H)
    throw std::invalid_argument("account_corruption: dataset dimensions do not match MDP");
  CorruptionReport report;
  report.zeta_exact_per_h.assign(static_cast<std::size_t>(ds.H), 0.0);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    const auto& truth = sidecar.entries[i];
    if (truth.corrupted) ++report.num_corrupted;
    report.zeta_exact_per_h[rec.h - 1] += record_zeta_bound(rec.r, rec.x_next, truth.clean_r, truth.clean_x_next);
  }
  if (ds.meta.attack) {
    report.attack = ds.meta.attack;
    report.zeta_approx = zeta_approx(static_cast<double>(ds.records.size()), ds.meta.attack->c, ds.meta.attack->eps);
  }
  return report;
}

}  // namespace crorl
