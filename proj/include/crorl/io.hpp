#pragma once

#include "crorl/envs.hpp"
#include "crorl/solver.hpp"
#include "crorl/weights.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace crorl {

/// Reals are written with 17 significant digits, fields in the order
/// S, A, H, P, R, phi (optional), x1, reward_noise, bernoulli_scale.
std::string mdp_to_json(const TabularMDP& mdp, const Eigen::MatrixXd* phi = nullptr);

struct LoadedMDP {
  TabularMDP mdp;
  std::optional<Eigen::MatrixXd> phi;  // (S*A) x d
};

LoadedMDP mdp_from_json(const std::string& text);
void save_mdp(const std::string& path, const TabularMDP& mdp, const Eigen::MatrixXd* phi = nullptr);
LoadedMDP load_mdp(const std::string& path);

std::string weights_to_json(const WeightVector& w);

/// Policy as a nested [h][s] action array (deterministic) or [h][s][a] table.
std::string policy_to_json(const Policy& pi);
Policy policy_from_json(const std::string& text, int S, int A, int H);

/// Policy, beta, per-step weights and diagnostics.
std::string report_to_json(const SolveReport& rep, Algorithm algorithm);
/// Reads the "policy" member back from a report document.
Policy policy_from_report(const std::string& text, int S, int A, int H);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace crorl
