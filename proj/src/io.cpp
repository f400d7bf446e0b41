#include "crorl/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crorl {

using nlohmann::json;

namespace {

void put_real(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  fmt::format_to(std::back_inserter(out), "{:.17g}", v);
}

void put_reals(std::string& out, const double* v, std::size_t n) {
  out += '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    put_real(out, v[i]);
  }
  out += ']';
}

template <class Fn>
void put_list(std::string& out, int n, Fn&& item) {
  out += '[';
  for (int i = 0; i < n; ++i) {
    if (i) out += ',';
    item(i);
  }
  out += ']';
}

double as_real(const json& j, const char* what) {
  if (!j.is_number()) throw std::runtime_error(fmt::format("MDP JSON: {} must be numeric", what));
  return j.get<double>();
}

}  // namespace

std::string mdp_to_json(const TabularMDP& mdp, const Eigen::MatrixXd* phi) {
  std::string out;
  fmt::format_to(std::back_inserter(out), "{{\"S\":{},\"A\":{},\"H\":{},\"P\":", mdp.S, mdp.A, mdp.H);
  put_list(out, mdp.H, [&](int h) {
    put_list(out, mdp.S, [&](int s) {
      put_list(out, mdp.A, [&](int a) { put_reals(out, mdp.next(h, s, a).data(), static_cast<std::size_t>(mdp.S)); });
    });
  });
  out += ",\"R\":";
  put_list(out, mdp.H, [&](int h) {
    put_list(out, mdp.S, [&](int s) { put_reals(out, &mdp.R[mdp.r_index(h, s, 0)], static_cast<std::size_t>(mdp.A)); });
  });
  if (phi) {
    out += ",\"phi\":";
    put_list(out, mdp.S, [&](int s) {
      put_list(out, mdp.A, [&](int a) {
        const Eigen::VectorXd row = phi->row(static_cast<Eigen::Index>(mdp.pair(s, a))).transpose();
        put_reals(out, row.data(), static_cast<std::size_t>(row.size()));
      });
    });
  }
  out += ",\"x1\":";
  put_reals(out, mdp.x1.data(), mdp.x1.size());
  out += ",\"reward_noise\":";
  put_real(out, mdp.reward_noise);
  out += ",\"bernoulli_scale\":";
  put_real(out, mdp.bernoulli_scale);
  out += "}\n";
  return out;
}

LoadedMDP mdp_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("MDP JSON: {}", e.what()));
  }
  LoadedMDP out;
  auto& m = out.mdp;
  m.S = j.at("S").get<int>();
  m.A = j.at("A").get<int>();
  m.H = j.at("H").get<int>();
  if (m.S < 1 || m.A < 1 || m.H < 1) throw std::runtime_error("MDP JSON: S, A, H must be >= 1");
  m.P.assign(static_cast<std::size_t>(m.H) * m.S * m.A * m.S, 0.0);
  m.R.assign(static_cast<std::size_t>(m.H) * m.S * m.A, 0.0);
  const auto& P = j.at("P");
  const auto& R = j.at("R");
  if (P.size() != static_cast<std::size_t>(m.H) || R.size() != static_cast<std::size_t>(m.H))
    throw std::runtime_error("MDP JSON: P and R need H entries");
  for (int h = 0; h < m.H; ++h) {
    if (P[h].size() != static_cast<std::size_t>(m.S) || R[h].size() != static_cast<std::size_t>(m.S))
      throw std::runtime_error(fmt::format("MDP JSON: step {} needs S entries", h));
    for (int s = 0; s < m.S; ++s) {
      if (P[h][s].size() != static_cast<std::size_t>(m.A) || R[h][s].size() != static_cast<std::size_t>(m.A))
        throw std::runtime_error(fmt::format("MDP JSON: step {} state {} needs A entries", h, s));
      for (int a = 0; a < m.A; ++a) {
        const auto& row = P[h][s][a];
        if (row.size() != static_cast<std::size_t>(m.S))
          throw std::runtime_error(fmt::format("MDP JSON: P[{}][{}][{}] needs S entries", h, s, a));
        auto dst = m.next(h, s, a);
        for (int s2 = 0; s2 < m.S; ++s2) dst[s2] = as_real(row[s2], "P");
        m.r(h, s, a) = as_real(R[h][s][a], "R");
      }
    }
  }
  const auto& x1 = j.at("x1");
  if (x1.size() != static_cast<std::size_t>(m.S)) throw std::runtime_error("MDP JSON: x1 needs S entries");
  for (const auto& v : x1) m.x1.push_back(as_real(v, "x1"));
  if (j.contains("reward_noise")) m.reward_noise = as_real(j.at("reward_noise"), "reward_noise");
  if (j.contains("bernoulli_scale")) m.bernoulli_scale = as_real(j.at("bernoulli_scale"), "bernoulli_scale");
  if (j.contains("phi") && !j.at("phi").is_null()) {
    const auto& phi = j.at("phi");
    if (phi.size() != static_cast<std::size_t>(m.S) || phi[0].size() != static_cast<std::size_t>(m.A))
      throw std::runtime_error("MDP JSON: phi must be indexed [s][a]");
    const auto d = static_cast<Eigen::Index>(phi[0][0].size());
    Eigen::MatrixXd f(static_cast<Eigen::Index>(m.S) * m.A, d);
    for (int s = 0; s < m.S; ++s)
      for (int a = 0; a < m.A; ++a) {
        const auto& row = phi[s][a];
        if (static_cast<Eigen::Index>(row.size()) != d) throw std::runtime_error("MDP JSON: ragged phi");
        for (Eigen::Index k = 0; k < d; ++k) f(static_cast<Eigen::Index>(m.pair(s, a)), k) = as_real(row[k], "phi");
      }
    out.phi = std::move(f);
  }
  m.validate();
  return out;
}

void save_mdp(const std::string& path, const TabularMDP& mdp, const Eigen::MatrixXd* phi) {
  write_file(path, mdp_to_json(mdp, phi));
}

LoadedMDP load_mdp(const std::string& path) { return mdp_from_json(read_file(path)); }

std::string weights_to_json(const WeightVector& w) {
  std::string out;
  fmt::format_to(std::back_inserter(out), "{{\"alpha\":{:.17g},\"lambda\":{:.17g},\"iterations\":{},\"sigma_sq\":",
                 w.alpha, w.lambda, w.iterations);
  put_reals(out, w.sigma_sq.data(), w.sigma_sq.size());
  out += '}';
  return out;
}

std::string policy_to_json(const Policy& pi) {
  std::string out;
  if (pi.is_deterministic()) {
    put_list(out, pi.H, [&](int h) {
      put_list(out, pi.S, [&](int s) { fmt::format_to(std::back_inserter(out), "{}", pi.action(h, s)); });
    });
    return out;
  }
  put_list(out, pi.H, [&](int h) {
    put_list(out, pi.S, [&](int s) {
      put_reals(out, &pi.prob[(static_cast<std::size_t>(h) * pi.S + s) * pi.A], static_cast<std::size_t>(pi.A));
    });
  });
  return out;
}

namespace {

Policy policy_from(const json& j, int S, int A, int H) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(H)) throw std::runtime_error("policy JSON: need H rows");
  Policy pi{H, S, A, std::vector<double>(static_cast<std::size_t>(H) * S * A, 0.0)};
  for (int h = 0; h < H; ++h) {
    if (j[h].size() != static_cast<std::size_t>(S)) throw std::runtime_error("policy JSON: need S entries per step");
    for (int s = 0; s < S; ++s) {
      const auto& cell = j[h][s];
      double* row = &pi.prob[(static_cast<std::size_t>(h) * S + s) * A];
      if (cell.is_number_integer()) {
        const int a = cell.get<int>();
        if (a < 0 || a >= A) throw std::runtime_error("policy JSON: action out of range");
        row[a] = 1.0;
      } else {
        if (cell.size() != static_cast<std::size_t>(A)) throw std::runtime_error("policy JSON: need A probabilities");
        for (int a = 0; a < A; ++a) row[a] = cell[a].get<double>();
      }
    }
  }
  pi.validate();
  return pi;
}

}  // namespace

Policy policy_from_json(const std::string& text, int S, int A, int H) { return policy_from(json::parse(text), S, A, H); }

std::string report_to_json(const SolveReport& rep, Algorithm algorithm) {
  std::string out;
  fmt::format_to(std::back_inserter(out), "{{\"algorithm\":\"{}\",\"policy\":", to_string(algorithm));
  out += policy_to_json(rep.policy);
  out += ",\"beta\":";
  put_reals(out, rep.beta.data(), rep.beta.size());
  fmt::format_to(std::back_inserter(out), ",\"lambda\":{:.17g},\"gamma\":{:.17g},\"log_covering\":{:.17g}", rep.lambda,
                 rep.gamma, rep.log_covering);
  out += ",\"f\":";
  put_list(out, rep.f.H, [&](int h) {
    put_list(out, rep.f.S, [&](int s) {
      put_reals(out, &rep.f.Q[(static_cast<std::size_t>(h) * rep.f.S + s) * rep.f.A], static_cast<std::size_t>(rep.f.A));
    });
  });
  out += ",\"weights\":";
  put_list(out, static_cast<int>(rep.weights.size()), [&](int h) { out += weights_to_json(rep.weights[h]); });
  out += ",\"diagnostics\":";
  put_list(out, static_cast<int>(rep.diagnostics.size()), [&](int h) {
    const auto& d = rep.diagnostics[h];
    fmt::format_to(std::back_inserter(out),
                   "{{\"weighted_error\":{:.17g},\"bonus_min\":{:.17g},\"bonus_mean\":{:.17g},\"bonus_max\":{:.17g},"
                   "\"weight_iterations\":{},\"max_sigma_sq\":{:.17g},\"samples\":{}}}",
                   d.weighted_error, d.bonus_min, d.bonus_mean, d.bonus_max, d.weight_iterations, d.max_sigma_sq,
                   d.samples);
  });
  out += "}\n";
  return out;
}

Policy policy_from_report(const std::string& text, int S, int A, int H) {
  const json j = json::parse(text);
  return policy_from(j.at("policy"), S, A, H);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
  out << content;
}

}  // namespace crorl
