#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace crorl {

enum class AttackMode { random_reward, random_dynamics, adversarial_reward, adversarial_dynamics };
enum class AttackTiming { on_the_fly, post_hoc };

struct AttackSpec {
  AttackMode mode = AttackMode::random_reward;
  double c = 0.0;    // fraction of records attacked, in [0, 1]
  double eps = 1.0;  // corruption scale, > 0
  AttackTiming timing = AttackTiming::post_hoc;
  std::uint64_t seed = 0;

  void validate() const;
  bool is_dynamics() const {
    return mode == AttackMode::random_dynamics || mode == AttackMode::adversarial_dynamics;
  }
  /// Neighborhood radius in state-index distance used by the dynamics attacks.
  int radius() const;

  bool operator==(const AttackSpec&) const = default;
};

std::string to_string(AttackMode mode);
std::string to_string(AttackTiming timing);
AttackMode parse_attack_mode(std::string_view text);
AttackTiming parse_attack_timing(std::string_view text);

}  // namespace crorl
