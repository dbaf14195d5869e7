#ifndef OATK_CONFIG_JSON_HPP
#define OATK_CONFIG_JSON_HPP

#include <string>

#include "oatk/harness.hpp"

// Internal JSON config surface shared by the C API and the CLI. Unknown keys
// are rejected at every level; numeric fields accept either JSON numbers or
// exact fraction strings like "4/255".

namespace oatk::detail {

/// Throws std::invalid_argument on schema violations. The returned config's
/// config_echo preserves the input's value spellings with defaults filled in.
ExperimentConfig parse_experiment_config(const std::string& json_text);

struct ParsedAttack {
    SingleAttackConfig single;      // black-box path
    PgdConfig pgd;                  // white-box path
    WhiteboxLossConfig whitebox;    // white-box path
    AttackMethod method = AttackMethod::Spsa;
    VisibleRange n;                 // white-box evaluation range
    std::string echo;               // resolved config, JSON
};

ParsedAttack parse_attack_config(const std::string& json_text);

/// Serializes an attack outcome (with the resolved spec and config echo).
std::string attack_result_to_json(const AttackResult& result, const AttackSpec& spec,
                                  const std::string& config_echo);

}  // namespace oatk::detail

#endif
