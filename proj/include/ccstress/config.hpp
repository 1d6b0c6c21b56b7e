#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ccstress/fuzzer.hpp"

namespace ccstress {

/// Bad configuration input. `field` names the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() || what.rfind(field, 0) == 0 ? what : field + ": " + what),
          field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Sets one key (e.g. "ga.population_size") from its text value.
void set_config_value(CampaignConfig& cfg, const std::string& key, const std::string& value);

/// Every serialized key in a fixed order with its current value. Runtime
/// knobs that cannot change results (ga.threads) are left out.
std::vector<std::pair<std::string, std::string>> config_entries(const CampaignConfig& cfg);

/// Flat `key = value` lines; '#' starts a comment.
CampaignConfig parse_config(const std::string& text);
/// Applies the lines of `text` on top of `cfg`.
void apply_config_text(CampaignConfig& cfg, const std::string& text);
std::string config_to_text(const CampaignConfig& cfg);

/// Runs CampaignConfig::check and rethrows failures as ConfigError with the
/// key named in the message.
void validate_config(const CampaignConfig& cfg);

}  // namespace ccstress
