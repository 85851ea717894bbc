#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdfi {

// Ordered key/value list; order is preserved so digests are stable.
using ParamList = std::vector<std::pair<std::string, double>>;

std::optional<double> find_param(const ParamList& params, std::string_view key);
double get_param(const ParamList& params, std::string_view key, double fallback);
void set_param(ParamList& params, std::string_view key, double value);

// "k=v" -> (k, v); throws std::invalid_argument on malformed input.
std::pair<std::string, double> parse_param_assignment(std::string_view text);

} // namespace cdfi
