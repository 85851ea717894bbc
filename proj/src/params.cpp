#include "cdfi/params.hpp"

#include <charconv>
#include <stdexcept>
#include <string>

namespace cdfi {

std::optional<double> find_param(const ParamList& params, std::string_view key) {
    for (const auto& [k, v] : params)
        if (k == key) return v;
    return std::nullopt;
}

double get_param(const ParamList& params, std::string_view key, double fallback) {
    return find_param(params, key).value_or(fallback);
}

void set_param(ParamList& params, std::string_view key, double value) {
    for (auto& [k, v] : params)
        if (k == key) { v = value; return; }
    params.emplace_back(std::string(key), value);
}

static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::pair<std::string, double> parse_param_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
        throw std::invalid_argument("expected key=value, got '" + std::string(text) + "'");
    const auto key = trim(text.substr(0, eq));
    const auto val = trim(text.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("empty parameter name in '" + std::string(text) + "'");
    double v = 0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || ptr != val.data() + val.size())
        throw std::invalid_argument("parameter '" + std::string(key) + "' is not a number: '" +
                                    std::string(val) + "'");
    return {std::string(key), v};
}

} // namespace cdfi
