#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cdfi {

// Shortest representation that parses back to the same double ("inf", "-inf", "nan" for
// non-finite values).
std::string format_real(double x);

// 64-bit FNV-1a; rendered as 16 hex digits.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string file_digest(const std::string& path);

// Minimal CSV writer: comma-separated, no quoting (all emitted fields are numeric or
// identifiers).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    CsvWriter& header(std::initializer_list<std::string_view> cols);
    CsvWriter& field(double v);
    CsvWriter& field(std::int64_t v);
    CsvWriter& field(std::uint64_t v);
    CsvWriter& field(int v) { return field(std::int64_t(v)); }
    CsvWriter& field(std::string_view s);
    CsvWriter& field(const char* s) { return field(std::string_view(s)); }
    CsvWriter& field(bool b) { return field(std::string_view(b ? "true" : "false")); }
    void end_row();

private:
    std::ostream& os_;
    bool first_ = true;
    void sep();
};

// Parses "a:b:steps" or "a:b:steps:log" into a grid.
std::vector<double> parse_grid(std::string_view text);
// Parses "a..b" into an inclusive integer range.
std::pair<std::int64_t, std::int64_t> parse_level_range(std::string_view text);
std::vector<double> log_grid(double a, double b, std::size_t steps);
std::vector<double> linear_grid(double a, double b, std::size_t steps);

} // namespace cdfi
