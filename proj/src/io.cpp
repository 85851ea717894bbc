#include "cdfi/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cdfi {

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 15];
    return s;
}

std::string file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "' for digest");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (f) {
        f.read(buf, sizeof buf);
        h = fnv1a(std::string_view(buf, std::size_t(f.gcount())), h);
    }
    return hex64(h);
}

void CsvWriter::sep() {
    if (!first_) os_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::header(std::initializer_list<std::string_view> cols) {
    for (auto c : cols) field(c);
    end_row();
    return *this;
}

CsvWriter& CsvWriter::field(double v) { sep(); os_ << format_real(v); return *this; }
CsvWriter& CsvWriter::field(std::int64_t v) { sep(); os_ << v; return *this; }
CsvWriter& CsvWriter::field(std::uint64_t v) { sep(); os_ << v; return *this; }
CsvWriter& CsvWriter::field(std::string_view s) { sep(); os_ << s; return *this; }

void CsvWriter::end_row() {
    os_ << '\n';
    first_ = true;
}

static double to_real(std::string_view s, std::string_view what) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument(std::string(what) + ": not a number '" + std::string(s) + "'");
    return v;
}

std::vector<double> log_grid(double a, double b, std::size_t steps) {
    if (!(a > 0) || !(b >= a) || steps == 0) throw std::invalid_argument("log grid needs 0 < a <= b, steps >= 1");
    std::vector<double> g(steps);
    if (steps == 1) { g[0] = a; return g; }
    const double la = std::log(a), lb = std::log(b);
    for (std::size_t i = 0; i < steps; ++i) g[i] = std::exp(la + (lb - la) * double(i) / double(steps - 1));
    g.front() = a;
    g.back() = b;
    return g;
}

std::vector<double> linear_grid(double a, double b, std::size_t steps) {
    if (!(b >= a) || steps == 0) throw std::invalid_argument("grid needs a <= b, steps >= 1");
    std::vector<double> g(steps);
    if (steps == 1) { g[0] = a; return g; }
    for (std::size_t i = 0; i < steps; ++i) g[i] = a + (b - a) * double(i) / double(steps - 1);
    g.back() = b;
    return g;
}

std::vector<double> parse_grid(std::string_view text) {
    std::vector<std::string_view> parts;
    while (true) {
        const auto c = text.find(':');
        parts.push_back(text.substr(0, c));
        if (c == std::string_view::npos) break;
        text.remove_prefix(c + 1);
    }
    if (parts.size() < 3 || parts.size() > 4)
        throw std::invalid_argument("grid must look like a:b:steps or a:b:steps:log");
    const double a = to_real(parts[0], "grid start"), b = to_real(parts[1], "grid end");
    const double steps = to_real(parts[2], "grid steps");
    if (!(steps >= 1) || steps != std::floor(steps)) throw std::invalid_argument("grid steps must be a positive integer");
    const bool log = parts.size() == 4;
    if (log && parts[3] != "log") throw std::invalid_argument("grid spacing must be 'log'");
    return log ? log_grid(a, b, std::size_t(steps)) : linear_grid(a, b, std::size_t(steps));
}

std::pair<std::int64_t, std::int64_t> parse_level_range(std::string_view text) {
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) throw std::invalid_argument("level range must look like a..b");
    std::int64_t a = 0, b = 0;
    auto s1 = text.substr(0, dots), s2 = text.substr(dots + 2);
    auto r1 = std::from_chars(s1.data(), s1.data() + s1.size(), a);
    auto r2 = std::from_chars(s2.data(), s2.data() + s2.size(), b);
    if (r1.ec != std::errc() || r1.ptr != s1.data() + s1.size() || r2.ec != std::errc() ||
        r2.ptr != s2.data() + s2.size())
        throw std::invalid_argument("level range must look like a..b with integers");
    if (a > b) throw std::invalid_argument("level range is empty");
    return {a, b};
}

} // namespace cdfi
