#include "dktax/csv.hpp"

#include "dktax/error.hpp"

#include <array>
#include <cmath>

namespace dktax::csv {

std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

Reader::Reader(const std::string& path) : in_(path) {
    if (!in_) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in_, line)) throw DataError(path + " is empty (no header)");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    header_ = split_line(line);
}

std::optional<std::size_t> Reader::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    return std::nullopt;
}

bool Reader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++row_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        fields = split_line(line);
        return true;
    }
    return false;
}

std::string fmt(double x) {
    if (std::isnan(x)) return {};
    if (x == std::trunc(x) && std::abs(x) < 1e15) return fmt(static_cast<std::int64_t>(x));
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), p);
}

std::string fmt(std::int64_t x) {
    std::array<char, 32> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), p);
}

Writer::Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error("cannot write " + path);
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw Error("write failed for " + path_);
}

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double x = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return x;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    std::int64_t x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return x;
}

}  // namespace dktax::csv
