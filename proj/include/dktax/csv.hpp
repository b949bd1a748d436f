#pragma once

// Minimal CSV reading/writing for the panel and report files. Fields never
// contain commas or quotes in any file this project produces; quoted fields
// are accepted on input.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dktax::csv {

std::vector<std::string> split_line(std::string_view line);

class Reader {
public:
    explicit Reader(const std::string& path);

    const std::vector<std::string>& header() const { return header_; }
    /// Index of a header column, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;

    /// Reads the next data row; false at end of file. Blank lines are skipped.
    bool next(std::vector<std::string>& fields);
    /// 1-based data row number of the last row returned by next().
    std::size_t row() const { return row_; }

private:
    std::ifstream in_;
    std::vector<std::string> header_;
    std::size_t row_ = 0;
};

/// Shortest representation that round-trips exactly.
std::string fmt(double x);
std::string fmt(std::int64_t x);
inline std::string fmt(int x) { return fmt(static_cast<std::int64_t>(x)); }
template <class T>
std::string fmt(const std::optional<T>& x) {
    return x ? fmt(*x) : std::string();
}

class Writer {
public:
    explicit Writer(const std::string& path);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::string path_;
};

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

}  // namespace dktax::csv
