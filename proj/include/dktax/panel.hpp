#pragma once

// Person-year panel: data model, CSV ingestion with hard validation, price
// deflation and the quasi-balanced completion used for attrition analysis.

#include "dktax/tax.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dktax {

using PersonId = std::int64_t;

inline constexpr int kFirstYear = 1981;
inline constexpr int kLastYear = 1993;
inline constexpr int kBaseYear = 1986;
inline constexpr int kReformYear = 1987;
inline constexpr int kNumYears = kLastYear - kFirstYear + 1;

/// Ranked occupation scale. Only the order matters downstream.
enum class OccRank : int {
    Unskilled = 0,
    Skilled = 1,
    LowWhiteCollar = 2,
    MidWhiteCollar = 3,
    HighWhiteCollar = 4,
    TopManager = 5,
};

enum class Education : int { Low = 0, Middle = 1, High = 2 };

/// One person-year. Every outcome is missing when the person holds no
/// November job.
struct PanelRow {
    PersonId id = 0;
    int year = kBaseYear;
    bool employed = false;

    std::optional<IncomeRecord> income;

    std::optional<double> log_wage;      ///< log nominal gross hourly wage
    std::optional<double> earn_nov;      ///< nominal annual earnings of the November job
    std::optional<double> hours_daily;
    std::optional<double> hours_annual;
    std::optional<int> occ_rank;         ///< OccRank as int
    std::optional<PersonId> workplace_id;

    std::optional<bool> ui_benefit;
    std::optional<double> age;
    std::optional<int> n_children;
    std::optional<int> education;        ///< Education as int
    std::optional<bool> full_time;
    std::optional<bool> private_sector;

    /// Simulated bracket location, when available (1984 onwards).
    std::optional<BracketLocation> bracket;
};

/// Rows sorted by (id, year) with (id, year) unique. Immutable after construction.
class Panel {
public:
    Panel() = default;
    /// Sorts the rows; throws DataError naming the key on a duplicate (id, year).
    explicit Panel(std::vector<PanelRow> rows);

    const std::vector<PanelRow>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    /// Distinct ids in ascending order.
    std::vector<PersonId> ids() const;
    std::span<const PanelRow> person(PersonId id) const;
    const PanelRow* find(PersonId id, int year) const;

private:
    struct Span {
        PersonId id;
        std::size_t begin, end;
    };
    std::vector<PanelRow> rows_;
    std::vector<Span> index_;
};

/// Exact header names of the panel CSV, in canonical order.
const std::vector<std::string>& panel_columns();

struct LoadReport {
    std::size_t rows = 0;
    std::size_t persons = 0;
    std::map<std::string, std::size_t> missing;  ///< empty cells per known column
    std::vector<std::string> warnings;
};

struct LoadedPanel {
    Panel panel;
    LoadReport report;
};

/// Reads and validates a panel CSV. Errors name the offending data row.
LoadedPanel load_panel(const std::string& path);
void write_panel(const Panel& panel, const std::string& path);

/// Completes every id in `sample` with an employed = false row for each
/// missing year in 1981-1993. Rows of ids outside `sample` are dropped;
/// existing rows are copied unchanged.
Panel quasi_balance(const Panel& panel, std::span<const PersonId> sample);

/// Consumer price index by year. Converts nominal amounts to 1986 prices.
class Deflator {
public:
    /// Index growing by `annual` per year with 1986 = 100.
    static Deflator statutory(double annual = 1.02);
    /// CSV with columns year,index covering 1981-1993.
    static Deflator load(const std::string& path);

    explicit Deflator(std::map<int, double> index);

    /// P_year / P_1986.
    double relative(int year) const;
    double to_real(double nominal, int year) const { return nominal / relative(year); }
    const std::map<int, double>& index() const { return index_; }

private:
    std::map<int, double> index_;
};

}  // namespace dktax
