#pragma once

// Outcome construction and identification diagnostics.

#include "dktax/design.hpp"
#include "dktax/panel.hpp"

#include <array>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dktax {

enum class Outcome {
    LogWage,
    LogEarnings,
    LogDailyHours,
    LogAnnualHours,
    Skilled,
    WhiteCollar,
    JjtCum,
};

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);
const std::vector<Outcome>& all_outcomes();
/// First year the outcome is observed (daily hours start in 1985).
int first_year(Outcome o);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Outcomes of one person-year. NaN marks a missing value.
struct OutcomeRow {
    PersonId id = 0;
    int year = 0;
    double log_wage = kMissing;         ///< log real hourly wage, 1986 prices
    double log_earnings = kMissing;     ///< log real November-job earnings
    double log_daily_hours = kMissing;
    double log_annual_hours = kMissing;
    double skilled = kMissing;          ///< occupation rank >= skilled
    double white_collar = kMissing;     ///< occupation rank >= low-level white collar
    double jjt = kMissing;              ///< job-to-job transition between t-1 and t
    double jjt_cum = kMissing;          ///< any transition in (1981, t]

    double get(Outcome o) const;
};

class OutcomeSet {
public:
    explicit OutcomeSet(std::vector<OutcomeRow> rows) : rows_(std::move(rows)) {}
    const std::vector<OutcomeRow>& rows() const { return rows_; }

private:
    std::vector<OutcomeRow> rows_;
};

/// One row per panel row, same order. A transition at t requires rows at t-1
/// and t with different workplaces, a strictly higher real hourly wage at t
/// and no UI benefits in either year. Outcomes are missing when not employed;
/// the cumulative transition indicator keeps running through such years.
OutcomeSet build_outcomes(const Panel& panel, const Deflator& deflator);

/// Gaussian-kernel bandwidth sigma * (4 / (3n))^(1/5), sigma = MAD / 0.6745
/// (sample sd when the MAD is 0). Throws InvalidArgument with fewer than
/// two distinct values.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian KDE at each grid point, bandwidth as above unless given.
std::vector<double> kernel_density(std::span<const double> values, std::span<const double> grid,
                                   double bandwidth = 0.0);

inline constexpr int kBunchingBins = 41;
inline constexpr double kBunchingWidth = 1000.0;
inline constexpr double kBunchingLo = -20500.0;
inline constexpr double kBunchingHi = 20500.0;

struct BunchingHistogram {
    std::array<double, kBunchingBins> lo{};  ///< lower edges; bin k is [lo[k], lo[k] + 1000)
    std::array<std::size_t, kBunchingBins> counts{};
    std::size_t in_range = 0;
    std::size_t out_of_range = 0;
};

/// Bins distances into [-20500, 20500) with width 1000.
BunchingHistogram bunching_histogram(std::span<const double> distances);

/// Real (1986 prices) distance between the joint-adjusted middle base and
/// the middle cutoff for every person-year of `ids` in 1987-1993 with an
/// income record. The nominal 1987 system is indexed to the deflator
/// afterwards.
std::vector<double> middle_bracket_distances(const Panel& panel, std::span<const PersonId> ids,
                                             const TaxSystem& sys87, const Deflator& deflator);

struct Arm {
    std::string name;
    std::vector<PersonId> ids;
};

struct SeriesPoint {
    std::string series;
    std::string arm;
    double x = 0.0;
    double y = 0.0;
};

/// Share employed by arm and year on a quasi-balanced panel.
std::vector<SeriesPoint> employment_series(const Panel& panel, std::span<const Arm> arms);

/// Mean 1986 log wage among those employed in t, minus its 1986 value.
std::vector<SeriesPoint> composition_series(const Panel& panel, std::span<const Arm> arms);

}  // namespace dktax
