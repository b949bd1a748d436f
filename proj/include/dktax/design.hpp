#pragma once

// Quasi-experimental design: sample selection, treatment assignment from
// actual vs counterfactual bracket locations, income-group stratification
// with overlap trimming, placebo assignment and covariate balance.

#include "dktax/panel.hpp"
#include "dktax/tax.hpp"

#include <span>
#include <string>
#include <vector>

namespace dktax {

enum class Status { Treated, Control, Excluded };
enum class PlaceboStatus { None, Treated, Control };
enum class IncomeGroup { Out, Low, Medium, Trimmed };

std::string_view to_string(Status s);
std::string_view to_string(PlaceboStatus s);
std::string_view to_string(IncomeGroup g);
Status parse_status(std::string_view s);
PlaceboStatus parse_placebo(std::string_view s);
IncomeGroup parse_group(std::string_view s);

struct DesignAssignment {
    PersonId id = 0;
    Status status = Status::Excluded;
    PlaceboStatus placebo = PlaceboStatus::None;
    IncomeGroup group = IncomeGroup::Out;
    BracketLocation b86 = BracketLocation::None;
    BracketLocation b87_counterfactual = BracketLocation::None;
    double li86 = 0.0;
    double li_w86 = 0.0;
    /// log(1 - mtr87adj) - log(1 - mtr86) at 1986 income.
    double mech_change = 0.0;
};

/// Ids whose 1986 row shows: age < 50, employed, married, wife LI > 0.
std::vector<PersonId> select_sample(const Panel& panel);

/// Classifies each sample id from its 1986 income: TREATED when BOTTOM under
/// sys86 and MIDDLE under sys87adj, CONTROL when BOTTOM under both.
/// Output is ordered by id.
std::vector<DesignAssignment> assign_treatment(const Panel& panel,
                                               std::span<const PersonId> sample,
                                               const TaxSystem& sys86,
                                               const TaxSystem& sys87adj);

struct LiRange {
    double lo = 0.0;  ///< inclusive
    double hi = 0.0;  ///< exclusive
    bool contains(double x) const { return x >= lo && x < hi; }
};

struct GroupBounds {
    LiRange low{120000.0, 160000.0};
    std::optional<LiRange> medium = LiRange{160000.0, 280000.0};
    double bin_width = 20000.0;
    double trim_lo = 0.1;  ///< keep bins whose treated share lies in [trim_lo, trim_hi]
    double trim_hi = 0.9;

    /// Throws InvalidArgument on empty or overlapping ranges.
    void validate() const;
};

/// The four alternative low-income groups: either boundary moved by 5,000.
std::vector<LiRange> robustness_low_ranges(const LiRange& base = {120000.0, 160000.0},
                                           double step = 5000.0);

struct IncomeBin {
    double lo = 0.0, hi = 0.0;
    std::size_t treated = 0, control = 0;
    double treated_share() const {
        const auto n = treated + control;
        return n ? static_cast<double>(treated) / static_cast<double>(n) : 0.0;
    }
    bool trimmed = false;
};

struct Stratification {
    std::vector<DesignAssignment> assignments;
    std::vector<IncomeBin> bins;  ///< 1986 LI histogram of treated + control
    std::size_t n_low = 0, n_medium = 0, n_trimmed = 0;
};

/// Labels treated and control ids LOW / MEDIUM by LI_86, then TRIMMED where
/// their LI bin has a treated share outside [trim_lo, trim_hi]. Excluded ids
/// are OUT.
Stratification stratify_income(std::vector<DesignAssignment> assignments,
                               const GroupBounds& bounds);

/// Hyndman-Fan type 8 (median-unbiased) sample quantile.
double quantile_type8(std::vector<double> values, double p);

struct PlaceboResult {
    std::vector<DesignAssignment> assignments;
    double q1 = 0.0, q2 = 0.0;
};

/// Among LOW controls: P_CONTROL below the first quartile of wife LI,
/// P_TREATED between the first quartile and the median.
PlaceboResult assign_placebo(std::vector<DesignAssignment> assignments);

struct BalanceRow {
    std::string covariate;
    double mean_t = 0.0, mean_c = 0.0;
    double sd_t = 0.0, sd_c = 0.0;
    std::size_t n_t = 0, n_c = 0;
    /// NaN when both arms have zero variance.
    double normalized_difference = 0.0;
    bool defined() const;
};

/// (mean_t - mean_c) / sqrt((sd_t^2 + sd_c^2) / 2).
double normalized_difference(double mean_t, double mean_c, double sd_t, double sd_c);

/// Sample means and (n - 1) standard deviations. Needs two values per arm.
BalanceRow balance_row(std::string name, std::span<const double> treated,
                       std::span<const double> control);

/// Named covariate read from a 1986 row; nullopt when missing.
struct Covariate {
    std::string name;
    std::optional<double> (*extract)(const PanelRow&);
};

/// The covariates of the summary-statistics tables, in table order.
const std::vector<Covariate>& standard_covariates();

/// One balance row per covariate comparing two id sets on 1986 values.
/// Covariates with fewer than two observed values in an arm give an undefined row.
std::vector<BalanceRow> balance_table(const Panel& panel, std::span<const PersonId> arm_t,
                                      std::span<const PersonId> arm_c,
                                      const std::vector<Covariate>& covariates);

/// Ids from `assignments` in `group` with the given status.
std::vector<PersonId> ids_where(std::span<const DesignAssignment> assignments,
                                IncomeGroup group, Status status);
std::vector<PersonId> ids_where(std::span<const DesignAssignment> assignments,
                                PlaceboStatus placebo);

/// Subset of `ids` with an employed row in `year`.
std::vector<PersonId> employed_in(const Panel& panel, std::span<const PersonId> ids, int year);

}  // namespace dktax
