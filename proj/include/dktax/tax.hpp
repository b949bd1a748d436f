#pragma once

// Danish income tax law for 1986 and 1987: taxable bases, the 1987 joint
// middle-bracket transfer, liabilities, bracket locations and marginal rates.
//
// All functions are pure. Amounts are DKK per year in floating point with no
// intermediate rounding.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dktax {

/// One person-year of the income concepts the tax law uses.
struct IncomeRecord {
    double li = 0.0;  ///< labor income
    double ci = 0.0;  ///< capital income (interest income minus interest on debt)
    double d = 0.0;   ///< itemized deductions, >= 0

    bool married = false;
    double li_w = 0.0;  ///< spouse counterparts; only read when married
    double ci_w = 0.0;
    double d_w = 0.0;

    /// Municipal + county rate for this person; the system average when unset.
    std::optional<double> regional_rate;

    // Carried through untouched. No implemented base rule reads them.
    std::optional<double> personal_income;
    std::optional<double> stock_income;

    /// Throws InvalidArgument if a field is non-finite or a deduction negative.
    void validate() const;

    /// The spouse's own fields as an unmarried record.
    IncomeRecord spouse() const;
};

enum class BaseRule {
    Taxable,          ///< LI + CI - D
    LiPlusPosCi,      ///< LI + max(CI, 0)
    LiPlusCiOverK,    ///< LI + max(CI - K, 0)
};

enum class BracketLocation { None = 0, Bottom = 1, Middle = 2, Top = 3 };

std::string_view to_string(BracketLocation b);
BracketLocation parse_bracket(std::string_view s);

std::string_view to_string(BaseRule r);
BaseRule parse_base_rule(std::string_view s);

struct NationalBracket {
    BaseRule base = BaseRule::Taxable;
    double k = 0.0;  ///< capital-income threshold for LiPlusCiOverK
    double cutoff = 0.0;
    double rate = 0.0;
    bool joint = false;  ///< spouse's unused allowance transfers in
};

/// One year's tax law. Immutable once validated.
struct TaxSystem {
    std::string year;
    double regional_rate = 0.0;
    double regional_cutoff = 0.0;
    std::array<NationalBracket, 3> brackets{};  // bottom, middle, top
    /// Cap on the combined statutory marginal rate; enforced by lowering
    /// the top rate. Unset means no cap.
    std::optional<double> ceiling;

    const NationalBracket& bottom() const { return brackets[0]; }
    const NationalBracket& middle() const { return brackets[1]; }
    const NationalBracket& top() const { return brackets[2]; }

    /// Throws InvalidArgument unless cutoffs are strictly increasing and every
    /// rate lies in [0, 1).
    void validate() const;
};

TaxSystem system_1986();
TaxSystem system_1987();

/// Divides every DKK-denominated parameter by `factor`. Rates are unchanged.
TaxSystem deflate_system(const TaxSystem& sys, double factor = 1.02);

/// Parses the key/value parameter format (see README) and validates the result.
TaxSystem parse_tax_system(std::string_view text);
TaxSystem load_tax_system(const std::string& path);
std::string format_tax_system(const TaxSystem& sys);

struct TaxBases {
    double regional = 0.0;
    std::array<double, 3> national{};  // bottom, middle, top; no joint adjustment
};

double apply_base_rule(const NationalBracket& b, double li, double ci, double d);

TaxBases taxable_bases(const IncomeRecord& rec, const TaxSystem& sys);

/// Own middle base after receiving the spouse's unused middle allowance.
/// Identity unless the record is married and the middle bracket is joint.
double joint_middle_transfer(const IncomeRecord& rec, const TaxSystem& sys);

/// Liability split by component, after the joint transfer and the ceiling.
struct LiabilityParts {
    double regional = 0.0;
    std::array<double, 3> national{};
    double total() const { return regional + national[0] + national[1] + national[2]; }
};

LiabilityParts liability_parts(const IncomeRecord& rec, const TaxSystem& sys);
double tax_liability(const IncomeRecord& rec, const TaxSystem& sys);

/// Highest national bracket whose (joint-adjusted) base strictly exceeds its cutoff.
BracketLocation bracket_location(const IncomeRecord& rec, const TaxSystem& sys);

/// Top rate after the ceiling has been applied for the given regional rate.
double effective_top_rate(const TaxSystem& sys, double regional_rate);

/// Finite-difference marginal rate on labor income with a DKK 100 step.
double effective_mtr(const IncomeRecord& rec, const TaxSystem& sys);

/// Sum of statutory rates whose base is strictly above its cutoff, capped.
/// Agrees with effective_mtr except within DKK 100 below a kink.
double statutory_mtr(const IncomeRecord& rec, const TaxSystem& sys);

/// log(1 - mtr under sys87adj) - log(1 - mtr under sys86), income held fixed.
double mechanical_ntr_change(const IncomeRecord& rec, const TaxSystem& sys86,
                             const TaxSystem& sys87adj);

/// Marginal rate on labor income for a single person with CI = D = 0.
/// Jumps occur exactly at the cutoffs; at a cutoff the lower rate applies.
std::vector<std::pair<double, double>> mtr_schedule(const TaxSystem& sys,
                                                    const std::vector<double>& li_grid);

}  // namespace dktax
