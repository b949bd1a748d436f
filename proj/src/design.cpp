#include "dktax/design.hpp"

#include "dktax/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace dktax {

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Treated: return "TREATED";
        case Status::Control: return "CONTROL";
        case Status::Excluded: return "EXCLUDED";
    }
    return "EXCLUDED";
}

std::string_view to_string(PlaceboStatus s) {
    switch (s) {
        case PlaceboStatus::None: return "NONE";
        case PlaceboStatus::Treated: return "P_TREATED";
        case PlaceboStatus::Control: return "P_CONTROL";
    }
    return "NONE";
}

std::string_view to_string(IncomeGroup g) {
    switch (g) {
        case IncomeGroup::Out: return "OUT";
        case IncomeGroup::Low: return "LOW";
        case IncomeGroup::Medium: return "MEDIUM";
        case IncomeGroup::Trimmed: return "TRIMMED";
    }
    return "OUT";
}

Status parse_status(std::string_view s) {
    if (s == "TREATED") return Status::Treated;
    if (s == "CONTROL") return Status::Control;
    if (s == "EXCLUDED") return Status::Excluded;
    throw InvalidArgument("unknown status '" + std::string(s) + "'");
}

PlaceboStatus parse_placebo(std::string_view s) {
    if (s == "NONE") return PlaceboStatus::None;
    if (s == "P_TREATED") return PlaceboStatus::Treated;
    if (s == "P_CONTROL") return PlaceboStatus::Control;
    throw InvalidArgument("unknown placebo status '" + std::string(s) + "'");
}

IncomeGroup parse_group(std::string_view s) {
    if (s == "OUT") return IncomeGroup::Out;
    if (s == "LOW") return IncomeGroup::Low;
    if (s == "MEDIUM") return IncomeGroup::Medium;
    if (s == "TRIMMED") return IncomeGroup::Trimmed;
    throw InvalidArgument("unknown income group '" + std::string(s) + "'");
}

std::vector<PersonId> select_sample(const Panel& panel) {
    std::vector<PersonId> out;
    for (const auto& r : panel.rows()) {
        if (r.year != kBaseYear) continue;
        if (!r.age || !(*r.age < 50.0)) continue;
        if (!r.employed) continue;
        if (!r.income || !r.income->married) continue;
        if (!(r.income->li_w > 0.0)) continue;
        out.push_back(r.id);
    }
    return out;
}

std::vector<DesignAssignment> assign_treatment(const Panel& panel,
                                               std::span<const PersonId> sample,
                                               const TaxSystem& sys86,
                                               const TaxSystem& sys87adj) {
    std::vector<PersonId> ids(sample.begin(), sample.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::vector<DesignAssignment> out;
    out.reserve(ids.size());
    for (PersonId id : ids) {
        const auto* row = panel.find(id, kBaseYear);
        if (!row || !row->income)
            throw DataError("id " + std::to_string(id) + " has no 1986 income record");
        const auto& z = *row->income;
        DesignAssignment a;
        a.id = id;
        a.li86 = z.li;
        a.li_w86 = z.married ? z.li_w : 0.0;
        a.b86 = bracket_location(z, sys86);
        a.b87_counterfactual = bracket_location(z, sys87adj);
        if (a.b86 == BracketLocation::Bottom && a.b87_counterfactual == BracketLocation::Middle)
            a.status = Status::Treated;
        else if (a.b86 == BracketLocation::Bottom &&
                 a.b87_counterfactual == BracketLocation::Bottom)
            a.status = Status::Control;
        a.mech_change = a.status == Status::Excluded
                            ? std::numeric_limits<double>::quiet_NaN()
                            : mechanical_ntr_change(z, sys86, sys87adj);
        out.push_back(a);
    }
    return out;
}

void GroupBounds::validate() const {
    if (!(low.lo < low.hi)) throw InvalidArgument("low-income range is empty");
    if (medium) {
        if (!(medium->lo < medium->hi)) throw InvalidArgument("medium-income range is empty");
        if (low.lo < medium->hi && medium->lo < low.hi)
            throw InvalidArgument("low- and medium-income ranges overlap");
    }
    if (!(bin_width > 0.0)) throw InvalidArgument("bin width must be positive");
    if (!(trim_lo >= 0.0 && trim_lo <= trim_hi && trim_hi <= 1.0))
        throw InvalidArgument("trimming range must satisfy 0 <= lo <= hi <= 1");
}

std::vector<LiRange> robustness_low_ranges(const LiRange& base, double step) {
    return {{base.lo - step, base.hi},
            {base.lo + step, base.hi},
            {base.lo, base.hi - step},
            {base.lo, base.hi + step}};
}

Stratification stratify_income(std::vector<DesignAssignment> assignments,
                               const GroupBounds& bounds) {
    bounds.validate();
    Stratification out;

    auto bin_of = [&](double li) { return static_cast<long>(std::floor(li / bounds.bin_width)); };
    std::map<long, IncomeBin> bins;
    for (const auto& a : assignments) {
        if (a.status == Status::Excluded) continue;
        auto& b = bins[bin_of(a.li86)];
        (a.status == Status::Treated ? b.treated : b.control) += 1;
    }
    for (auto& [k, b] : bins) {
        b.lo = static_cast<double>(k) * bounds.bin_width;
        b.hi = b.lo + bounds.bin_width;
        const double s = b.treated_share();
        b.trimmed = s < bounds.trim_lo || s > bounds.trim_hi;
        out.bins.push_back(b);
    }

    for (auto& a : assignments) {
        a.group = IncomeGroup::Out;
        if (a.status == Status::Excluded) continue;
        if (bounds.low.contains(a.li86))
            a.group = IncomeGroup::Low;
        else if (bounds.medium && bounds.medium->contains(a.li86))
            a.group = IncomeGroup::Medium;
        if (a.group != IncomeGroup::Out && bins.at(bin_of(a.li86)).trimmed)
            a.group = IncomeGroup::Trimmed;
        switch (a.group) {
            case IncomeGroup::Low: ++out.n_low; break;
            case IncomeGroup::Medium: ++out.n_medium; break;
            case IncomeGroup::Trimmed: ++out.n_trimmed; break;
            case IncomeGroup::Out: break;
        }
    }
    out.assignments = std::move(assignments);
    return out;
}

double quantile_type8(std::vector<double> values, double p) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    const double h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;  // 1-based position
    if (h <= 1.0) return values.front();
    if (h >= n) return values.back();
    const auto j = static_cast<std::size_t>(std::floor(h));
    const double g = h - static_cast<double>(j);
    return values[j - 1] + g * (values[j] - values[j - 1]);
}

PlaceboResult assign_placebo(std::vector<DesignAssignment> assignments) {
    std::vector<double> wife;
    for (const auto& a : assignments)
        if (a.group == IncomeGroup::Low && a.status == Status::Control) wife.push_back(a.li_w86);
    if (wife.size() < 2) throw DataError("placebo assignment needs at least two low-income controls");
    if (std::all_of(wife.begin(), wife.end(), [&](double x) { return x == wife.front(); }))
        throw DataError("placebo assignment: wife labor income is degenerate (all equal)");

    PlaceboResult out;
    out.q1 = quantile_type8(wife, 0.25);
    out.q2 = quantile_type8(wife, 0.50);
    for (auto& a : assignments) {
        a.placebo = PlaceboStatus::None;
        if (a.group != IncomeGroup::Low || a.status != Status::Control) continue;
        if (a.li_w86 < out.q1)
            a.placebo = PlaceboStatus::Control;
        else if (a.li_w86 < out.q2)
            a.placebo = PlaceboStatus::Treated;
    }
    out.assignments = std::move(assignments);
    return out;
}

bool BalanceRow::defined() const { return std::isfinite(normalized_difference); }

double normalized_difference(double mean_t, double mean_c, double sd_t, double sd_c) {
    const double pooled = std::sqrt((sd_t * sd_t + sd_c * sd_c) / 2.0);
    if (pooled == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (mean_t - mean_c) / pooled;
}

namespace {

std::pair<double, double> mean_sd(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

BalanceRow balance_row(std::string name, std::span<const double> treated,
                       std::span<const double> control) {
    if (treated.size() < 2 || control.size() < 2)
        throw InvalidArgument("balance row '" + name + "' needs two observations per arm");
    BalanceRow r;
    r.covariate = std::move(name);
    std::tie(r.mean_t, r.sd_t) = mean_sd(treated);
    std::tie(r.mean_c, r.sd_c) = mean_sd(control);
    r.n_t = treated.size();
    r.n_c = control.size();
    r.normalized_difference = normalized_difference(r.mean_t, r.mean_c, r.sd_t, r.sd_c);
    return r;
}

namespace {

std::optional<double> pct(bool on) { return on ? 100.0 : 0.0; }

}  // namespace

const std::vector<Covariate>& standard_covariates() {
    static const std::vector<Covariate> cov = {
        {"Labor income",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income ? std::optional(r.income->li) : std::nullopt;
         }},
        {"Age", [](const PanelRow& r) { return r.age; }},
        {"Number of children",
         [](const PanelRow& r) -> std::optional<double> {
             return r.n_children ? std::optional<double>(*r.n_children) : std::nullopt;
         }},
        {"Low education (%)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.education ? pct(*r.education == 0) : std::nullopt;
         }},
        {"Middle education (%)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.education ? pct(*r.education == 1) : std::nullopt;
         }},
        {"High education (%)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.education ? pct(*r.education == 2) : std::nullopt;
         }},
        {"Full-time job (%)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.full_time ? pct(*r.full_time) : std::nullopt;
         }},
        {"Private-sector job (%)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.private_sector ? pct(*r.private_sector) : std::nullopt;
         }},
        {"Capital income",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income ? std::optional(r.income->ci) : std::nullopt;
         }},
        {"Deductions",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income ? std::optional(r.income->d) : std::nullopt;
         }},
        {"Capital income (wife)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income && r.income->married ? std::optional(r.income->ci_w)
                                                  : std::nullopt;
         }},
        {"Deductions (wife)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income && r.income->married ? std::optional(r.income->d_w)
                                                  : std::nullopt;
         }},
        {"Labor income (wife)",
         [](const PanelRow& r) -> std::optional<double> {
             return r.income && r.income->married ? std::optional(r.income->li_w)
                                                  : std::nullopt;
         }},
    };
    return cov;
}

std::vector<BalanceRow> balance_table(const Panel& panel, std::span<const PersonId> arm_t,
                                      std::span<const PersonId> arm_c,
                                      const std::vector<Covariate>& covariates) {
    auto collect = [&](std::span<const PersonId> ids, const Covariate& c) {
        std::vector<double> v;
        v.reserve(ids.size());
        for (PersonId id : ids)
            if (const auto* r = panel.find(id, kBaseYear))
                if (auto x = c.extract(*r)) v.push_back(*x);
        return v;
    };
    std::vector<BalanceRow> out;
    for (const auto& c : covariates) {
        const auto t = collect(arm_t, c);
        const auto k = collect(arm_c, c);
        if (t.size() < 2 || k.size() < 2) {
            BalanceRow r;
            r.covariate = c.name;
            r.mean_t = r.mean_c = r.sd_t = r.sd_c = r.normalized_difference =
                std::numeric_limits<double>::quiet_NaN();
            r.n_t = t.size();
            r.n_c = k.size();
            out.push_back(std::move(r));
            continue;
        }
        out.push_back(balance_row(c.name, t, k));
    }
    return out;
}

std::vector<PersonId> ids_where(std::span<const DesignAssignment> assignments,
                                IncomeGroup group, Status status) {
    std::vector<PersonId> out;
    for (const auto& a : assignments)
        if (a.group == group && a.status == status) out.push_back(a.id);
    return out;
}

std::vector<PersonId> ids_where(std::span<const DesignAssignment> assignments,
                                PlaceboStatus placebo) {
    std::vector<PersonId> out;
    for (const auto& a : assignments)
        if (a.placebo == placebo) out.push_back(a.id);
    return out;
}

std::vector<PersonId> employed_in(const Panel& panel, std::span<const PersonId> ids, int year) {
    std::vector<PersonId> out;
    for (PersonId id : ids)
        if (const auto* r = panel.find(id, year); r && r->employed) out.push_back(id);
    return out;
}

}  // namespace dktax
