#include "dktax/diagnose.hpp"

#include "dktax/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace dktax {

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::LogWage: return "log_wage";
        case Outcome::LogEarnings: return "log_earnings";
        case Outcome::LogDailyHours: return "log_daily_hours";
        case Outcome::LogAnnualHours: return "log_annual_hours";
        case Outcome::Skilled: return "skilled";
        case Outcome::WhiteCollar: return "white_collar";
        case Outcome::JjtCum: return "jjt_cum";
    }
    return "log_wage";
}

const std::vector<Outcome>& all_outcomes() {
    static const std::vector<Outcome> all = {Outcome::LogWage,        Outcome::LogEarnings,
                                             Outcome::LogDailyHours,  Outcome::LogAnnualHours,
                                             Outcome::Skilled,        Outcome::WhiteCollar,
                                             Outcome::JjtCum};
    return all;
}

Outcome parse_outcome(std::string_view s) {
    for (Outcome o : all_outcomes())
        if (to_string(o) == s) return o;
    throw InvalidArgument("unknown outcome '" + std::string(s) + "'");
}

int first_year(Outcome o) { return o == Outcome::LogDailyHours ? 1985 : kFirstYear; }

double OutcomeRow::get(Outcome o) const {
    switch (o) {
        case Outcome::LogWage: return log_wage;
        case Outcome::LogEarnings: return log_earnings;
        case Outcome::LogDailyHours: return log_daily_hours;
        case Outcome::LogAnnualHours: return log_annual_hours;
        case Outcome::Skilled: return skilled;
        case Outcome::WhiteCollar: return white_collar;
        case Outcome::JjtCum: return jjt_cum;
    }
    return kMissing;
}

namespace {

double log_or_missing(const std::optional<double>& v, double shift = 0.0) {
    return v && *v > 0.0 ? std::log(*v) - shift : kMissing;
}

}  // namespace

OutcomeSet build_outcomes(const Panel& panel, const Deflator& deflator) {
    std::vector<OutcomeRow> out;
    out.reserve(panel.size());
    const auto& rows = panel.rows();
    bool any_jjt = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const PanelRow* prev = i > 0 && rows[i - 1].id == r.id && rows[i - 1].year == r.year - 1
                                   ? &rows[i - 1]
                                   : nullptr;
        if (i == 0 || rows[i - 1].id != r.id) any_jjt = false;

        const double lrel = std::log(deflator.relative(r.year));
        OutcomeRow o;
        o.id = r.id;
        o.year = r.year;

        double jjt = kMissing;
        if (prev && prev->employed && r.employed && prev->workplace_id && r.workplace_id &&
            prev->log_wage && r.log_wage) {
            const double w_prev = *prev->log_wage - std::log(deflator.relative(prev->year));
            const double w_now = *r.log_wage - lrel;
            const bool no_ui = prev->ui_benefit.has_value() && !*prev->ui_benefit &&
                               r.ui_benefit.has_value() && !*r.ui_benefit;
            jjt = (*prev->workplace_id != *r.workplace_id && w_now > w_prev && no_ui) ? 1.0 : 0.0;
        }
        if (jjt == 1.0) any_jjt = true;

        if (r.employed) {
            o.log_wage = r.log_wage ? *r.log_wage - lrel : kMissing;
            o.log_earnings = log_or_missing(r.earn_nov, lrel);
            o.log_daily_hours = log_or_missing(r.hours_daily);
            o.log_annual_hours = log_or_missing(r.hours_annual);
            if (r.occ_rank) {
                o.skilled = *r.occ_rank >= static_cast<int>(OccRank::Skilled) ? 1.0 : 0.0;
                o.white_collar =
                    *r.occ_rank >= static_cast<int>(OccRank::LowWhiteCollar) ? 1.0 : 0.0;
            }
            o.jjt = r.year > kFirstYear && prev ? jjt : kMissing;
            o.jjt_cum = any_jjt ? 1.0 : 0.0;
        }
        out.push_back(o);
    }
    return OutcomeSet(std::move(out));
}

double silverman_bandwidth(std::span<const double> values) {
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    if (x.size() < 2 || x.front() == x.back())
        throw InvalidArgument("kernel density needs at least two distinct values");
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double med = median(x);
    std::vector<double> dev(x.size());
    std::transform(x.begin(), x.end(), dev.begin(), [&](double v) { return std::abs(v - med); });
    double sigma = median(dev) / 0.6745;
    const double n = static_cast<double>(x.size());
    if (sigma == 0.0) {
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        sigma = std::sqrt(ss / (n - 1.0));
    }
    return sigma * std::pow(4.0 / (3.0 * n), 0.2);
}

std::vector<double> kernel_density(std::span<const double> values, std::span<const double> grid,
                                   double bandwidth) {
    const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(values);
    const double norm =
        1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out;
    out.reserve(grid.size());
    for (double g : grid) {
        double s = 0.0;
        for (double v : values) {
            const double z = (g - v) / h;
            s += std::exp(-0.5 * z * z);
        }
        out.push_back(s * norm);
    }
    return out;
}

BunchingHistogram bunching_histogram(std::span<const double> distances) {
    BunchingHistogram h;
    for (int k = 0; k < kBunchingBins; ++k) h.lo[static_cast<std::size_t>(k)] = kBunchingLo + k * kBunchingWidth;
    for (double d : distances) {
        if (!(d >= kBunchingLo && d < kBunchingHi)) {
            ++h.out_of_range;
            continue;
        }
        auto k = static_cast<std::size_t>(std::floor((d - kBunchingLo) / kBunchingWidth));
        k = std::min<std::size_t>(k, kBunchingBins - 1);
        ++h.counts[k];
        ++h.in_range;
    }
    return h;
}

std::vector<double> middle_bracket_distances(const Panel& panel, std::span<const PersonId> ids,
                                             const TaxSystem& sys87, const Deflator& deflator) {
    std::vector<double> out;
    const double rel87 = deflator.relative(kReformYear);
    for (PersonId id : ids) {
        for (const auto& r : panel.person(id)) {
            if (r.year < kReformYear || !r.income) continue;
            const double rel = deflator.relative(r.year);
            const TaxSystem sys = deflate_system(sys87, rel87 / rel);
            const double base = joint_middle_transfer(*r.income, sys);
            out.push_back((base - sys.middle().cutoff) / rel);
        }
    }
    return out;
}

std::vector<SeriesPoint> employment_series(const Panel& panel, std::span<const Arm> arms) {
    std::vector<SeriesPoint> out;
    for (const auto& arm : arms) {
        std::map<int, std::pair<std::size_t, std::size_t>> acc;  // year -> (employed, rows)
        for (PersonId id : arm.ids)
            for (const auto& r : panel.person(id)) {
                auto& a = acc[r.year];
                a.first += r.employed ? 1 : 0;
                a.second += 1;
            }
        for (const auto& [year, a] : acc)
            out.push_back({"employment", arm.name, static_cast<double>(year),
                           static_cast<double>(a.first) / static_cast<double>(a.second)});
    }
    return out;
}

std::vector<SeriesPoint> composition_series(const Panel& panel, std::span<const Arm> arms) {
    std::vector<SeriesPoint> out;
    for (const auto& arm : arms) {
        std::map<int, std::pair<double, std::size_t>> acc;
        for (PersonId id : arm.ids) {
            const auto* base = panel.find(id, kBaseYear);
            if (!base || !base->log_wage) continue;
            for (const auto& r : panel.person(id))
                if (r.employed) {
                    auto& a = acc[r.year];
                    a.first += *base->log_wage;
                    a.second += 1;
                }
        }
        const auto it = acc.find(kBaseYear);
        if (it == acc.end() || it->second.second == 0) continue;
        const double ref = it->second.first / static_cast<double>(it->second.second);
        for (const auto& [year, a] : acc)
            out.push_back({"composition", arm.name, static_cast<double>(year),
                           year == kBaseYear ? 0.0 : a.first / static_cast<double>(a.second) - ref});
    }
    return out;
}

}  // namespace dktax
