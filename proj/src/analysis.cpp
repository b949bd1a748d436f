#include "dktax/analysis.hpp"

#include "dktax/error.hpp"

#include <cmath>

namespace dktax {

TaxSystem Systems::nominal(int year) const {
    const double rel = deflator.relative(year);
    if (year < kReformYear) return deflate_system(sys86, 1.0 / rel);
    return deflate_system(sys87, deflator.relative(kReformYear) / rel);
}

DesignResult run_design(const Panel& panel, const Systems& sys, const GroupBounds& bounds) {
    DesignResult out;
    out.sample = select_sample(panel);
    auto assigned = assign_treatment(panel, out.sample, sys.sys86, sys.sys87adj());
    out.strat = stratify_income(std::move(assigned), bounds);
    try {
        auto p = assign_placebo(out.strat.assignments);
        out.q1 = p.q1;
        out.q2 = p.q2;
        out.assignments = std::move(p.assignments);
    } catch (const DataError& e) {
        out.placebo_error = e.what();
        out.assignments = out.strat.assignments;
    }
    return out;
}

ArmIds low_arms(std::span<const DesignAssignment> a) {
    return {"low", ids_where(a, IncomeGroup::Low, Status::Treated),
            ids_where(a, IncomeGroup::Low, Status::Control)};
}

ArmIds medium_arms(std::span<const DesignAssignment> a) {
    return {"medium", ids_where(a, IncomeGroup::Medium, Status::Treated),
            ids_where(a, IncomeGroup::Medium, Status::Control)};
}

ArmIds placebo_arms(std::span<const DesignAssignment> a) {
    return {"placebo", ids_where(a, PlaceboStatus::Treated), ids_where(a, PlaceboStatus::Control)};
}

std::optional<double> middle_or_top(const PanelRow& row, const Systems& sys) {
    std::optional<BracketLocation> b = row.bracket;
    if (!b && row.income) b = bracket_location(*row.income, sys.nominal(row.year));
    if (!b) return std::nullopt;
    return *b == BracketLocation::Middle || *b == BracketLocation::Top ? 1.0 : 0.0;
}

namespace {

template <class F>
void for_arm_rows(const Panel& panel, const ArmIds& arms, F f) {
    const PanelRow* first = panel.rows().data();
    for (int arm = 0; arm < 2; ++arm)
        for (PersonId id : arm == 0 ? arms.treated : arms.control)
            for (const auto& r : panel.person(id))
                f(r, static_cast<std::size_t>(&r - first), arm == 0);
}

}  // namespace

std::vector<EsObs> event_obs(const Panel& panel, const OutcomeSet& outcomes, Outcome outcome,
                             const ArmIds& arms) {
    std::vector<EsObs> obs;
    const int start = first_year(outcome);
    for_arm_rows(panel, arms, [&](const PanelRow& r, std::size_t i, bool treated) {
        if (r.year < start) return;
        const double y = outcomes.rows()[i].get(outcome);
        if (std::isfinite(y)) obs.push_back({r.id, r.year, y, treated});
    });
    return obs;
}

std::vector<IvObs> iv_obs(const Panel& panel, const OutcomeSet& outcomes, Outcome outcome,
                          const ArmIds& arms, const Systems& sys) {
    std::vector<IvObs> obs;
    const int start = std::max(1984, first_year(outcome));
    for_arm_rows(panel, arms, [&](const PanelRow& r, std::size_t i, bool treated) {
        if (r.year < start) return;
        const double y = outcomes.rows()[i].get(outcome);
        if (!std::isfinite(y)) return;
        const auto m = middle_or_top(r, sys);
        if (m) obs.push_back({r.id, r.year, y, *m, treated});
    });
    return obs;
}

GroupEstimate estimate_group(const Panel& panel, const OutcomeSet& outcomes,
                             std::span<const DesignAssignment> assignments, const ArmIds& arms,
                             Outcome outcome, const Systems& sys, EstimateOptions opt) {
    GroupEstimate g;
    g.group = arms.group;
    g.outcome = outcome;
    if (opt.event_study) {
        try {
            g.es = event_study(event_obs(panel, outcomes, outcome, arms));
        } catch (const Error& e) {
            g.es_error = e.what();
        }
    }
    if (opt.tot) {
        try {
            g.tot = tot_iv(iv_obs(panel, outcomes, outcome, arms, sys));
            if (!opt.elasticity) return g;
            std::vector<double> mt, mc;
            std::size_t k = 0;
            // Assignments are ordered by id; so are the arm id lists.
            auto collect = [&](const std::vector<PersonId>& ids, std::vector<double>& out) {
                k = 0;
                for (PersonId id : ids) {
                    while (k < assignments.size() && assignments[k].id < id) ++k;
                    if (k < assignments.size() && assignments[k].id == id)
                        out.push_back(assignments[k].mech_change);
                }
            };
            collect(arms.treated, mt);
            collect(arms.control, mc);
            g.el = elasticity(*g.tot, mt, mc);
        } catch (const Error& e) {
            g.tot_error = e.what();
        }
    }
    return g;
}

}  // namespace dktax
