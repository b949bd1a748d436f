#pragma once

// Glue between the panel, the design and the estimators: builds arms and
// estimation samples and runs one (group, outcome) estimation.

#include "dktax/design.hpp"
#include "dktax/diagnose.hpp"
#include "dktax/estimate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dktax {

/// Statutory systems plus the price index used to move between years.
struct Systems {
    TaxSystem sys86 = system_1986();
    TaxSystem sys87 = system_1987();
    double deflation_factor = 1.02;
    Deflator deflator = Deflator::statutory(1.02);

    /// sys87 with cutoffs divided by deflation_factor.
    TaxSystem sys87adj() const { return deflate_system(sys87, deflation_factor); }
    /// Nominal system in force in `year`; cutoffs indexed to the deflator.
    TaxSystem nominal(int year) const;
};

struct DesignResult {
    std::vector<PersonId> sample;
    Stratification strat;
    std::optional<double> q1, q2;  ///< placebo quartiles; unset if placebo failed
    std::string placebo_error;
    std::vector<DesignAssignment> assignments;  ///< final labels incl. placebo
};

DesignResult run_design(const Panel& panel, const Systems& sys, const GroupBounds& bounds);

struct ArmIds {
    std::string group;
    std::vector<PersonId> treated;
    std::vector<PersonId> control;
};

ArmIds low_arms(std::span<const DesignAssignment> a);
ArmIds medium_arms(std::span<const DesignAssignment> a);
ArmIds placebo_arms(std::span<const DesignAssignment> a);

/// Middle- or top-bracket indicator; the panel's bracket column when
/// present, otherwise computed from the income record.
std::optional<double> middle_or_top(const PanelRow& row, const Systems& sys);

std::vector<EsObs> event_obs(const Panel& panel, const OutcomeSet& outcomes, Outcome outcome,
                             const ArmIds& arms);
std::vector<IvObs> iv_obs(const Panel& panel, const OutcomeSet& outcomes, Outcome outcome,
                          const ArmIds& arms, const Systems& sys);

struct GroupEstimate {
    std::string group;
    Outcome outcome = Outcome::LogWage;
    std::optional<EventStudyResult> es;
    std::string es_error;
    std::optional<TotResult> tot;
    std::optional<ElasticityResult> el;
    std::string tot_error;
};

struct EstimateOptions {
    bool event_study = true;
    bool tot = true;
    bool elasticity = true;  ///< off when the arms share one mechanical change
};

GroupEstimate estimate_group(const Panel& panel, const OutcomeSet& outcomes,
                             std::span<const DesignAssignment> assignments, const ArmIds& arms,
                             Outcome outcome, const Systems& sys, EstimateOptions opt = {});

}  // namespace dktax
