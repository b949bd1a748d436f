#include <gtest/gtest.h>

#include "dktax/analysis.hpp"
#include "dktax/synth.hpp"

#include <cmath>

using namespace dktax;

namespace {

const Panel& synthetic() {
    static const Panel p = [] {
        DgpConfig c;
        c.n_individuals = 4000;
        c.seed = 5;
        return generate_panel(c);
    }();
    return p;
}

}  // namespace

TEST(Systems, NominalCutoffsFollowTheIndex) {
    Systems s;
    EXPECT_DOUBLE_EQ(s.nominal(1986).brackets[1].cutoff, s.sys86.brackets[1].cutoff);
    EXPECT_NEAR(s.nominal(1984).brackets[1].cutoff, s.sys86.brackets[1].cutoff / 1.0404, 1e-8);
    EXPECT_DOUBLE_EQ(s.nominal(1987).brackets[1].cutoff, s.sys87.brackets[1].cutoff);
    EXPECT_NEAR(s.nominal(1990).brackets[2].cutoff, s.sys87.brackets[2].cutoff * std::pow(1.02, 3),
                1e-6);
    EXPECT_NEAR(s.sys87adj().brackets[0].cutoff, s.sys87.brackets[0].cutoff / 1.02, 1e-9);
}

TEST(Analysis, MiddleOrTopPrefersBracketColumn) {
    Systems s;
    PanelRow r;
    r.year = 1988;
    EXPECT_FALSE(middle_or_top(r, s));
    IncomeRecord z;
    z.li = 400000;
    r.income = z;
    EXPECT_EQ(*middle_or_top(r, s), 1.0);
    r.bracket = BracketLocation::Bottom;
    EXPECT_EQ(*middle_or_top(r, s), 0.0);
}

TEST(Analysis, ColumnAgreesWithRecomputedBracket) {
    Systems s;
    std::size_t n = 0;
    for (const auto& r : synthetic().rows()) {
        if (!r.bracket || !r.income || r.year < 1984) continue;
        PanelRow bare = r;
        bare.bracket.reset();
        ASSERT_EQ(*middle_or_top(r, s), *middle_or_top(bare, s)) << r.id << " " << r.year;
        ++n;
    }
    EXPECT_GT(n, 10000u);
}

TEST(Analysis, DesignInvariantsOnSyntheticPanel) {
    Systems s;
    const auto d = run_design(synthetic(), s, GroupBounds{});
    EXPECT_TRUE(d.placebo_error.empty());
    ASSERT_TRUE(d.q1 && d.q2);
    EXPECT_LT(*d.q1, *d.q2);
    for (const auto& a : d.assignments) {
        if (a.status != Status::Excluded) EXPECT_EQ(a.b86, BracketLocation::Bottom);
        if (a.status == Status::Treated) EXPECT_EQ(a.b87_counterfactual, BracketLocation::Middle);
        if (a.status == Status::Control) EXPECT_EQ(a.b87_counterfactual, BracketLocation::Bottom);
        if (a.placebo != PlaceboStatus::None) {
            EXPECT_EQ(a.status, Status::Control);
            EXPECT_EQ(a.group, IncomeGroup::Low);
        }
        if (a.status == Status::Excluded) EXPECT_TRUE(std::isnan(a.mech_change));
    }
    const auto low = low_arms(d.assignments);
    EXPECT_FALSE(low.treated.empty());
    EXPECT_FALSE(low.control.empty());
}

TEST(Analysis, EstimationSamplesStartAtOutcomeYear) {
    Systems s;
    const auto d = run_design(synthetic(), s, GroupBounds{});
    const auto arms = low_arms(d.assignments);
    const auto oc = build_outcomes(synthetic(), s.deflator);
    for (const auto& o : event_obs(synthetic(), oc, Outcome::LogDailyHours, arms))
        ASSERT_GE(o.year, 1985);
    int first = 9999;
    for (const auto& o : event_obs(synthetic(), oc, Outcome::LogWage, arms))
        first = std::min(first, o.year);
    EXPECT_EQ(first, 1981);
    for (const auto& o : iv_obs(synthetic(), oc, Outcome::LogWage, arms, s))
        ASSERT_GE(o.year, 1984);
}

TEST(Analysis, EstimateGroupOptions) {
    Systems s;
    const auto d = run_design(synthetic(), s, GroupBounds{});
    const auto oc = build_outcomes(synthetic(), s.deflator);
    const auto full = estimate_group(synthetic(), oc, d.assignments, low_arms(d.assignments),
                                     Outcome::LogWage, s);
    ASSERT_TRUE(full.es && full.tot && full.el) << full.es_error << full.tot_error;
    EXPECT_NEAR(full.el->epsilon * (full.el->mech_t - full.el->mech_c), full.tot->beta, 1e-12);

    EstimateOptions opt;
    opt.event_study = false;
    opt.elasticity = false;
    const auto part = estimate_group(synthetic(), oc, d.assignments, low_arms(d.assignments),
                                     Outcome::LogWage, s, opt);
    EXPECT_FALSE(part.es);
    ASSERT_TRUE(part.tot);
    EXPECT_FALSE(part.el);
    EXPECT_DOUBLE_EQ(part.tot->beta, full.tot->beta);
}

TEST(Analysis, EstimationErrorsAreCaptured) {
    Systems s;
    const auto oc = build_outcomes(synthetic(), s.deflator);
    ArmIds empty{"none", {}, {}};
    const auto g = estimate_group(synthetic(), oc, {}, empty, Outcome::LogWage, s);
    EXPECT_FALSE(g.es);
    EXPECT_FALSE(g.tot);
    EXPECT_FALSE(g.es_error.empty());
    EXPECT_FALSE(g.tot_error.empty());
}
