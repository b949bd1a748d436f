#include <gtest/gtest.h>

#include "dktax/design.hpp"
#include "dktax/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace dktax;

namespace {

PanelRow row86(PersonId id, double age, bool employed, double li, double ci, double d,
               double li_w) {
    PanelRow r;
    r.id = id;
    r.year = kBaseYear;
    r.employed = employed;
    if (employed) r.log_wage = 4.5;
    r.age = age;
    IncomeRecord z;
    z.li = li;
    z.ci = ci;
    z.d = d;
    z.married = true;
    z.li_w = li_w;
    r.income = z;
    return r;
}

const TaxSystem& sys86() {
    static const TaxSystem s = system_1986();
    return s;
}
const TaxSystem& sys87adj() {
    static const TaxSystem s = deflate_system(system_1987(), 1.02);
    return s;
}

DesignAssignment assign_one(const PanelRow& r) {
    const Panel p({r});
    const PersonId ids[] = {r.id};
    return assign_treatment(p, ids, sys86(), sys87adj()).at(0);
}

DesignAssignment make(PersonId id, Status s, double li, double li_w = 50000.0) {
    DesignAssignment a;
    a.id = id;
    a.status = s;
    a.li86 = li;
    a.li_w86 = li_w;
    return a;
}

}  // namespace

TEST(SelectSample, Restrictions) {
    PanelRow single = row86(4, 30, true, 150000, 0, 0, 0);
    single.income->married = false;
    const Panel p({row86(1, 36, true, 150000, 0, 0, 80000), row86(2, 36, true, 150000, 0, 0, 0),
                   row86(3, 50, true, 150000, 0, 0, 80000), single,
                   row86(5, 49.9, false, 150000, 0, 0, 80000),
                   row86(6, 49.9, true, 150000, 0, 0, 1)});
    EXPECT_EQ(select_sample(p), (std::vector<PersonId>{1, 6}));
}

TEST(AssignTreatment, PushedIntoMiddleBracket) {
    const auto a = assign_one(row86(1, 36, true, 145000, -30000, 10000, 120000));
    EXPECT_EQ(a.b86, BracketLocation::Bottom);
    EXPECT_EQ(a.b87_counterfactual, BracketLocation::Middle);
    EXPECT_EQ(a.status, Status::Treated);
    EXPECT_LT(a.mech_change, 0.0);
}

TEST(AssignTreatment, LargeSpouseAllowanceStaysBottom) {
    const auto a = assign_one(row86(1, 36, true, 145000, -30000, 10000, 60000));
    EXPECT_EQ(a.b87_counterfactual, BracketLocation::Bottom);
    EXPECT_EQ(a.status, Status::Control);
}

TEST(AssignTreatment, MiddleIn1986IsExcluded) {
    const auto a = assign_one(row86(1, 36, true, 190000, -30000, 10000, 60000));
    EXPECT_EQ(a.b86, BracketLocation::Middle);
    EXPECT_EQ(a.status, Status::Excluded);
}

TEST(AssignTreatment, MissingIncomeIsAnError) {
    PanelRow r = row86(1, 36, true, 1, 0, 0, 1);
    r.income.reset();
    const Panel p({r});
    const PersonId ids[] = {1};
    EXPECT_THROW(assign_treatment(p, ids, sys86(), sys87adj()), DataError);
}

TEST(AssignTreatment, InvariantsAndOrderIndependence) {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> li(std::log(150000.0), 0.25);
    std::lognormal_distribution<double> liw(std::log(90000.0), 0.6);
    std::normal_distribution<double> ci(-40000.0, 20000.0);
    std::vector<PanelRow> rows;
    std::vector<PersonId> ids;
    for (PersonId id = 1; id <= 2000; ++id) {
        rows.push_back(row86(id, 40, true, li(rng), ci(rng), 8000, liw(rng)));
        ids.push_back(id);
    }
    const Panel p(rows);
    const auto base = assign_treatment(p, ids, sys86(), sys87adj());

    auto shuffled_rows = rows;
    std::shuffle(shuffled_rows.begin(), shuffled_rows.end(), rng);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto again = assign_treatment(Panel(shuffled_rows), ids, sys86(), sys87adj());
    ASSERT_EQ(base.size(), again.size());

    std::size_t treated = 0, control = 0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const auto& a = base[i];
        EXPECT_EQ(a.id, again[i].id);
        EXPECT_EQ(a.status, again[i].status);
        if (a.status != Status::Excluded) EXPECT_EQ(a.b86, BracketLocation::Bottom);
        if (a.status == Status::Treated) {
            EXPECT_EQ(a.b87_counterfactual, BracketLocation::Middle);
            ++treated;
        }
        if (a.status == Status::Control) {
            EXPECT_EQ(a.b87_counterfactual, BracketLocation::Bottom);
            ++control;
        }
    }
    EXPECT_GT(treated, 100u);
    EXPECT_GT(control, 100u);
}

TEST(AssignTreatment, WifeIncomeMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> li(110000.0, 170000.0), ci(-60000.0, 0.0),
        liw(0.0, 200000.0), bump(0.0, 50000.0);
    auto rank = [](Status s) { return s == Status::Treated ? 1 : 0; };
    for (int k = 0; k < 3000; ++k) {
        const double l = li(rng), c = ci(rng), w = liw(rng);
        const auto lo = assign_one(row86(1, 40, true, l, c, 5000, w));
        if (lo.status == Status::Excluded) continue;
        const auto hi = assign_one(row86(1, 40, true, l, c, 5000, w + bump(rng)));
        EXPECT_NE(hi.status, Status::Excluded);
        EXPECT_GE(rank(hi.status), rank(lo.status)) << l << " " << c << " " << w;
    }
}

TEST(Stratify, GroupsByLaborIncome) {
    std::vector<DesignAssignment> as;
    // Balanced bins so nothing is trimmed.
    as.push_back(make(1, Status::Treated, 148596));
    as.push_back(make(2, Status::Control, 142386));
    as.push_back(make(3, Status::Treated, 185462));
    as.push_back(make(4, Status::Control, 181000));
    as.push_back(make(5, Status::Treated, 300000));
    as.push_back(make(6, Status::Control, 301000));
    as.push_back(make(7, Status::Excluded, 150000));
    const auto s = stratify_income(as, GroupBounds{});
    EXPECT_EQ(s.assignments[0].group, IncomeGroup::Low);
    EXPECT_EQ(s.assignments[1].group, IncomeGroup::Low);
    EXPECT_EQ(s.assignments[2].group, IncomeGroup::Medium);
    EXPECT_EQ(s.assignments[4].group, IncomeGroup::Out);
    EXPECT_EQ(s.assignments[6].group, IncomeGroup::Out);
    EXPECT_EQ(s.n_low, 2u);
    EXPECT_EQ(s.n_medium, 2u);
    EXPECT_EQ(s.n_trimmed, 0u);
}

TEST(Stratify, LowTreatedShareIsTrimmed) {
    std::vector<DesignAssignment> as;
    as.push_back(make(1, Status::Treated, 141000));
    for (PersonId id = 2; id <= 20; ++id) as.push_back(make(id, Status::Control, 142000));
    as.push_back(make(21, Status::Treated, 125000));
    as.push_back(make(22, Status::Control, 126000));
    const auto s = stratify_income(as, GroupBounds{});
    const auto bin = std::find_if(s.bins.begin(), s.bins.end(),
                                  [](const IncomeBin& b) { return b.lo == 140000.0; });
    ASSERT_NE(bin, s.bins.end());
    EXPECT_DOUBLE_EQ(bin->treated_share(), 0.05);
    EXPECT_TRUE(bin->trimmed);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(s.assignments[i].group, IncomeGroup::Trimmed);
    EXPECT_EQ(s.assignments[20].group, IncomeGroup::Low);
    EXPECT_EQ(s.n_trimmed, 20u);
    EXPECT_EQ(s.n_low, 2u);
}

TEST(Stratify, OverlappingBoundsRejected) {
    GroupBounds b;
    b.medium = LiRange{150000.0, 280000.0};
    EXPECT_THROW(stratify_income({}, b), InvalidArgument);
    b.medium.reset();
    EXPECT_NO_THROW(stratify_income({}, b));
}

TEST(Stratify, RobustnessRanges) {
    const auto r = robustness_low_ranges();
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r[0].lo, 115000.0);
    EXPECT_EQ(r[1].lo, 125000.0);
    EXPECT_EQ(r[2].hi, 155000.0);
    EXPECT_EQ(r[3].hi, 165000.0);
}

TEST(Quantile, Type8) {
    // Reference values from R quantile(x, type = 8).
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_NEAR(quantile_type8(x, 0.25), 2.916666666666667, 1e-12);
    EXPECT_NEAR(quantile_type8(x, 0.5), 5.5, 1e-12);
    EXPECT_EQ(quantile_type8(x, 0.0), 1.0);
    EXPECT_EQ(quantile_type8(x, 1.0), 10.0);
    EXPECT_EQ(quantile_type8({4.0}, 0.3), 4.0);
    EXPECT_THROW(quantile_type8({}, 0.5), InvalidArgument);
}

TEST(Placebo, QuartileAssignment) {
    std::vector<DesignAssignment> as;
    for (PersonId id = 1; id <= 10; ++id) {
        auto a = make(id, Status::Control, 140000, 10000.0 * static_cast<double>(id));
        a.group = IncomeGroup::Low;
        as.push_back(a);
    }
    auto t = make(11, Status::Treated, 140000, 10000.0);
    t.group = IncomeGroup::Low;
    as.push_back(t);
    auto m = make(12, Status::Control, 200000, 10000.0);
    m.group = IncomeGroup::Medium;
    as.push_back(m);

    const auto p = assign_placebo(as);
    EXPECT_NEAR(p.q1, 29166.666666666668, 1e-6);
    EXPECT_NEAR(p.q2, 55000.0, 1e-9);
    EXPECT_EQ(p.assignments[0].placebo, PlaceboStatus::Control);   // 10000
    EXPECT_EQ(p.assignments[1].placebo, PlaceboStatus::Control);   // 20000
    EXPECT_EQ(p.assignments[2].placebo, PlaceboStatus::Treated);   // 30000
    EXPECT_EQ(p.assignments[4].placebo, PlaceboStatus::Treated);   // 50000
    EXPECT_EQ(p.assignments[5].placebo, PlaceboStatus::None);      // 60000
    EXPECT_EQ(p.assignments[10].placebo, PlaceboStatus::None);
    EXPECT_EQ(p.assignments[11].placebo, PlaceboStatus::None);
}

TEST(Placebo, DegenerateWifeIncome) {
    std::vector<DesignAssignment> as;
    for (PersonId id = 1; id <= 5; ++id) {
        auto a = make(id, Status::Control, 140000, 70000.0);
        a.group = IncomeGroup::Low;
        as.push_back(a);
    }
    EXPECT_THROW(assign_placebo(as), DataError);
}

TEST(Balance, NormalizedDifferenceExamples) {
    EXPECT_NEAR(normalized_difference(148596, 142386, 8202, 10625), 0.654, 0.001);
    EXPECT_NEAR(normalized_difference(119978, 83925, 26352, 37209), 1.12, 0.01);
    EXPECT_EQ(normalized_difference(5, 5, 1, 2), 0.0);
    EXPECT_TRUE(std::isnan(normalized_difference(5, 4, 0, 0)));
    EXPECT_TRUE(std::isfinite(normalized_difference(5, 4, 0, 1)));
}

TEST(Balance, RowMatchesFormula) {
    const std::vector<double> t = {1, 2, 3, 4}, c = {2, 2, 5};
    const auto r = balance_row("x", t, c);
    EXPECT_DOUBLE_EQ(r.mean_t, 2.5);
    EXPECT_DOUBLE_EQ(r.mean_c, 3.0);
    EXPECT_NEAR(r.sd_t, std::sqrt(5.0 / 3.0), 1e-14);
    EXPECT_NEAR(r.sd_c, std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(r.normalized_difference, -0.5 / std::sqrt((5.0 / 3.0 + 3.0) / 2.0), 1e-14);
    EXPECT_THROW(balance_row("x", t, std::vector<double>{1.0}), InvalidArgument);
    const std::vector<double> k = {7, 7};
    EXPECT_FALSE(balance_row("k", k, k).defined());
}

TEST(Balance, AffineAndPermutationInvariance) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> t(30), c(40);
        for (auto& v : t) v = n(rng) + 0.3;
        for (auto& v : c) v = n(rng);
        const double a = u(rng), b = std::abs(u(rng)) + 0.1;
        const double nd = balance_row("x", t, c).normalized_difference;
        auto t2 = t, c2 = c;
        for (auto& v : t2) v = a + b * v;
        for (auto& v : c2) v = a + b * v;
        EXPECT_NEAR(balance_row("x", t2, c2).normalized_difference, nd, 1e-10);
        std::shuffle(t.begin(), t.end(), rng);
        std::shuffle(c.begin(), c.end(), rng);
        EXPECT_NEAR(balance_row("x", t, c).normalized_difference, nd, 1e-12);
    }
}

TEST(Balance, TableReadsBaseYearRows) {
    std::vector<PanelRow> rows;
    for (PersonId id = 1; id <= 6; ++id) {
        auto r = row86(id, 30 + static_cast<double>(id), true, 140000 + 1000.0 * id, 0, 0, 50000);
        r.education = static_cast<int>(id % 3);
        r.n_children = static_cast<int>(id % 2);
        r.full_time = true;
        r.private_sector = id < 4;
        rows.push_back(r);
    }
    const Panel p(rows);
    const PersonId t[] = {1, 2, 3}, c[] = {4, 5, 6};
    const auto table = balance_table(p, t, c, standard_covariates());
    ASSERT_EQ(table.size(), standard_covariates().size());
    EXPECT_EQ(table[0].covariate, "Labor income");
    EXPECT_DOUBLE_EQ(table[0].mean_t, 142000.0);
    EXPECT_DOUBLE_EQ(table[1].mean_c, 35.0);
    EXPECT_NEAR(table[3].mean_t, 100.0 / 3.0, 1e-12);
    EXPECT_FALSE(table.back().defined());  // wife LI constant in both arms
}

TEST(Ids, Selectors) {
    std::vector<DesignAssignment> as = {make(1, Status::Treated, 1), make(2, Status::Control, 1)};
    as[0].group = as[1].group = IncomeGroup::Low;
    as[1].placebo = PlaceboStatus::Control;
    EXPECT_EQ(ids_where(as, IncomeGroup::Low, Status::Treated), std::vector<PersonId>{1});
    EXPECT_EQ(ids_where(as, PlaceboStatus::Control), std::vector<PersonId>{2});
    const Panel p({row86(1, 30, true, 1, 0, 0, 1), row86(2, 30, false, 1, 0, 0, 1)});
    const PersonId ids[] = {1, 2, 3};
    EXPECT_EQ(employed_in(p, ids, kBaseYear), std::vector<PersonId>{1});
}

TEST(Enums, RoundTrip) {
    for (auto s : {Status::Treated, Status::Control, Status::Excluded})
        EXPECT_EQ(parse_status(to_string(s)), s);
    for (auto s : {PlaceboStatus::None, PlaceboStatus::Treated, PlaceboStatus::Control})
        EXPECT_EQ(parse_placebo(to_string(s)), s);
    for (auto g : {IncomeGroup::Out, IncomeGroup::Low, IncomeGroup::Medium, IncomeGroup::Trimmed})
        EXPECT_EQ(parse_group(to_string(g)), g);
    EXPECT_THROW(parse_group("HIGH"), InvalidArgument);
}

TEST(Balance, MissingCovariateGivesUndefinedRow) {
    const Panel p({row86(1, 30, true, 1, 0, 0, 1), row86(2, 31, true, 2, 0, 0, 1),
                   row86(3, 32, true, 3, 0, 0, 1), row86(4, 33, true, 4, 0, 0, 1)});
    const PersonId t[] = {1, 2}, c[] = {3, 4};
    const auto table = balance_table(p, t, c, standard_covariates());
    EXPECT_TRUE(table[0].defined());
    EXPECT_FALSE(table[2].defined());
    EXPECT_EQ(table[2].n_t, 0u);
}
