#include <gtest/gtest.h>

#include "dktax/csv.hpp"
#include "dktax/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dktax;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dktax_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PipelineConfig small(const fs::path& out, int threads = 1) {
    PipelineConfig c;
    c.dgp.n_individuals = 3000;
    c.dgp.seed = 11;
    c.output_dir = out.string();
    c.threads = threads;
    return c;
}

std::size_t data_rows(const fs::path& p) {
    csv::Reader r(p.string());
    std::vector<std::string> f;
    std::size_t n = 0;
    while (r.next(f)) ++n;
    return n;
}

}  // namespace

TEST(Config, EmptyDocumentKeepsDefaults) {
    const auto c = parse_pipeline_config("");
    EXPECT_EQ(c.mode, Mode::Synthetic);
    EXPECT_DOUBLE_EQ(c.deflation_factor, 1.02);
    EXPECT_EQ(c.outcomes.size(), 7u);
    EXPECT_EQ(dump_pipeline_config(c), dump_pipeline_config(PipelineConfig{}));
}

TEST(Config, ReadsNestedKeys) {
    const auto c = parse_pipeline_config(R"(
mode: file
seed: 9
threads: 3
panel: {path: p.csv}
deflation_factor: 1.06
groups: {low: [100000, 150000], medium: null, trim: [0.05, 0.95]}
outcomes: [log_wage, jjt_cum]
synthetic: {elasticity: 0.2, own_li: {median: 140000, sd_log: 0.3}}
)");
    EXPECT_EQ(c.mode, Mode::File);
    EXPECT_EQ(c.dgp.seed, 9u);
    EXPECT_EQ(c.threads, 3);
    EXPECT_EQ(c.dgp.threads, 3);
    EXPECT_EQ(c.panel_path, "p.csv");
    EXPECT_DOUBLE_EQ(c.dgp.cpi_growth, 1.06);
    EXPECT_DOUBLE_EQ(c.groups.low.lo, 100000);
    EXPECT_FALSE(c.groups.medium);
    EXPECT_DOUBLE_EQ(c.groups.trim_lo, 0.05);
    ASSERT_EQ(c.outcomes.size(), 2u);
    EXPECT_EQ(c.outcomes[1], Outcome::JjtCum);
    EXPECT_DOUBLE_EQ(c.dgp.gamma, 0.05);
    EXPECT_NEAR(std::exp(c.dgp.own_li.mean_log), 140000, 1e-6);
    EXPECT_DOUBLE_EQ(c.dgp.own_li.sd_log, 0.3);
}

TEST(Config, Rejects) {
    const char* bad[] = {
        "foo: 1",
        "groups: {lowest: [1, 2]}",
        "synthetic: {elasticity: 0.4, gamma: 0.1}",
        "seed: abc",
        "mode: batch",
        "groups: {low: [1]}",
        "groups: {low: [100000, 200000], medium: [150000, 250000]}",
        "deflation_factor: -1",
        "mode: file",
        "cpi: {path: c.csv}",
        "outcomes: [wages]",
        "threads: 0",
        "[unclosed",
        "synthetic: {own_li: {median: 0}}",
    };
    for (const char* y : bad) EXPECT_THROW(parse_pipeline_config(y), ConfigError) << y;
}

TEST(Config, MissingFileNamesPath) {
    try {
        load_pipeline_config("/nonexistent/dktax.yaml");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dktax.yaml"), std::string::npos);
    }
}

TEST(Config, DumpIsAFixedPoint) {
    PipelineConfig c;
    c.dgp.seed = 77;
    c.deflation_factor = 1.06;
    c.groups.medium.reset();
    c.outcomes = {Outcome::Skilled};
    c.dgp.gamma = 0.0125;
    c.dgp.wife_li = LogNormalLaw{std::log(81234.5), 0.6};
    const auto once = dump_pipeline_config(parse_pipeline_config(dump_pipeline_config(c)));
    EXPECT_EQ(once, dump_pipeline_config(parse_pipeline_config(once)));
    EXPECT_EQ(parse_pipeline_config(once).dgp.seed, 77u);
    EXPECT_FALSE(parse_pipeline_config(once).groups.medium);
}

TEST(Config, HashIgnoresThreadsAndOutputDir) {
    PipelineConfig a, b;
    b.threads = 8;
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.dgp.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, GroupSpec) {
    PipelineConfig c;
    apply_group_spec(c, "100000:150000,150000:250000");
    EXPECT_DOUBLE_EQ(c.groups.low.hi, 150000);
    ASSERT_TRUE(c.groups.medium);
    EXPECT_DOUBLE_EQ(c.groups.medium->hi, 250000);
    apply_group_spec(c, "110000:130000");
    EXPECT_FALSE(c.groups.medium);
    for (const char* s : {"", "1", "a:b", "200:100", "1:10,5:20"})
        EXPECT_THROW(apply_group_spec(c, s), ConfigError) << s;
    EXPECT_DOUBLE_EQ(c.groups.low.lo, 110000);
}

TEST(Pipeline, RunAllWritesManifestAndIsReproducible) {
    const auto d1 = scratch("run1"), d3 = scratch("run3");
    Pipeline(small(d1, 1)).run_all();
    Pipeline(small(d3, 3)).run_all();

    const std::string manifest = slurp(d1 / "manifest.json");
    EXPECT_NE(manifest.find("\"status\": \"ok\""), std::string::npos);
    EXPECT_NE(manifest.find("\"seed\": 11"), std::string::npos);
    EXPECT_FALSE(fs::exists(d1 / "FAILED.json"));

    for (const auto& e : fs::directory_iterator(d1)) {
        const auto name = e.path().filename();
        if (name == "config.yaml") continue;
        EXPECT_EQ(slurp(e.path()), slurp(d3 / name)) << name;
        if (name == "manifest.json") continue;
        EXPECT_NE(manifest.find(name.string()), std::string::npos) << name;
    }
    // three groups by seven outcomes, then four regrouped low-income rows
    EXPECT_EQ(data_rows(d1 / "elasticities.csv"), 3u * 7u + 4u);
    EXPECT_EQ(data_rows(d1 / "bunching.csv"), 41u);
    EXPECT_TRUE(fs::exists(d1 / "coef_low_log_wage.csv"));
}

TEST(Pipeline, StagesMatchRunAll) {
    const auto all = scratch("all"), staged = scratch("staged");
    Pipeline(small(all)).run_all();
    const auto cfg = small(staged);
    Pipeline(cfg).generate();
    Pipeline(cfg).assign();
    Pipeline(cfg).balance();
    Pipeline(cfg).estimate();
    Pipeline(cfg).diagnose();
    for (const char* f : {"panel.csv", "assignments.csv", "balance.csv", "elasticities.csv",
                          "series.csv", "bunching.csv", "design.csv"})
        EXPECT_EQ(slurp(all / f), slurp(staged / f)) << f;
}

TEST(Pipeline, RobustnessCanBeTurnedOff) {
    const auto d = scratch("norobust");
    auto c = small(d);
    c.robustness = false;
    c.groups.medium.reset();
    c.outcomes = {Outcome::LogWage};
    Pipeline(c).run_all();
    EXPECT_EQ(data_rows(d / "elasticities.csv"), 2u);
}

TEST(Pipeline, MissingPanelNamesStageAndPath) {
    const auto d = scratch("missing");
    PipelineConfig c;
    c.mode = Mode::File;
    c.panel_path = (d / "absent.csv").string();
    c.output_dir = d.string();
    Pipeline p(c);
    try {
        p.run_all();
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
        EXPECT_NE(std::string(e.what()).find("absent.csv"), std::string::npos);
    }
    const auto failed = slurp(d / "FAILED.json");
    EXPECT_NE(failed.find("\"stage\": \"load\""), std::string::npos);
    EXPECT_FALSE(fs::exists(d / "manifest.json"));
}

TEST(Pipeline, StageWithoutInputsFails) {
    const auto d = scratch("noinput");
    EXPECT_THROW(Pipeline(small(d)).estimate(), StageError);
}

TEST(Pipeline, AssignmentsRoundTrip) {
    const auto d = scratch("assign");
    Pipeline p(small(d));
    p.generate();
    p.assign();
    const auto back = load_assignments(p.out("assignments.csv"));
    const auto& orig = p.assignments();
    ASSERT_EQ(back.size(), orig.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].id, orig[i].id);
        EXPECT_EQ(back[i].status, orig[i].status);
        EXPECT_EQ(back[i].placebo, orig[i].placebo);
        EXPECT_EQ(back[i].group, orig[i].group);
        EXPECT_EQ(back[i].li86, orig[i].li86);
        EXPECT_TRUE(back[i].mech_change == orig[i].mech_change ||
                    (std::isnan(back[i].mech_change) && std::isnan(orig[i].mech_change)));
    }
}

TEST(Pipeline, MalformedAssignmentsRejected) {
    const auto d = scratch("badassign");
    fs::create_directories(d);
    std::ofstream(d / "a.csv") << "id,status\n1,TREATED\n";
    EXPECT_THROW(load_assignments((d / "a.csv").string()), DataError);
    std::ofstream(d / "b.csv")
        << "id,status,placebo_status,group,b86,b87_counterfactual,li86,li_w86,mech_change\n"
        << "1,MAYBE,NONE,LOW,BOTTOM,MIDDLE,1,1,\n";
    EXPECT_THROW(load_assignments((d / "b.csv").string()), DataError);
}
