#include "dktax/pipeline.hpp"

#include "dktax/csv.hpp"
#include "dktax/version.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace dktax {

namespace fs = std::filesystem;
using csv::fmt;

namespace {

std::string field(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string range_label(const LiRange& r) {
    return "low_" + fmt(static_cast<std::int64_t>(r.lo)) + "_" +
           fmt(static_cast<std::int64_t>(r.hi));
}

template <class F>
void parallel_for(std::size_t n, int threads, F f) {
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(nt);
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < nt; ++k)
        pool.emplace_back([&, k] {
            try {
                for (std::size_t i; (i = next++) < n;) f(i);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

// ---------------------------------------------------------------------------

void write_assignments(const std::string& path, std::span<const DesignAssignment> a) {
    csv::Writer w(path);
    w.row({"id", "status", "placebo_status", "group", "b86", "b87_counterfactual", "li86",
           "li_w86", "mech_change"});
    for (const auto& x : a)
        w.row({fmt(x.id), std::string(to_string(x.status)), std::string(to_string(x.placebo)),
               std::string(to_string(x.group)), std::string(to_string(x.b86)),
               std::string(to_string(x.b87_counterfactual)), fmt(x.li86), fmt(x.li_w86),
               fmt(x.mech_change)});
}

std::vector<DesignAssignment> load_assignments(const std::string& path) {
    csv::Reader r(path);
    const std::vector<std::string> names = {"id",  "status", "placebo_status", "group", "b86",
                                            "b87_counterfactual", "li86", "li_w86",
                                            "mech_change"};
    std::vector<std::size_t> pos;
    for (const auto& n : names) {
        auto c = r.column(n);
        if (!c) throw DataError(path + ": missing column '" + n + "'");
        pos.push_back(*c);
    }
    std::vector<DesignAssignment> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != r.header().size())
            throw DataError(path + ": wrong field count", r.row());
        try {
            DesignAssignment a;
            const auto id = csv::parse_int(f[pos[0]]);
            const auto li = csv::parse_double(f[pos[6]]);
            const auto lw = csv::parse_double(f[pos[7]]);
            if (!id || !li || !lw) throw DataError(path + ": malformed number", r.row());
            a.id = *id;
            a.status = parse_status(f[pos[1]]);
            a.placebo = parse_placebo(f[pos[2]]);
            a.group = parse_group(f[pos[3]]);
            a.b86 = parse_bracket(f[pos[4]]);
            a.b87_counterfactual = parse_bracket(f[pos[5]]);
            a.li86 = *li;
            a.li_w86 = *lw;
            a.mech_change = csv::parse_double(f[pos[8]]).value_or(
                std::numeric_limits<double>::quiet_NaN());
            out.push_back(a);
        } catch (const InvalidArgument& e) {
            throw DataError(path + ": " + e.what(), r.row());
        }
    }
    std::sort(out.begin(), out.end(),
              [](const DesignAssignment& a, const DesignAssignment& b) { return a.id < b.id; });
    return out;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.dgp.cpi_growth = cfg_.deflation_factor;
    cfg_.dgp.threads = cfg_.threads;
    stage("config", [&] {
        cfg_.validate();
        if (!cfg_.tax86_path.empty()) sys_.sys86 = load_tax_system(cfg_.tax86_path);
        if (!cfg_.tax87_path.empty()) sys_.sys87 = load_tax_system(cfg_.tax87_path);
        sys_.deflation_factor = cfg_.deflation_factor;
        sys_.deflator = cfg_.cpi_path.empty() ? Deflator::statutory(cfg_.deflation_factor)
                                              : Deflator::load(cfg_.cpi_path);
        std::error_code ec;
        fs::create_directories(cfg_.output_dir, ec);
        if (ec || !fs::is_directory(cfg_.output_dir))
            throw Error("cannot create output directory " + cfg_.output_dir);
    });
}

template <class F>
void Pipeline::stage(const std::string& name, F f) {
    try {
        f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::string Pipeline::out(const std::string& name) const {
    return (fs::path(cfg_.output_dir) / name).string();
}

void Pipeline::note(const std::string& file) {
    if (std::find(written_.begin(), written_.end(), file) == written_.end())
        written_.push_back(file);
}

const Panel& Pipeline::panel() {
    if (!panel_) {
        stage("load", [&] {
            const std::string path =
                cfg_.mode == Mode::File ? cfg_.panel_path : out("panel.csv");
            auto loaded = load_panel(path);
            for (const auto& w : loaded.report.warnings)
                std::cerr << "dktax: warning: " << path << ": " << w << "\n";
            panel_ = std::move(loaded.panel);
        });
    }
    return *panel_;
}

const std::vector<DesignAssignment>& Pipeline::assignments() {
    if (!assignments_)
        stage("load", [&] { assignments_ = load_assignments(out("assignments.csv")); });
    return *assignments_;
}

void Pipeline::generate() {
    stage("generate", [&] {
        panel_ = generate_panel(cfg_.dgp);
        write_panel(*panel_, out("panel.csv"));
        note("panel.csv");
    });
}

void Pipeline::assign() {
    const Panel& p = panel();
    stage("assign", [&] {
        const auto d = run_design(p, sys_, cfg_.groups);
        write_assignments(out("assignments.csv"), d.assignments);
        note("assignments.csv");

        csv::Writer bins(out("income_bins.csv"));
        bins.row({"bin_lo", "bin_hi", "treated", "control", "treated_share", "trimmed"});
        for (const auto& b : d.strat.bins)
            bins.row({fmt(b.lo), fmt(b.hi), fmt(static_cast<std::int64_t>(b.treated)),
                      fmt(static_cast<std::int64_t>(b.control)), fmt(b.treated_share()),
                      b.trimmed ? "1" : "0"});
        note("income_bins.csv");

        std::size_t n_t = 0, n_c = 0, n_pt = 0, n_pc = 0;
        for (const auto& a : d.assignments) {
            n_t += a.status == Status::Treated;
            n_c += a.status == Status::Control;
            n_pt += a.placebo == PlaceboStatus::Treated;
            n_pc += a.placebo == PlaceboStatus::Control;
        }
        auto n = [](std::size_t v) { return fmt(static_cast<std::int64_t>(v)); };
        csv::Writer s(out("design.csv"));
        s.row({"key", "value"});
        s.row({"sample", n(d.sample.size())});
        s.row({"treated", n(n_t)});
        s.row({"control", n(n_c)});
        s.row({"excluded", n(d.sample.size() - n_t - n_c)});
        s.row({"low", n(d.strat.n_low)});
        s.row({"medium", n(d.strat.n_medium)});
        s.row({"trimmed", n(d.strat.n_trimmed)});
        s.row({"placebo_q1", fmt(d.q1)});
        s.row({"placebo_q2", fmt(d.q2)});
        s.row({"placebo_treated", n(n_pt)});
        s.row({"placebo_control", n(n_pc)});
        s.row({"placebo_note", field(d.placebo_error)});
        note("design.csv");
        assignments_ = d.assignments;
    });
}

void Pipeline::balance() {
    const Panel& p = panel();
    const auto& a = assignments();
    stage("balance", [&] {
        csv::Writer w(out("balance.csv"));
        w.row({"table", "a", "b", "covariate", "mean_a", "mean_b", "sd_a", "sd_b", "n_a", "n_b",
               "normalized_difference"});
        auto emit = [&](const std::string& table, const std::string& na,
                        const std::vector<PersonId>& ia, const std::string& nb,
                        const std::vector<PersonId>& ib) {
            if (ia.empty() || ib.empty()) return;
            for (const auto& r : balance_table(p, ia, ib, standard_covariates()))
                w.row({table, na, nb, r.covariate, fmt(r.mean_t), fmt(r.mean_c), fmt(r.sd_t),
                       fmt(r.sd_c), fmt(static_cast<std::int64_t>(r.n_t)),
                       fmt(static_cast<std::int64_t>(r.n_c)), fmt(r.normalized_difference)});
        };
        const std::vector<ArmIds> arms = {low_arms(a), medium_arms(a)};
        for (const auto& g : arms)
            emit("summary", g.group + "_treated", g.treated, g.group + "_control", g.control);
        for (const auto& g : arms)
            for (int k = 0; k < 2; ++k) {
                const auto& ids = k == 0 ? g.treated : g.control;
                const std::string arm = g.group + (k == 0 ? "_treated" : "_control");
                emit("attrition", arm + "_employed_1993", employed_in(p, ids, kLastYear),
                     arm + "_employed_1986", employed_in(p, ids, kBaseYear));
            }
        const auto pl = placebo_arms(a);
        emit("placebo", "placebo_treated", pl.treated, "placebo_control", pl.control);
        note("balance.csv");
    });
}

void Pipeline::estimate() {
    const Panel& p = panel();
    const auto& a = assignments();
    stage("estimate", [&] {
        const OutcomeSet outcomes = build_outcomes(p, sys_.deflator);

        struct Task {
            ArmIds arms;
            Outcome outcome;
            EstimateOptions opt;
            std::vector<DesignAssignment> const* assign;
        };
        std::vector<Task> tasks;
        for (const auto& g : {low_arms(a), medium_arms(a), placebo_arms(a)}) {
            if (g.treated.empty() && g.control.empty()) continue;
            EstimateOptions opt;
            opt.elasticity = g.group != "placebo";
            for (Outcome o : cfg_.outcomes) tasks.push_back({g, o, opt, &a});
        }
        std::vector<std::vector<DesignAssignment>> robust;
        if (cfg_.robustness) {
            for (const auto& r : robustness_low_ranges(cfg_.groups.low)) {
                GroupBounds b = cfg_.groups;
                b.low = r;
                b.medium.reset();
                robust.push_back(stratify_income(a, b).assignments);
            }
            const auto ranges = robustness_low_ranges(cfg_.groups.low);
            for (std::size_t i = 0; i < robust.size(); ++i) {
                auto arms = low_arms(robust[i]);
                arms.group = range_label(ranges[i]);
                tasks.push_back({arms, Outcome::LogWage, {false, true, true}, &robust[i]});
            }
        }

        std::vector<GroupEstimate> results(tasks.size());
        parallel_for(tasks.size(), cfg_.threads, [&](std::size_t i) {
            const auto& t = tasks[i];
            results[i] = estimate_group(p, outcomes, *t.assign, t.arms, t.outcome, sys_, t.opt);
        });

        csv::Writer el(out("elasticities.csv"));
        el.row({"group", "outcome", "beta_tot", "se_tot", "first_stage", "first_stage_se",
                "f_stat", "strong_instrument", "reduced_form", "reduced_form_se", "mech_t",
                "mech_t_sd", "mech_c", "mech_c_sd", "epsilon", "epsilon_se", "n_obs",
                "n_clusters", "n_singletons", "status"});
        for (const auto& r : results) {
            const std::string name = "coef_" + r.group + "_" + std::string(to_string(r.outcome)) +
                                     ".csv";
            if (r.es || !r.es_error.empty()) {
                csv::Writer w(out(name));
                w.row({"year", "beta", "se", "ci_lo", "ci_hi"});
                if (r.es)
                    for (const auto& c : r.es->coefs)
                        w.row({fmt(c.year), fmt(c.beta), fmt(c.se), fmt(c.ci_lo), fmt(c.ci_hi)});
                note(name);
                if (!r.es_error.empty())
                    std::cerr << "dktax: warning: " << name << ": " << r.es_error << "\n";
            }
            std::vector<std::string> row = {r.group, std::string(to_string(r.outcome))};
            auto opt = [&](bool has, double v) { return has ? fmt(v) : std::string(); };
            const bool ht = r.tot.has_value(), he = r.el.has_value();
            const TotResult t = ht ? *r.tot : TotResult{};
            const ElasticityResult e = he ? *r.el : ElasticityResult{};
            for (auto v : {opt(ht, t.beta), opt(ht, t.se), opt(ht, t.first_stage),
                           opt(ht, t.first_stage_se), opt(ht, t.f_stat),
                           ht ? std::string(t.strong_instrument() ? "1" : "0") : std::string(),
                           opt(ht, t.reduced_form), opt(ht, t.reduced_form_se), opt(he, e.mech_t),
                           opt(he, e.mech_t_sd), opt(he, e.mech_c), opt(he, e.mech_c_sd),
                           opt(he, e.epsilon), opt(he, e.se),
                           ht ? fmt(static_cast<std::int64_t>(t.n_obs)) : std::string(),
                           ht ? fmt(static_cast<std::int64_t>(t.n_clusters)) : std::string(),
                           ht ? fmt(static_cast<std::int64_t>(t.n_singletons)) : std::string()})
                row.push_back(v);
            row.push_back(r.tot_error.empty() ? "ok" : field(r.tot_error));
            el.row(row);
        }
        note("elasticities.csv");
    });
}

void Pipeline::diagnose() {
    const Panel& p = panel();
    const auto& a = assignments();
    stage("diagnose", [&] {
        csv::Writer w(out("series.csv"));
        w.row({"series", "arm", "x", "y"});
        auto emit = [&](const std::vector<SeriesPoint>& pts) {
            for (const auto& s : pts) w.row({s.series, s.arm, fmt(s.x), fmt(s.y)});
        };

        std::vector<double> grid;
        for (double x = 50000; x <= 350000; x += 2000) grid.push_back(x);
        for (Status st : {Status::Treated, Status::Control}) {
            std::vector<double> li;
            for (const auto& x : a)
                if (x.status == st) li.push_back(x.li86);
            if (li.size() < 2 || std::all_of(li.begin(), li.end(),
                                             [&](double v) { return v == li.front(); }))
                continue;
            const auto f = kernel_density(li, grid);
            std::vector<SeriesPoint> pts;
            for (std::size_t i = 0; i < grid.size(); ++i)
                pts.push_back({"kde_li86", std::string(to_string(st)), grid[i], f[i]});
            emit(pts);
        }

        GroupBounds b = cfg_.groups;
        const auto strat = stratify_income(a, b);
        for (const auto& bin : strat.bins)
            w.row({"treated_share", "all", fmt(0.5 * (bin.lo + bin.hi)), fmt(bin.treated_share())});

        std::vector<double> sched;
        for (double x = 0; x <= 400000; x += 1000) sched.push_back(x);
        for (const auto& [name, sys] :
             {std::pair{"mtr_1986", sys_.sys86}, std::pair{"mtr_1987", sys_.sys87}})
            for (const auto& [x, m] : mtr_schedule(sys, sched))
                w.row({name, "single", fmt(x), fmt(m)});

        std::vector<Arm> arms;
        std::vector<PersonId> all;
        for (const auto& g : {low_arms(a), medium_arms(a)}) {
            arms.push_back({g.group + "_treated", g.treated});
            arms.push_back({g.group + "_control", g.control});
            all.insert(all.end(), g.treated.begin(), g.treated.end());
            all.insert(all.end(), g.control.begin(), g.control.end());
        }
        std::sort(all.begin(), all.end());
        const Panel q = quasi_balance(p, all);
        emit(employment_series(q, arms));
        emit(composition_series(p, arms));
        note("series.csv");

        auto low = low_arms(a);
        std::vector<PersonId> ids = low.treated;
        ids.insert(ids.end(), low.control.begin(), low.control.end());
        std::sort(ids.begin(), ids.end());
        const auto h = bunching_histogram(middle_bracket_distances(p, ids, sys_.sys87, sys_.deflator));
        csv::Writer bw(out("bunching.csv"));
        bw.row({"bin_lo", "bin_hi", "count"});
        for (std::size_t k = 0; k < h.counts.size(); ++k)
            bw.row({fmt(h.lo[k]), fmt(h.lo[k] + kBunchingWidth),
                    fmt(static_cast<std::int64_t>(h.counts[k]))});
        note("bunching.csv");
    });
}

void Pipeline::run_all() {
    try {
        if (cfg_.mode == Mode::Synthetic)
            generate();
        else
            panel();
        assign();
        balance();
        estimate();
        diagnose();
        stage("manifest", [&] {
            nlohmann::ordered_json m;
            m["tool"] = "dktax";
            m["version"] = kVersion;
            m["mode"] = cfg_.mode == Mode::Synthetic ? "synthetic" : "file";
            m["seed"] = cfg_.dgp.seed;
            m["config_hash"] = config_hash(cfg_);
            m["deflation_factor"] = cfg_.deflation_factor;
            m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                         std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
            std::ofstream(out("config.yaml"), std::ios::binary) << dump_pipeline_config(cfg_);
            note("config.yaml");
            auto files = written_;
            std::sort(files.begin(), files.end());
            m["outputs"] = files;
            m["status"] = "ok";
            std::ofstream(out("manifest.json"), std::ios::binary) << m.dump(2) << "\n";
            note("manifest.json");
        });
        fs::remove(out("FAILED.json"));
    } catch (const StageError& e) {
        write_failure(e);
        throw;
    }
}

void Pipeline::write_failure(const StageError& e) const {
    nlohmann::ordered_json f;
    f["status"] = "failed";
    f["stage"] = e.stage();
    f["message"] = e.what();
    f["partial_outputs"] = written_;
    std::ofstream(out("FAILED.json"), std::ios::binary) << f.dump(2) << "\n";
}

}  // namespace dktax
