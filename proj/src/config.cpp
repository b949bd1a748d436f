#include "dktax/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include "dktax/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dktax {

namespace {

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key))
            throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) +
                              "'");
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
    if (!node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("config key '" + (where.empty() ? "" : where + ".") + key +
                          "' has the wrong type");
    }
}

LiRange read_range(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence() || n.size() != 2)
        throw ConfigError("config key '" + key + "' must be a two-element list");
    return {n[0].as<double>(), n[1].as<double>()};
}

void read_normal(const YAML::Node& n, const char* key, NormalLaw& law) {
    if (!n[key]) return;
    const std::string where = std::string("synthetic.") + key;
    check_keys(n[key], where, {"mean", "sd"});
    read(n[key], "mean", law.mean, where);
    read(n[key], "sd", law.sd, where);
}

void read_lognormal(const YAML::Node& n, const char* key, LogNormalLaw& law) {
    if (!n[key]) return;
    const std::string where = std::string("synthetic.") + key;
    check_keys(n[key], where, {"median", "sd_log"});
    if (n[key]["median"]) {
        const double m = n[key]["median"].as<double>();
        if (!(m > 0.0)) throw ConfigError(where + ".median must be positive");
        law.mean_log = std::log(m);
    }
    read(n[key], "sd_log", law.sd_log, where);
}

void read_synthetic(const YAML::Node& s, DgpConfig& d) {
    const std::string w = "synthetic";
    check_keys(s, w,
               {"n_individuals", "elasticity", "gamma", "own_li", "ci_slope", "ci_noise_sd",
                "deductions", "wife_li", "wife_ci", "wife_d", "married_share",
                "wife_no_income_share", "income_shock_sd", "wife_income_shock_sd",
                "individual_effect_sd", "wage_growth", "year_effect_sd", "measurement_noise_sd",
                "annual_hours", "hours_noise_sd", "days_worked", "attrition_hazard",
                "employment_exit_hazard", "promotion_rate", "jjt_rate", "event_loading"});
    if (s["elasticity"] && s["gamma"])
        throw ConfigError("set either synthetic.elasticity or synthetic.gamma, not both");
    read(s, "n_individuals", d.n_individuals, w);
    if (s["elasticity"]) d.gamma = gamma_for_elasticity(s["elasticity"].as<double>());
    read(s, "gamma", d.gamma, w);
    read_lognormal(s, "own_li", d.own_li);
    read(s, "ci_slope", d.ci_slope, w);
    read(s, "ci_noise_sd", d.ci_noise_sd, w);
    read_normal(s, "deductions", d.deductions);
    read_lognormal(s, "wife_li", d.wife_li);
    read_normal(s, "wife_ci", d.wife_ci);
    read_normal(s, "wife_d", d.wife_d);
    read(s, "married_share", d.married_share, w);
    read(s, "wife_no_income_share", d.wife_no_income_share, w);
    read(s, "income_shock_sd", d.income_shock_sd, w);
    read(s, "wife_income_shock_sd", d.wife_income_shock_sd, w);
    read(s, "individual_effect_sd", d.individual_effect_sd, w);
    read(s, "wage_growth", d.wage_growth, w);
    read(s, "year_effect_sd", d.year_effect_sd, w);
    read(s, "measurement_noise_sd", d.measurement_noise_sd, w);
    read_normal(s, "annual_hours", d.annual_hours);
    read(s, "hours_noise_sd", d.hours_noise_sd, w);
    read(s, "days_worked", d.days_worked, w);
    read(s, "attrition_hazard", d.attrition_hazard, w);
    read(s, "employment_exit_hazard", d.employment_exit_hazard, w);
    read(s, "promotion_rate", d.promotion_rate, w);
    read(s, "jjt_rate", d.jjt_rate, w);
    read(s, "event_loading", d.event_loading, w);
}

std::string num(double x) { return csv::fmt(x); }

std::string median(double mean_log) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", std::exp(mean_log));
    return buf;
}

}  // namespace

void PipelineConfig::validate() const {
    if (mode == Mode::File && panel_path.empty())
        throw ConfigError("file mode needs panel.path");
    if (mode == Mode::Synthetic && !cpi_path.empty())
        throw ConfigError("cpi.path applies to file mode only; the synthetic panel is priced by "
                          "deflation_factor");
    if (!(deflation_factor > 0.0)) throw ConfigError("deflation_factor must be positive");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (outcomes.empty()) throw ConfigError("outcomes list is empty");
    if (output_dir.empty()) throw ConfigError("output_dir is empty");
    try {
        groups.validate();
        dgp.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

PipelineConfig parse_pipeline_config(const std::string& yaml_text) {
    PipelineConfig cfg;
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed YAML: ") + e.what());
    }
    if (root.IsNull()) return cfg;
    try {
        check_keys(root, "",
                   {"mode", "seed", "threads", "output_dir", "panel", "cpi", "tax",
                    "deflation_factor", "groups", "outcomes", "synthetic"});
        if (root["mode"]) {
            const auto m = root["mode"].as<std::string>();
            if (m == "synthetic")
                cfg.mode = Mode::Synthetic;
            else if (m == "file")
                cfg.mode = Mode::File;
            else
                throw ConfigError("mode must be 'synthetic' or 'file', got '" + m + "'");
        }
        read(root, "seed", cfg.dgp.seed, "");
        read(root, "threads", cfg.threads, "");
        read(root, "output_dir", cfg.output_dir, "");
        read(root, "deflation_factor", cfg.deflation_factor, "");
        if (root["panel"]) {
            check_keys(root["panel"], "panel", {"path"});
            read(root["panel"], "path", cfg.panel_path, "panel");
        }
        if (root["cpi"]) {
            check_keys(root["cpi"], "cpi", {"path"});
            read(root["cpi"], "path", cfg.cpi_path, "cpi");
        }
        if (root["tax"]) {
            check_keys(root["tax"], "tax", {"system_1986", "system_1987"});
            read(root["tax"], "system_1986", cfg.tax86_path, "tax");
            read(root["tax"], "system_1987", cfg.tax87_path, "tax");
        }
        if (const auto g = root["groups"]) {
            check_keys(g, "groups", {"low", "medium", "bin_width", "trim", "robustness"});
            if (g["low"]) cfg.groups.low = read_range(g["low"], "groups.low");
            if (g["medium"]) {
                if (g["medium"].IsNull())
                    cfg.groups.medium.reset();
                else
                    cfg.groups.medium = read_range(g["medium"], "groups.medium");
            }
            read(g, "bin_width", cfg.groups.bin_width, "groups");
            if (g["trim"]) {
                const auto t = read_range(g["trim"], "groups.trim");
                cfg.groups.trim_lo = t.lo;
                cfg.groups.trim_hi = t.hi;
            }
            read(g, "robustness", cfg.robustness, "groups");
        }
        if (const auto o = root["outcomes"]) {
            if (!o.IsSequence()) throw ConfigError("outcomes must be a list");
            cfg.outcomes.clear();
            for (const auto& v : o) cfg.outcomes.push_back(parse_outcome(v.as<std::string>()));
        }
        if (root["synthetic"]) read_synthetic(root["synthetic"], cfg.dgp);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    cfg.dgp.cpi_growth = cfg.deflation_factor;
    cfg.dgp.threads = cfg.threads;
    cfg.validate();
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_pipeline_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string dump_pipeline_config(const PipelineConfig& c) {
    YAML::Emitter e;
    auto range = [&](const LiRange& r) {
        e << YAML::Flow << YAML::BeginSeq << num(r.lo) << num(r.hi) << YAML::EndSeq;
    };
    auto normal = [&](const char* k, const NormalLaw& l) {
        e << YAML::Key << k << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "mean"
          << YAML::Value << num(l.mean) << YAML::Key << "sd" << YAML::Value << num(l.sd) << YAML::EndMap;
    };
    auto lognormal = [&](const char* k, const LogNormalLaw& l) {
        e << YAML::Key << k << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key
          << "median" << YAML::Value << median(l.mean_log) << YAML::Key << "sd_log"
          << YAML::Value << num(l.sd_log) << YAML::EndMap;
    };
    const auto& d = c.dgp;
    e << YAML::BeginMap;
    e << YAML::Key << "mode" << YAML::Value << (c.mode == Mode::Synthetic ? "synthetic" : "file");
    e << YAML::Key << "seed" << YAML::Value << d.seed;
    e << YAML::Key << "threads" << YAML::Value << c.threads;
    e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    e << YAML::Key << "panel" << YAML::Value << YAML::BeginMap << YAML::Key << "path"
      << YAML::Value << c.panel_path << YAML::EndMap;
    e << YAML::Key << "cpi" << YAML::Value << YAML::BeginMap << YAML::Key << "path"
      << YAML::Value << c.cpi_path << YAML::EndMap;
    e << YAML::Key << "tax" << YAML::Value << YAML::BeginMap << YAML::Key << "system_1986"
      << YAML::Value << c.tax86_path << YAML::Key << "system_1987" << YAML::Value
      << c.tax87_path << YAML::EndMap;
    e << YAML::Key << "deflation_factor" << YAML::Value << num(c.deflation_factor);
    e << YAML::Key << "groups" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "low" << YAML::Value;
    range(c.groups.low);
    e << YAML::Key << "medium" << YAML::Value;
    if (c.groups.medium)
        range(*c.groups.medium);
    else
        e << YAML::Null;
    e << YAML::Key << "bin_width" << YAML::Value << num(c.groups.bin_width);
    e << YAML::Key << "trim" << YAML::Value;
    range({c.groups.trim_lo, c.groups.trim_hi});
    e << YAML::Key << "robustness" << YAML::Value << c.robustness;
    e << YAML::EndMap;
    e << YAML::Key << "outcomes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Outcome o : c.outcomes) e << std::string(to_string(o));
    e << YAML::EndSeq;
    e << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "n_individuals" << YAML::Value << d.n_individuals;
    e << YAML::Key << "gamma" << YAML::Value << num(d.gamma);
    lognormal("own_li", d.own_li);
    e << YAML::Key << "ci_slope" << YAML::Value << num(d.ci_slope);
    e << YAML::Key << "ci_noise_sd" << YAML::Value << num(d.ci_noise_sd);
    normal("deductions", d.deductions);
    lognormal("wife_li", d.wife_li);
    normal("wife_ci", d.wife_ci);
    normal("wife_d", d.wife_d);
    e << YAML::Key << "married_share" << YAML::Value << num(d.married_share);
    e << YAML::Key << "wife_no_income_share" << YAML::Value << num(d.wife_no_income_share);
    e << YAML::Key << "income_shock_sd" << YAML::Value << num(d.income_shock_sd);
    e << YAML::Key << "wife_income_shock_sd" << YAML::Value << num(d.wife_income_shock_sd);
    e << YAML::Key << "individual_effect_sd" << YAML::Value << num(d.individual_effect_sd);
    e << YAML::Key << "wage_growth" << YAML::Value << num(d.wage_growth);
    e << YAML::Key << "year_effect_sd" << YAML::Value << num(d.year_effect_sd);
    e << YAML::Key << "measurement_noise_sd" << YAML::Value << num(d.measurement_noise_sd);
    normal("annual_hours", d.annual_hours);
    e << YAML::Key << "hours_noise_sd" << YAML::Value << num(d.hours_noise_sd);
    e << YAML::Key << "days_worked" << YAML::Value << num(d.days_worked);
    e << YAML::Key << "attrition_hazard" << YAML::Value << num(d.attrition_hazard);
    e << YAML::Key << "employment_exit_hazard" << YAML::Value << num(d.employment_exit_hazard);
    e << YAML::Key << "promotion_rate" << YAML::Value << num(d.promotion_rate);
    e << YAML::Key << "jjt_rate" << YAML::Value << num(d.jjt_rate);
    e << YAML::Key << "event_loading" << YAML::Value << num(d.event_loading);
    e << YAML::EndMap;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string config_hash(const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    c.threads = 1;
    c.output_dir.clear();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump_pipeline_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void apply_group_spec(PipelineConfig& cfg, const std::string& spec) {
    auto parse_range = [&](const std::string& s) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw ConfigError("group range '" + s + "' needs LO:HI");
        const auto lo = csv::parse_double(s.substr(0, colon));
        const auto hi = csv::parse_double(s.substr(colon + 1));
        if (!lo || !hi) throw ConfigError("group range '" + s + "' is not numeric");
        return LiRange{*lo, *hi};
    };
    const auto comma = spec.find(',');
    GroupBounds g = cfg.groups;
    g.low = parse_range(spec.substr(0, comma));
    if (comma == std::string::npos)
        g.medium.reset();
    else
        g.medium = parse_range(spec.substr(comma + 1));
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    cfg.groups = g;
}

}  // namespace dktax
