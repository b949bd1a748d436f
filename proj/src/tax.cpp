#include "dktax/tax.hpp"

#include "dktax/csv.hpp"
#include "dktax/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dktax {

namespace {

constexpr double kMtrStep = 100.0;

bool finite(double x) { return std::isfinite(x); }

double pos(double x) { return x > 0.0 ? x : 0.0; }

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

double regional_rate_for(const IncomeRecord& rec, const TaxSystem& sys) {
    return rec.regional_rate.value_or(sys.regional_rate);
}

}  // namespace

void IncomeRecord::validate() const {
    if (!finite(li) || !finite(ci) || !finite(d))
        throw InvalidArgument("income record has a non-finite field");
    if (d < 0.0) throw InvalidArgument("deductions must be non-negative");
    if (married) {
        if (!finite(li_w) || !finite(ci_w) || !finite(d_w))
            throw InvalidArgument("spouse income has a non-finite field");
        if (d_w < 0.0) throw InvalidArgument("spouse deductions must be non-negative");
    }
    if (regional_rate && !(*regional_rate >= 0.0 && *regional_rate < 1.0))
        throw InvalidArgument("regional rate override must lie in [0, 1)");
}

IncomeRecord IncomeRecord::spouse() const {
    IncomeRecord s;
    s.li = li_w;
    s.ci = ci_w;
    s.d = d_w;
    return s;
}

std::string_view to_string(BracketLocation b) {
    switch (b) {
        case BracketLocation::None: return "NONE";
        case BracketLocation::Bottom: return "BOTTOM";
        case BracketLocation::Middle: return "MIDDLE";
        case BracketLocation::Top: return "TOP";
    }
    return "NONE";
}

BracketLocation parse_bracket(std::string_view s) {
    const auto u = upper(trim(s));
    if (u == "NONE") return BracketLocation::None;
    if (u == "BOTTOM") return BracketLocation::Bottom;
    if (u == "MIDDLE") return BracketLocation::Middle;
    if (u == "TOP") return BracketLocation::Top;
    throw InvalidArgument("unknown bracket '" + std::string(s) + "'");
}

std::string_view to_string(BaseRule r) {
    switch (r) {
        case BaseRule::Taxable: return "TAXABLE";
        case BaseRule::LiPlusPosCi: return "LI_PLUS_POS_CI";
        case BaseRule::LiPlusCiOverK: return "LI_PLUS_CI_OVER_K";
    }
    return "TAXABLE";
}

BaseRule parse_base_rule(std::string_view s) {
    const auto u = upper(trim(s));
    if (u == "TAXABLE") return BaseRule::Taxable;
    if (u == "LI_PLUS_POS_CI") return BaseRule::LiPlusPosCi;
    if (u == "LI_PLUS_CI_OVER_K") return BaseRule::LiPlusCiOverK;
    throw InvalidArgument("unknown base rule '" + std::string(s) + "'");
}

void TaxSystem::validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    if (!rate_ok(regional_rate)) throw InvalidArgument("regional rate must lie in [0, 1)");
    if (!finite(regional_cutoff)) throw InvalidArgument("regional cutoff must be finite");
    for (const auto& b : brackets) {
        if (!rate_ok(b.rate)) throw InvalidArgument("bracket rate must lie in [0, 1)");
        if (!finite(b.cutoff) || !finite(b.k))
            throw InvalidArgument("bracket amounts must be finite");
    }
    if (!(bottom().cutoff < middle().cutoff && middle().cutoff < top().cutoff))
        throw InvalidArgument("bracket cutoffs must increase strictly bottom < middle < top");
    if (ceiling && !rate_ok(*ceiling)) throw InvalidArgument("ceiling must lie in [0, 1)");
}

TaxSystem system_1986() {
    TaxSystem s;
    s.year = "1986";
    s.regional_rate = 0.280;
    s.regional_cutoff = 20700.0;
    s.brackets[0] = {BaseRule::Taxable, 0.0, 23200.0, 0.199, false};
    s.brackets[1] = {BaseRule::Taxable, 0.0, 113400.0, 0.144, false};
    s.brackets[2] = {BaseRule::Taxable, 0.0, 186100.0, 0.108, false};
    s.ceiling = 0.730;
    return s;
}

TaxSystem system_1987() {
    TaxSystem s;
    s.year = "1987";
    s.regional_rate = 0.290;
    s.regional_cutoff = 21200.0;
    s.brackets[0] = {BaseRule::Taxable, 0.0, 27100.0, 0.220, false};
    s.brackets[1] = {BaseRule::LiPlusPosCi, 0.0, 130000.0, 0.060, true};
    s.brackets[2] = {BaseRule::LiPlusCiOverK, 60000.0, 200000.0, 0.120, false};
    return s;
}

TaxSystem deflate_system(const TaxSystem& sys, double factor) {
    if (!(factor > 0.0) || !finite(factor))
        throw InvalidArgument("deflation factor must be positive");
    TaxSystem out = sys;
    out.regional_cutoff /= factor;
    for (auto& b : out.brackets) {
        b.cutoff /= factor;
        b.k /= factor;
    }
    return out;
}

TaxSystem parse_tax_system(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        auto t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("tax parameters line " + std::to_string(lineno) +
                                  ": expected key = value");
        kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }

    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        auto v = it->second;
        kv.erase(it);
        return v;
    };
    auto number = [&](const std::string& key, std::optional<double> def) -> double {
        auto v = take(key);
        if (!v || v->empty()) {
            if (def) return *def;
            throw InvalidArgument("tax parameters: missing '" + key + "'");
        }
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(*v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v->size())
            throw InvalidArgument("tax parameters: '" + key + "' is not a number: " + *v);
        return x;
    };
    auto flag = [&](const std::string& key) -> bool {
        auto v = take(key);
        if (!v) return false;
        auto u = upper(*v);
        if (u == "YES" || u == "TRUE" || u == "1") return true;
        if (u == "NO" || u == "FALSE" || u == "0") return false;
        throw InvalidArgument("tax parameters: '" + key + "' must be yes/no");
    };

    TaxSystem s;
    s.year = take("year").value_or("");
    s.regional_rate = number("regional.rate", std::nullopt);
    s.regional_cutoff = number("regional.cutoff", std::nullopt);
    const char* names[] = {"bottom", "middle", "top"};
    for (int i = 0; i < 3; ++i) {
        const std::string p = names[i];
        auto& b = s.brackets[static_cast<std::size_t>(i)];
        b.base = parse_base_rule(take(p + ".base").value_or("TAXABLE"));
        b.k = number(p + ".k", 0.0);
        b.cutoff = number(p + ".cutoff", std::nullopt);
        b.rate = number(p + ".rate", std::nullopt);
        b.joint = flag(p + ".joint");
    }
    if (auto c = kv.find("ceiling"); c != kv.end() && !c->second.empty())
        s.ceiling = number("ceiling", std::nullopt);
    else
        kv.erase("ceiling");
    if (!kv.empty())
        throw InvalidArgument("tax parameters: unknown key '" + kv.begin()->first + "'");
    s.validate();
    return s;
}

TaxSystem load_tax_system(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open tax parameter file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_tax_system(ss.str());
}

std::string format_tax_system(const TaxSystem& sys) {
    std::ostringstream o;
    using csv::fmt;
    o << "year = " << sys.year << "\n";
    o << "regional.rate = " << fmt(sys.regional_rate) << "\n";
    o << "regional.cutoff = " << fmt(sys.regional_cutoff) << "\n";
    const char* names[] = {"bottom", "middle", "top"};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& b = sys.brackets[i];
        o << names[i] << ".base = " << to_string(b.base) << "\n";
        if (b.base == BaseRule::LiPlusCiOverK) o << names[i] << ".k = " << fmt(b.k) << "\n";
        o << names[i] << ".cutoff = " << fmt(b.cutoff) << "\n";
        o << names[i] << ".joint = " << (b.joint ? "yes" : "no") << "\n";
        o << names[i] << ".rate = " << fmt(b.rate) << "\n";
    }
    if (sys.ceiling) o << "ceiling = " << fmt(*sys.ceiling) << "\n";
    return o.str();
}

double apply_base_rule(const NationalBracket& b, double li, double ci, double d) {
    switch (b.base) {
        case BaseRule::Taxable: return li + ci - d;
        case BaseRule::LiPlusPosCi: return li + pos(ci);
        case BaseRule::LiPlusCiOverK: return li + pos(ci - b.k);
    }
    return li + ci - d;
}

TaxBases taxable_bases(const IncomeRecord& rec, const TaxSystem& sys) {
    TaxBases out;
    out.regional = rec.li + rec.ci - rec.d;
    for (std::size_t i = 0; i < 3; ++i)
        out.national[i] = apply_base_rule(sys.brackets[i], rec.li, rec.ci, rec.d);
    return out;
}

namespace {

double joint_adjusted(double own_base, const IncomeRecord& rec, const TaxSystem& sys) {
    const auto& mid = sys.middle();
    if (!mid.joint || !rec.married) return own_base;
    const double spouse_base = apply_base_rule(mid, rec.li_w, rec.ci_w, rec.d_w);
    const double unused = pos(mid.cutoff - spouse_base);
    return pos(own_base - unused);
}

// Bases after the joint transfer: regional, bottom, middle, top.
std::array<double, 4> effective_bases(const IncomeRecord& rec, const TaxSystem& sys) {
    const auto b = taxable_bases(rec, sys);
    return {b.regional, b.national[0], joint_adjusted(b.national[1], rec, sys), b.national[2]};
}

}  // namespace

double joint_middle_transfer(const IncomeRecord& rec, const TaxSystem& sys) {
    const double own = apply_base_rule(sys.middle(), rec.li, rec.ci, rec.d);
    return joint_adjusted(own, rec, sys);
}

double effective_top_rate(const TaxSystem& sys, double regional_rate) {
    double top = sys.top().rate;
    if (sys.ceiling) {
        const double room = *sys.ceiling - regional_rate - sys.bottom().rate - sys.middle().rate;
        top = std::clamp(room, 0.0, top);
    }
    return top;
}

namespace {

std::array<double, 4> component_rates(const IncomeRecord& rec, const TaxSystem& sys) {
    const double regional = regional_rate_for(rec, sys);
    return {regional, sys.bottom().rate, sys.middle().rate, effective_top_rate(sys, regional)};
}

std::array<double, 4> component_cutoffs(const TaxSystem& sys) {
    return {sys.regional_cutoff, sys.bottom().cutoff, sys.middle().cutoff, sys.top().cutoff};
}

}  // namespace

LiabilityParts liability_parts(const IncomeRecord& rec, const TaxSystem& sys) {
    const auto bases = effective_bases(rec, sys);
    const auto rates = component_rates(rec, sys);
    const auto cuts = component_cutoffs(sys);
    LiabilityParts p;
    p.regional = rates[0] * pos(bases[0] - cuts[0]);
    for (std::size_t i = 0; i < 3; ++i) p.national[i] = rates[i + 1] * pos(bases[i + 1] - cuts[i + 1]);
    return p;
}

double tax_liability(const IncomeRecord& rec, const TaxSystem& sys) {
    return liability_parts(rec, sys).total();
}

BracketLocation bracket_location(const IncomeRecord& rec, const TaxSystem& sys) {
    const auto bases = effective_bases(rec, sys);
    if (bases[3] > sys.top().cutoff) return BracketLocation::Top;
    if (bases[2] > sys.middle().cutoff) return BracketLocation::Middle;
    if (bases[1] > sys.bottom().cutoff) return BracketLocation::Bottom;
    return BracketLocation::None;
}

double effective_mtr(const IncomeRecord& rec, const TaxSystem& sys) {
    // Same quantity as (T(li + 100) - T(li)) / 100, differenced per component
    // so the large liability totals never cancel.
    IncomeRecord up = rec;
    up.li += kMtrStep;
    const auto lo = effective_bases(rec, sys);
    const auto hi = effective_bases(up, sys);
    const auto rates = component_rates(rec, sys);
    const auto cuts = component_cutoffs(sys);
    double dt = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        dt += rates[i] * (pos(hi[i] - cuts[i]) - pos(lo[i] - cuts[i]));
    return dt / kMtrStep;
}

double statutory_mtr(const IncomeRecord& rec, const TaxSystem& sys) {
    const auto bases = effective_bases(rec, sys);
    const double regional = regional_rate_for(rec, sys);
    double r = 0.0;
    if (bases[0] > sys.regional_cutoff) r += regional;
    if (bases[1] > sys.bottom().cutoff) r += sys.bottom().rate;
    if (bases[2] > sys.middle().cutoff) r += sys.middle().rate;
    if (bases[3] > sys.top().cutoff) r += effective_top_rate(sys, regional);
    return r;
}

double mechanical_ntr_change(const IncomeRecord& rec, const TaxSystem& sys86,
                             const TaxSystem& sys87adj) {
    const double t86 = effective_mtr(rec, sys86);
    const double t87 = effective_mtr(rec, sys87adj);
    if (t86 >= 1.0 || t87 >= 1.0)
        throw InvalidArgument("marginal tax rate at or above 1; net-of-tax rate undefined");
    return std::log(1.0 - t87) - std::log(1.0 - t86);
}

std::vector<std::pair<double, double>> mtr_schedule(const TaxSystem& sys,
                                                    const std::vector<double>& li_grid) {
    if (!std::is_sorted(li_grid.begin(), li_grid.end()))
        throw InvalidArgument("mtr_schedule grid must be sorted ascending");
    std::vector<std::pair<double, double>> out;
    out.reserve(li_grid.size());
    IncomeRecord rec;
    for (double li : li_grid) {
        rec.li = li;
        out.emplace_back(li, statutory_mtr(rec, sys));
    }
    return out;
}

}  // namespace dktax
