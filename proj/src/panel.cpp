#include "dktax/panel.hpp"

#include "dktax/csv.hpp"
#include "dktax/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dktax {

Panel::Panel(std::vector<PanelRow> rows) : rows_(std::move(rows)) {
    std::stable_sort(rows_.begin(), rows_.end(), [](const PanelRow& a, const PanelRow& b) {
        return a.id != b.id ? a.id < b.id : a.year < b.year;
    });
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (i > 0 && rows_[i - 1].id == r.id && rows_[i - 1].year == r.year)
            throw DataError("duplicate key (id=" + std::to_string(r.id) +
                            ", year=" + std::to_string(r.year) + ")");
        if (index_.empty() || index_.back().id != r.id)
            index_.push_back({r.id, i, i + 1});
        else
            index_.back().end = i + 1;
    }
}

std::vector<PersonId> Panel::ids() const {
    std::vector<PersonId> out;
    out.reserve(index_.size());
    for (const auto& s : index_) out.push_back(s.id);
    return out;
}

std::span<const PanelRow> Panel::person(PersonId id) const {
    auto it = std::lower_bound(index_.begin(), index_.end(), id,
                               [](const Span& s, PersonId v) { return s.id < v; });
    if (it == index_.end() || it->id != id) return {};
    return std::span<const PanelRow>(rows_.data() + it->begin, it->end - it->begin);
}

const PanelRow* Panel::find(PersonId id, int year) const {
    for (const auto& r : person(id))
        if (r.year == year) return &r;
    return nullptr;
}

const std::vector<std::string>& panel_columns() {
    static const std::vector<std::string> cols = {
        "id",          "year",        "employed",     "married",       "li",
        "ci",          "d",           "li_w",         "ci_w",          "d_w",
        "regional_rate", "personal_income", "stock_income", "log_wage", "earn_nov",
        "hours_daily", "hours_annual", "occ_rank",    "workplace_id",  "ui_benefit",
        "age",         "n_children",  "education",    "full_time",     "private_sector",
        "bracket"};
    return cols;
}

namespace {

enum Col {
    cId, cYear, cEmployed, cMarried, cLi, cCi, cD, cLiW, cCiW, cDW, cRegional, cPersonal,
    cStock, cLogWage, cEarn, cHoursDaily, cHoursAnnual, cOcc, cWorkplace, cUi, cAge,
    cChildren, cEducation, cFullTime, cPrivate, cBracket, kNumCols
};

struct RowParser {
    std::vector<std::optional<std::size_t>> pos;  // csv position of each known column
    const std::vector<std::string>* fields = nullptr;
    std::size_t row = 0;
    LoadReport* report = nullptr;

    std::string_view cell(Col c) const {
        const auto& p = pos[c];
        if (!p || *p >= fields->size()) return {};
        return (*fields)[*p];
    }
    bool empty(Col c) const {
        auto s = cell(c);
        return s.find_first_not_of(' ') == std::string_view::npos;
    }
    [[noreturn]] void fail(Col c, const std::string& what) const {
        throw DataError("column '" + panel_columns()[c] + "': " + what, row);
    }
    std::optional<double> num(Col c) const {
        if (empty(c)) {
            ++report->missing[panel_columns()[c]];
            return std::nullopt;
        }
        auto v = csv::parse_double(cell(c));
        if (!v) fail(c, "malformed number '" + std::string(cell(c)) + "'");
        if (!std::isfinite(*v)) fail(c, "non-finite value");
        return v;
    }
    std::optional<std::int64_t> integer(Col c) const {
        if (empty(c)) {
            ++report->missing[panel_columns()[c]];
            return std::nullopt;
        }
        auto v = csv::parse_int(cell(c));
        if (!v) fail(c, "malformed integer '" + std::string(cell(c)) + "'");
        return v;
    }
    std::optional<bool> flag(Col c) const {
        if (empty(c)) {
            ++report->missing[panel_columns()[c]];
            return std::nullopt;
        }
        auto s = cell(c);
        if (s == "1" || s == "true" || s == "TRUE") return true;
        if (s == "0" || s == "false" || s == "FALSE") return false;
        fail(c, "malformed boolean '" + std::string(s) + "'");
    }
    template <class T>
    T required(std::optional<T> v, Col c) const {
        if (!v) fail(c, "required value is empty");
        return *v;
    }
};

PanelRow parse_row(const RowParser& p) {
    PanelRow r;
    r.id = p.required(p.integer(cId), cId);
    r.year = static_cast<int>(p.required(p.integer(cYear), cYear));
    if (r.year < kFirstYear || r.year > kLastYear)
        p.fail(cYear, "year " + std::to_string(r.year) + " outside 1981-1993");
    r.employed = p.required(p.flag(cEmployed), cEmployed);

    const auto married = p.flag(cMarried);
    const auto li = p.num(cLi), ci = p.num(cCi), d = p.num(cD);
    const auto li_w = p.num(cLiW), ci_w = p.num(cCiW), d_w = p.num(cDW);
    const auto regional = p.num(cRegional);
    const auto personal = p.num(cPersonal), stock = p.num(cStock);
    if (li || ci || d) {
        if (!(li && ci && d)) p.fail(cLi, "li, ci and d must be given together");
        IncomeRecord inc;
        inc.li = *li;
        inc.ci = *ci;
        inc.d = *d;
        inc.married = married.value_or(false);
        const bool any_spouse = li_w || ci_w || d_w;
        if (inc.married && !(li_w && ci_w && d_w))
            p.fail(cLiW, "married record needs li_w, ci_w and d_w");
        if (!inc.married && any_spouse) p.fail(cLiW, "spouse income given for unmarried record");
        if (inc.married) {
            inc.li_w = *li_w;
            inc.ci_w = *ci_w;
            inc.d_w = *d_w;
        }
        inc.regional_rate = regional;
        inc.personal_income = personal;
        inc.stock_income = stock;
        try {
            inc.validate();
        } catch (const InvalidArgument& e) {
            throw DataError(e.what(), p.row);
        }
        r.income = inc;
    } else if (li_w || ci_w || d_w) {
        p.fail(cLiW, "spouse income without own income");
    }

    r.log_wage = p.num(cLogWage);
    r.earn_nov = p.num(cEarn);
    r.hours_daily = p.num(cHoursDaily);
    r.hours_annual = p.num(cHoursAnnual);
    if (auto o = p.integer(cOcc)) {
        if (*o < 0 || *o > 5) p.fail(cOcc, "occupation rank must be 0-5");
        r.occ_rank = static_cast<int>(*o);
    }
    r.workplace_id = p.integer(cWorkplace);
    r.ui_benefit = p.flag(cUi);
    r.age = p.num(cAge);
    if (auto n = p.integer(cChildren)) r.n_children = static_cast<int>(*n);
    if (auto e = p.integer(cEducation)) {
        if (*e < 0 || *e > 2) p.fail(cEducation, "education must be 0, 1 or 2");
        r.education = static_cast<int>(*e);
    }
    r.full_time = p.flag(cFullTime);
    r.private_sector = p.flag(cPrivate);
    if (!p.empty(cBracket)) {
        try {
            r.bracket = parse_bracket(p.cell(cBracket));
        } catch (const InvalidArgument&) {
            p.fail(cBracket, "unknown bracket '" + std::string(p.cell(cBracket)) + "'");
        }
    } else {
        ++p.report->missing["bracket"];
    }

    if (r.employed && !r.log_wage) p.fail(cLogWage, "employed person-year without a wage");
    if (!r.employed) {
        if (r.log_wage) p.fail(cLogWage, "wage given for a non-employed person-year");
        if (r.earn_nov) p.fail(cEarn, "earnings given for a non-employed person-year");
        if (r.hours_daily || r.hours_annual)
            p.fail(cHoursAnnual, "hours given for a non-employed person-year");
        if (r.occ_rank) p.fail(cOcc, "occupation given for a non-employed person-year");
        if (r.workplace_id) p.fail(cWorkplace, "workplace given for a non-employed person-year");
    }
    return r;
}

}  // namespace

LoadedPanel load_panel(const std::string& path) {
    csv::Reader reader(path);
    LoadedPanel out;
    RowParser p;
    p.report = &out.report;
    const auto& names = panel_columns();
    p.pos.resize(kNumCols);
    for (std::size_t c = 0; c < names.size(); ++c) p.pos[c] = reader.column(names[c]);
    for (Col c : {cId, cYear, cEmployed})
        if (!p.pos[c]) throw DataError(path + ": missing required column '" + names[c] + "'");
    for (const auto& h : reader.header())
        if (std::find(names.begin(), names.end(), h) == names.end())
            out.report.warnings.push_back("ignoring unknown column '" + h + "'");

    std::vector<PanelRow> rows;
    std::vector<std::string> fields;
    std::set<std::pair<PersonId, int>> seen;
    while (reader.next(fields)) {
        p.fields = &fields;
        p.row = reader.row();
        if (fields.size() != reader.header().size())
            throw DataError("expected " + std::to_string(reader.header().size()) +
                                " fields, found " + std::to_string(fields.size()),
                            p.row);
        auto r = parse_row(p);
        if (!seen.emplace(r.id, r.year).second)
            throw DataError("duplicate key (id=" + std::to_string(r.id) +
                                ", year=" + std::to_string(r.year) + ")",
                            p.row);
        rows.push_back(std::move(r));
    }
    out.panel = Panel(std::move(rows));
    out.report.rows = out.panel.size();
    out.report.persons = out.panel.ids().size();
    return out;
}

void write_panel(const Panel& panel, const std::string& path) {
    csv::Writer w(path);
    w.row(panel_columns());
    auto b = [](const std::optional<bool>& v) -> std::string {
        return v ? (*v ? "1" : "0") : "";
    };
    auto i = [](const std::optional<int>& v) { return csv::fmt(v); };
    for (const auto& r : panel.rows()) {
        std::vector<std::string> f(panel_columns().size());
        f[cId] = csv::fmt(r.id);
        f[cYear] = csv::fmt(r.year);
        f[cEmployed] = r.employed ? "1" : "0";
        if (r.income) {
            const auto& inc = *r.income;
            f[cMarried] = inc.married ? "1" : "0";
            f[cLi] = csv::fmt(inc.li);
            f[cCi] = csv::fmt(inc.ci);
            f[cD] = csv::fmt(inc.d);
            if (inc.married) {
                f[cLiW] = csv::fmt(inc.li_w);
                f[cCiW] = csv::fmt(inc.ci_w);
                f[cDW] = csv::fmt(inc.d_w);
            }
            f[cRegional] = csv::fmt(inc.regional_rate);
            f[cPersonal] = csv::fmt(inc.personal_income);
            f[cStock] = csv::fmt(inc.stock_income);
        }
        f[cLogWage] = csv::fmt(r.log_wage);
        f[cEarn] = csv::fmt(r.earn_nov);
        f[cHoursDaily] = csv::fmt(r.hours_daily);
        f[cHoursAnnual] = csv::fmt(r.hours_annual);
        f[cOcc] = i(r.occ_rank);
        f[cWorkplace] = csv::fmt(r.workplace_id);
        f[cUi] = b(r.ui_benefit);
        f[cAge] = csv::fmt(r.age);
        f[cChildren] = i(r.n_children);
        f[cEducation] = i(r.education);
        f[cFullTime] = b(r.full_time);
        f[cPrivate] = b(r.private_sector);
        if (r.bracket) f[cBracket] = std::string(to_string(*r.bracket));
        w.row(f);
    }
}

Panel quasi_balance(const Panel& panel, std::span<const PersonId> sample) {
    std::vector<PersonId> ids(sample.begin(), sample.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::vector<PanelRow> out;
    out.reserve(ids.size() * kNumYears);
    for (PersonId id : ids) {
        auto rows = panel.person(id);
        auto it = rows.begin();
        for (int y = kFirstYear; y <= kLastYear; ++y) {
            if (it != rows.end() && it->year == y) {
                out.push_back(*it++);
            } else {
                PanelRow filler;
                filler.id = id;
                filler.year = y;
                filler.employed = false;
                out.push_back(filler);
            }
        }
    }
    return Panel(std::move(out));
}

Deflator::Deflator(std::map<int, double> index) : index_(std::move(index)) {
    for (int y = kFirstYear; y <= kLastYear; ++y) {
        auto it = index_.find(y);
        if (it == index_.end())
            throw DataError("deflator has no index for year " + std::to_string(y));
        if (!(it->second > 0.0) || !std::isfinite(it->second))
            throw DataError("deflator index for " + std::to_string(y) + " must be positive");
    }
}

Deflator Deflator::statutory(double annual) {
    if (!(annual > 0.0)) throw InvalidArgument("annual price growth factor must be positive");
    std::map<int, double> idx;
    for (int y = kFirstYear; y <= kLastYear; ++y) idx[y] = 100.0 * std::pow(annual, y - kBaseYear);
    return Deflator(std::move(idx));
}

Deflator Deflator::load(const std::string& path) {
    csv::Reader r(path);
    auto cy = r.column("year"), ci = r.column("index");
    if (!cy || !ci) throw DataError(path + ": deflator needs columns year,index");
    std::map<int, double> idx;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() <= std::max(*cy, *ci)) throw DataError("short deflator row", r.row());
        auto y = csv::parse_int(f[*cy]);
        auto v = csv::parse_double(f[*ci]);
        if (!y || !v) throw DataError("malformed deflator row", r.row());
        idx[static_cast<int>(*y)] = *v;
    }
    return Deflator(std::move(idx));
}

double Deflator::relative(int year) const {
    auto it = index_.find(year);
    if (it == index_.end()) throw InvalidArgument("no price index for " + std::to_string(year));
    return it->second / index_.at(kBaseYear);
}

}  // namespace dktax
