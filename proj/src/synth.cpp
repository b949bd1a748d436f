#include "dktax/synth.hpp"

#include "dktax/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace dktax {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Draws {
public:
    explicit Draws(std::uint64_t s) : eng_(s) {}
    double normal(double mean, double sd) {
        return mean + sd * std::normal_distribution<double>(0.0, 1.0)(eng_);
    }
    double normal(const NormalLaw& l) { return normal(l.mean, l.sd); }
    double lognormal(const LogNormalLaw& l) { return std::exp(normal(l.mean_log, l.sd_log)); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

private:
    std::mt19937_64 eng_;
};

void check_sd(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidArgument(std::string(name) + " must be a finite non-negative sd");
}

void check_prob(double v, const char* name, bool closed = false) {
    if (!(v >= 0.0) || (closed ? v > 1.0 : v >= 1.0))
        throw InvalidArgument(std::string(name) + (closed ? " must lie in [0, 1]"
                                                          : " must lie in [0, 1)"));
}

double mtr_checked(const IncomeRecord& rec, const TaxSystem& sys) {
    const double t = effective_mtr(rec, sys);
    if (t >= 1.0)
        throw InvalidArgument("simulated marginal tax rate at or above 1 under the " + sys.year +
                              " system");
    return t;
}

void simulate_person(const DgpConfig& cfg, const RealSystems& sys,
                     const std::array<double, kNumYears>& g, PersonId id,
                     std::vector<PanelRow>& out) {
    Draws r(stream_seed(cfg.seed, static_cast<std::uint64_t>(id)));

    const double age86 = 25.0 + 25.0 * r.uniform();
    const bool married = r.uniform() < cfg.married_share;
    const double li86 = r.lognormal(cfg.own_li);
    const double ci86 = cfg.ci_slope * li86 + r.normal(0.0, cfg.ci_noise_sd);
    const double d86 = std::max(0.0, r.normal(cfg.deductions));
    const bool wife_zero = r.uniform() < cfg.wife_no_income_share;
    const double wli = r.lognormal(cfg.wife_li);
    const double wci = r.normal(cfg.wife_ci);
    const double wd = std::max(0.0, r.normal(cfg.wife_d));
    const double li_w86 = married && !wife_zero ? wli : 0.0;

    const double hours = std::clamp(r.normal(cfg.annual_hours), 1000.0, 2300.0);
    const double a = std::log(li86 / hours) + r.normal(0.0, cfg.individual_effect_sd);
    const double z = cfg.own_li.sd_log > 0 ? (std::log(li86) - cfg.own_li.mean_log) /
                                                 cfg.own_li.sd_log
                                           : 0.0;
    const double ez = z + r.normal(0.0, 1.0);
    const int education = ez < -0.5 ? 0 : ez < 0.8 ? 1 : 2;
    const int n_children = static_cast<int>(std::floor(4.0 * r.uniform()));
    const bool private_sector = r.uniform() < 0.7;
    const bool full_time = r.uniform() < 0.95;
    int rank = std::clamp(static_cast<int>(std::floor(2.0 + z + r.normal(0.0, 1.0))), 0, 5);
    PersonId workplace = 1 + static_cast<PersonId>(r.uniform() * 5000.0);

    double tau86 = 0.0;
    double exposure = 0.0;
    bool prev_employed = false;

    for (int t = kFirstYear; t <= kLastYear; ++t) {
        // Every draw is taken unconditionally so that streams line up across configs.
        const double u_attr = r.uniform();
        const double eta = r.normal(0.0, cfg.income_shock_sd);
        const double eta_w = r.normal(0.0, cfg.wife_income_shock_sd);
        const double u_emp = r.uniform();
        const double noise = r.normal(0.0, cfg.measurement_noise_sd);
        const double h_noise = r.normal(0.0, cfg.hours_noise_sd);
        const double u_prom = r.uniform();
        const double u_jjt = r.uniform();
        const double u_move = r.uniform();
        const double u_ui = r.uniform();

        if (t > kBaseYear && u_attr < cfg.attrition_hazard) break;

        IncomeRecord real;
        const bool base = t == kBaseYear;
        real.li = li86 * (base ? 1.0 : std::exp(eta));
        real.ci = ci86;
        real.d = d86;
        real.married = married;
        if (married) {
            real.li_w = li_w86 * (base ? 1.0 : std::exp(eta_w));
            real.ci_w = wci;
            real.d_w = wd;
        }

        const TaxSystem& law = t <= kBaseYear ? sys.pre : sys.post;
        const double tau = mtr_checked(real, law);
        double x = 0.0;
        if (base) tau86 = tau;
        if (t >= kReformYear) {
            x = std::log(1.0 - tau) - std::log(1.0 - tau86);
            exposure += x;
        }

        const double rel = std::pow(cfg.cpi_growth, t - kBaseYear);
        PanelRow row;
        row.id = id;
        row.year = t;
        row.employed = u_emp >= cfg.employment_exit_hazard;
        IncomeRecord nominal = real;
        nominal.li *= rel;
        nominal.ci *= rel;
        nominal.d *= rel;
        nominal.li_w *= rel;
        nominal.ci_w *= rel;
        nominal.d_w *= rel;
        row.income = nominal;
        if (t >= 1984) row.bracket = bracket_location(real, law);

        const double shift = std::exp(cfg.event_loading * cfg.gamma * x);
        if (t > kFirstYear && row.employed && rank < 5 && u_prom < cfg.promotion_rate * shift)
            ++rank;
        if (t > kFirstYear && row.employed && prev_employed && u_jjt < cfg.jjt_rate * shift)
            workplace = 1 + (workplace + static_cast<PersonId>(u_move * 4999.0)) % 5000;

        if (row.employed) {
            const double w_real = a + g[t - kFirstYear] + cfg.gamma * exposure + noise;
            const double w_nom = w_real + std::log(rel);
            const double h = std::max(200.0, hours + h_noise);
            row.log_wage = w_nom;
            row.hours_annual = h;
            if (t >= 1985) row.hours_daily = h / cfg.days_worked;
            row.earn_nov = std::exp(w_nom) * h;
            row.occ_rank = rank;
            row.workplace_id = workplace;
        }
        row.ui_benefit = !row.employed || u_ui < 0.02;
        row.age = age86 + (t - kBaseYear);
        row.n_children = n_children;
        row.education = education;
        row.full_time = full_time;
        row.private_sector = private_sector;
        prev_employed = row.employed;
        out.push_back(std::move(row));
    }
}

}  // namespace

void DgpConfig::validate() const {
    if (n_individuals == 0) throw InvalidArgument("n_individuals must be positive");
    if (!std::isfinite(gamma)) throw InvalidArgument("gamma must be finite");
    check_sd(own_li.sd_log, "own_li.sd_log");
    check_sd(ci_noise_sd, "ci_noise_sd");
    check_sd(deductions.sd, "deductions.sd");
    check_sd(wife_li.sd_log, "wife_li.sd_log");
    check_sd(wife_ci.sd, "wife_ci.sd");
    check_sd(wife_d.sd, "wife_d.sd");
    check_sd(income_shock_sd, "income_shock_sd");
    check_sd(wife_income_shock_sd, "wife_income_shock_sd");
    check_sd(individual_effect_sd, "individual_effect_sd");
    check_sd(year_effect_sd, "year_effect_sd");
    check_sd(measurement_noise_sd, "measurement_noise_sd");
    check_sd(annual_hours.sd, "annual_hours.sd");
    check_sd(hours_noise_sd, "hours_noise_sd");
    check_prob(attrition_hazard, "attrition_hazard");
    check_prob(employment_exit_hazard, "employment_exit_hazard");
    check_prob(married_share, "married_share", true);
    check_prob(wife_no_income_share, "wife_no_income_share", true);
    check_prob(promotion_rate, "promotion_rate", true);
    check_prob(jjt_rate, "jjt_rate", true);
    if (!(days_worked > 0.0)) throw InvalidArgument("days_worked must be positive");
    if (!(cpi_growth > 0.0)) throw InvalidArgument("cpi_growth must be positive");
    if (threads < 1) throw InvalidArgument("threads must be at least 1");
}

double true_elasticity(const DgpConfig& cfg) { return cfg.gamma * (kPostYears + 1) / 2.0; }

double gamma_for_elasticity(double epsilon) { return 2.0 * epsilon / (kPostYears + 1); }

RealSystems real_systems(double cpi_growth) {
    return {system_1986(), deflate_system(system_1987(), cpi_growth)};
}

Deflator dgp_deflator(const DgpConfig& cfg) { return Deflator::statutory(cfg.cpi_growth); }

Panel generate_panel(const DgpConfig& cfg) {
    cfg.validate();
    const auto sys = real_systems(cfg.cpi_growth);

    std::array<double, kNumYears> g{};
    Draws yr(stream_seed(cfg.seed, ~0ULL));
    for (int t = kFirstYear; t <= kLastYear; ++t) {
        const double e = yr.normal(0.0, cfg.year_effect_sd);
        g[t - kFirstYear] = t == kBaseYear ? 0.0 : cfg.wage_growth * (t - kBaseYear) + e;
    }

    const std::size_t n = cfg.n_individuals;
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n);
    std::vector<std::vector<PanelRow>> parts(nt);
    std::vector<std::exception_ptr> errors(nt);
    auto work = [&](std::size_t k) {
        try {
            const std::size_t lo = n * k / nt, hi = n * (k + 1) / nt;
            parts[k].reserve((hi - lo) * kNumYears);
            for (std::size_t i = lo; i < hi; ++i)
                simulate_person(cfg, sys, g, static_cast<PersonId>(i + 1), parts[k]);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < nt; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<PanelRow> rows;
    std::size_t total = 0;
    for (auto& p : parts) total += p.size();
    rows.reserve(total);
    for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(rows));
    return Panel(std::move(rows));
}

}  // namespace dktax
