#pragma once

// Synthetic household panel with a known wage response to the reform.
//
// Real log hourly wage:
//   w_it = a_i + g_t + gamma * C_it + e_it
//   C_it = sum_{s=1987..t} [log(1 - tau_is) - log(1 - tau_i86)]
// with tau_is the statutory MTR of the person's real income under the 1986
// system (s <= 1986) or the price-adjusted 1987 system (s >= 1987). Real
// incomes are stationary around their 1986 level, so the long-run
// elasticity averaged over the 7 post years is gamma * (7 + 1) / 2.

#include "dktax/panel.hpp"

#include <cstdint>

namespace dktax {

struct NormalLaw {
    double mean = 0.0;
    double sd = 0.0;
};

struct LogNormalLaw {
    double mean_log = 0.0;
    double sd_log = 0.0;
};

struct DgpConfig {
    std::size_t n_individuals = 40000;
    std::uint64_t seed = 1;

    /// Log-wage response per year of exposure.
    double gamma = 0.1;

    LogNormalLaw own_li{11.918390573078392, 0.2};   // median 150,000
    double ci_slope = -0.3;                          // CI = slope * LI + noise
    double ci_noise_sd = 20000.0;
    NormalLaw deductions{10000.0, 7000.0};           // truncated at 0
    LogNormalLaw wife_li{11.461632170582678, 0.45};  // median 95,000
    NormalLaw wife_ci{-5000.0, 13000.0};
    NormalLaw wife_d{8000.0, 7000.0};
    double married_share = 0.92;
    double wife_no_income_share = 0.05;
    /// sd of the iid log shocks to real LI in years other than 1986.
    double income_shock_sd = 0.05;
    double wife_income_shock_sd = 1.0;

    double individual_effect_sd = 0.05;  ///< added to the LI-implied wage level
    double wage_growth = 0.02;           ///< mean real g_t growth per year
    double year_effect_sd = 0.005;
    double measurement_noise_sd = 0.03;

    NormalLaw annual_hours{1650.0, 100.0};
    double hours_noise_sd = 40.0;
    double days_worked = 225.0;

    double attrition_hazard = 0.0031729;  ///< per post-1986 year; 2.2% gone by 1993
    double employment_exit_hazard = 0.05;

    double promotion_rate = 0.06;  ///< share promoted per year at zero wage growth
    double jjt_rate = 0.05;
    double event_loading = 10.0;   ///< latent shift per unit of excess wage growth

    /// Annual CPI growth; 1986 = 100.
    double cpi_growth = 1.02;
    int threads = 1;

    /// Throws InvalidArgument on hazards outside [0, 1), negative sds, etc.
    void validate() const;
};

/// Post-reform years 1987..1993.
inline constexpr int kPostYears = kLastYear - kBaseYear;

/// gamma * (kPostYears + 1) / 2.
double true_elasticity(const DgpConfig& cfg);
/// Inverse of true_elasticity.
double gamma_for_elasticity(double epsilon);

/// The 1986 system and the 1987 system in 1986 prices.
struct RealSystems {
    TaxSystem pre;
    TaxSystem post;
};
RealSystems real_systems(double cpi_growth);

/// Nominal person-year panel, canonical (id, year) order. Deterministic in
/// cfg (thread count does not matter). Throws InvalidArgument if any
/// simulated MTR reaches 1.
Panel generate_panel(const DgpConfig& cfg);

/// Price index implied by cfg.cpi_growth.
Deflator dgp_deflator(const DgpConfig& cfg);

}  // namespace dktax
