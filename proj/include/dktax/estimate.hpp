#pragma once

// Event-study DiD with individual and year effects, just-identified 2SLS for
// the treatment-on-the-treated effect, and the elasticity conversion.
// Standard errors are clustered by individual with the small-sample factor
// G/(G-1) * (N-1)/(N-K), K counting explicit regressors only.

#include "dktax/panel.hpp"

#include <span>
#include <vector>

namespace dktax {

inline constexpr double kStrongInstrumentF = 104.7;

/// G/(G-1) * (N-1)/(N-K).
double cluster_factor(std::size_t clusters, std::size_t n, std::size_t k);

struct EsObs {
    PersonId id = 0;
    int year = 0;
    double y = 0.0;
    bool treated = false;
};

struct EventStudyCoef {
    int year = 0;
    double beta = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct EventStudyResult {
    int ref_year = kBaseYear;
    std::vector<EventStudyCoef> coefs;  ///< one per year present other than ref_year
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    std::size_t n_singletons = 0;  ///< ids dropped for having one usable row

    /// nullptr for ref_year or an absent year.
    const EventStudyCoef* at(int year) const;
};

/// y_it = a_i + sum_{j != ref} (alpha_j + beta_j * treated_i) * [t = j] + u.
/// Rows with non-finite y are dropped, then ids with a single row. Throws
/// EstimationError on a collinear design, a missing reference year or fewer
/// than two clusters.
EventStudyResult event_study(std::vector<EsObs> obs, int ref_year = kBaseYear);

struct IvObs {
    PersonId id = 0;
    int year = 0;
    double y = 0.0;
    double m = 0.0;  ///< 1 if liable for middle or top tax
    bool treated = false;
};

struct TotResult {
    double beta = 0.0, se = 0.0;
    double first_stage = 0.0, first_stage_se = 0.0;
    double f_stat = 0.0;
    double reduced_form = 0.0, reduced_form_se = 0.0;
    std::size_t n_obs = 0, n_clusters = 0, n_singletons = 0;
    bool strong_instrument() const { return f_stat > kStrongInstrumentF; }
};

/// y_it = a_i + year effects + beta * Post_t * m_it, instrumented by
/// Post_t * treated_i with Post_t = [t >= reform_year]. Throws
/// EstimationError when the instrument has no covariance with Post * m.
TotResult tot_iv(std::vector<IvObs> obs, int reform_year = kReformYear);

struct ElasticityResult {
    double epsilon = 0.0, se = 0.0;
    double mech_t = 0.0, mech_c = 0.0;        ///< arm means of the mechanical change
    double mech_t_sd = 0.0, mech_c_sd = 0.0;  ///< arm sds (0 when given as scalars)
};

/// beta / (mech_t - mech_c) with the mechanical changes held as constants.
/// Throws EstimationError if |mech_t - mech_c| < 1e-8.
ElasticityResult elasticity(double beta_tot, double se_tot, double mech_t, double mech_c);
ElasticityResult elasticity(const TotResult& tot, std::span<const double> mech_t,
                            std::span<const double> mech_c);

}  // namespace dktax
