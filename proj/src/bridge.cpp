#include "considerkf/bridge.hpp"

#include <algorithm>
#include <string>

namespace ckf {

namespace {

double pairwise_dev(const Matrix& a, const Matrix& b, const Matrix& c) {
    return std::max({rel_deviation(a, b), rel_deviation(a, c),
                     rel_deviation(b, c)});
}

} // namespace

double EquivalenceReport::max_deviation() const {
    return std::max({max_rel_dev_state, max_rel_dev_gain, max_rel_dev_cov,
                     max_rel_dev_cross});
}

Matrix cross_cov_from_sensitivity(const Matrix& s,
                                  const ParameterPrior& prior) {
    if (s.cols() != prior.p_pp.rows()) {
        throw DimensionError(
            "cross_cov_from_sensitivity: sensitivity must be n x l");
    }
    return s * prior.p_pp;
}

Matrix recover_full_covariance(const Matrix& gamma, const Matrix& s,
                               const ParameterPrior& prior) {
    if (gamma.rows() != gamma.cols() || gamma.rows() != s.rows() ||
        s.cols() != prior.p_pp.rows()) {
        throw DimensionError("recover_full_covariance: shape mismatch");
    }
    return symmetrize(gamma + s * prior.p_pp * s.transpose());
}

EquivalenceReport run_equivalence(
    const Scenario& scenario, const std::vector<Vector>& measurements,
    const std::optional<SensitivityWeight>& sdkf_weight) {
    if (static_cast<int>(measurements.size()) != scenario.steps) {
        throw DimensionError(
            "run_equivalence: measurement count must equal scenario.steps");
    }
    // The cross-covariance/sensitivity correspondence needs an invertible
    // parameter covariance; refuse to extrapolate past that.
    require_spd(scenario.prior.p_pp, "parameter covariance");

    const ParameterPrior& prior = scenario.prior;
    const SensitivityWeight w =
        sdkf_weight.value_or(SensitivityWeight(prior.p_pp));

    // Consistent initial conditions across the three recursions.
    CkfState ckf{scenario.x0_hat, scenario.p0, scenario.s0 * prior.p_pp};
    SmckfState smc{
        scenario.x0_hat,
        symmetrize(scenario.p0 -
                   scenario.s0 * prior.p_pp * scenario.s0.transpose()),
        scenario.s0};
    SdkfState sdkf{scenario.x0_hat,
                   symmetrize(scenario.p0 -
                              scenario.s0 * w.w * scenario.s0.transpose()),
                   scenario.s0};

    EquivalenceReport report;
    report.steps = scenario.steps;
    report.per_step.reserve(scenario.steps);

    for (int k = 1; k <= scenario.steps; ++k) {
        DeviationRow row;
        row.k = k;
        try {
            const StepMatrices sm = scenario.model.at(k);
            ckf = ckf_time_update(ckf, sm, prior);
            smc = smckf_time_update(smc, sm, prior);
            sdkf = sdkf_time_update(sdkf, sm, prior);

            // Prior-side deviations.
            row.dev_state = pairwise_dev(ckf.x_hat, smc.x_hat, sdkf.x_hat);
            row.dev_cov = std::max(
                rel_deviation(ckf.p,
                              recover_full_covariance(smc.gamma, smc.s, prior)),
                rel_deviation(ckf.p, recover_full_covariance(sdkf.p, sdkf.s,
                                                             prior)));
            row.dev_cross = std::max(
                rel_deviation(ckf.c, cross_cov_from_sensitivity(smc.s, prior)),
                rel_deviation(ckf.c,
                              cross_cov_from_sensitivity(sdkf.s, prior)));

            const Vector& z = measurements[k - 1];
            const CkfOutcome oc = ckf_measurement_update(ckf, z, sm, prior);
            const SmckfOutcome og = smckf_measurement_update(smc, z, sm, prior);
            const SdkfOutcome od =
                sdkf_measurement_update(sdkf, z, sm, prior, w);
            ckf = oc.state;
            smc = og.state;
            sdkf = od.state;

            row.dev_gain = pairwise_dev(oc.gain, og.gain, od.gain);
            row.dev_state = std::max(
                row.dev_state, pairwise_dev(ckf.x_hat, smc.x_hat, sdkf.x_hat));
            row.dev_cov = std::max(
                {row.dev_cov, rel_deviation(ckf.p, og.full_cov),
                 rel_deviation(ckf.p, recover_full_covariance(sdkf.p, sdkf.s,
                                                              prior))});
            row.dev_cross = std::max(
                {row.dev_cross,
                 rel_deviation(ckf.c, cross_cov_from_sensitivity(smc.s, prior)),
                 rel_deviation(ckf.c,
                               cross_cov_from_sensitivity(sdkf.s, prior))});
        } catch (const Error& e) {
            throw Error("equivalence step " + std::to_string(k) + ": " +
                        e.what());
        }

        report.max_rel_dev_state =
            std::max(report.max_rel_dev_state, row.dev_state);
        report.max_rel_dev_gain =
            std::max(report.max_rel_dev_gain, row.dev_gain);
        report.max_rel_dev_cov = std::max(report.max_rel_dev_cov, row.dev_cov);
        report.max_rel_dev_cross =
            std::max(report.max_rel_dev_cross, row.dev_cross);
        report.per_step.push_back(row);
    }
    return report;
}

} // namespace ckf
