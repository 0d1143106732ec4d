// Identities connecting the consider filter's cross-covariance to the
// sensitivity matrix, and a lockstep runner that demonstrates numerically that
// CKF, SMCKF and SDKF(W = P_pp) are the same filter.
#pragma once

#include <optional>
#include <vector>

#include "considerkf/filters.hpp"

namespace ckf {

/// Per-step relative deviations recorded by run_equivalence.
struct DeviationRow {
    int k = 0;
    double dev_state = 0.0;
    double dev_gain = 0.0;
    double dev_cov = 0.0;
    double dev_cross = 0.0;
};

struct EquivalenceReport {
    int steps = 0;
    double max_rel_dev_state = 0.0;
    double max_rel_dev_gain = 0.0;
    double max_rel_dev_cov = 0.0;   // CKF P vs recovered SMCKF/SDKF P
    double max_rel_dev_cross = 0.0; // CKF C vs S·P_pp
    std::vector<DeviationRow> per_step;

    double max_deviation() const;
};

/// C = S·P_pp.
Matrix cross_cov_from_sensitivity(const Matrix& s, const ParameterPrior& prior);

/// P = Γ + S·P_pp·Sᵀ, symmetrized.
Matrix recover_full_covariance(const Matrix& gamma, const Matrix& s,
                               const ParameterPrior& prior);

/// Runs CKF, SMCKF and SDKF in lockstep on one measurement sequence and
/// records, per step (priors and posteriors), the relative deviations of the
/// state estimates, the gains, the recovered full covariances against the
/// CKF covariance, and S·P_pp against the CKF cross-covariance.
///
/// The SDKF weight defaults to P_pp, the choice under which all three filters
/// coincide; passing any other weight is the negative control that breaks the
/// equivalence. Initial conditions are made consistent from the scenario:
/// C₀ = S₀·P_pp and Γ₀ = P₀ − S₀·P_pp·S₀ᵀ (P₀ itself for the usual S₀ = 0).
///
/// Requires a strictly positive definite P_pp and exactly scenario.steps
/// measurements. A filter error at step k is rethrown with k attached.
EquivalenceReport run_equivalence(
    const Scenario& scenario, const std::vector<Vector>& measurements,
    const std::optional<SensitivityWeight>& sdkf_weight = std::nullopt);

} // namespace ckf
