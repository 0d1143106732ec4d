// Filter recursions for linear systems with uncertain constant parameters.
//
// Four filters over the same model family, all as pure step functions that
// consume a state and return a new one:
//
//   KF     standard Kalman filter that ignores the parameter entirely
//          (the misspecified baseline: no parameter feed-through anywhere).
//   CKF    consider (Schmidt) Kalman filter: the parameter is never estimated,
//          but its prior covariance and the state/parameter cross-covariance C
//          shape both the gain and the covariance.
//   SDKF   desensitized filter with an analytical gain: a sensitivity matrix S
//          (partial of the estimation error w.r.t. the parameter) is propagated
//          alongside the state, and the gain minimizes
//          J = Tr(P⁺) + Tr(S⁺ W S⁺ᵀ) for a symmetric PSD weight W.
//   SMCKF  the consider filter rewritten in terms of S and the reduced
//          covariance Γ = P − S·P_pp·Sᵀ; its full covariance is recovered as
//          Γ + S·P_pp·Sᵀ.
//
// With W = P_pp and consistent initial conditions, CKF, SDKF and SMCKF produce
// the same estimates, gains and (recovered) covariances; the bridge module
// demonstrates this numerically.
//
// Posterior covariances are symmetrized after every update. Innovation
// covariances are inverted through a Cholesky factorization after an explicit
// positive-definiteness check; failures throw SingularMatrixError rather than
// being regularized away.
#pragma once

#include "considerkf/model.hpp"

namespace ckf {

// ---------------------------------------------------------------------------
// Filter states
// ---------------------------------------------------------------------------

/// Standard KF: estimate and error covariance.
struct KfState {
    Vector x_hat;
    Matrix p;
};

/// Consider filter: estimate, error covariance, and the n x l cross-covariance
/// C between state estimation error and parameter error.
struct CkfState {
    Vector x_hat;
    Matrix p;
    Matrix c;
};

/// Desensitized filter: estimate, covariance of the parameter-free error
/// component, and the n x l sensitivity matrix S.
struct SdkfState {
    Vector x_hat;
    Matrix p;
    Matrix s;
};

/// Sensitivity-matrix consider filter: estimate, reduced covariance Γ, and the
/// sensitivity matrix S. Full covariance = Γ + S·P_pp·Sᵀ.
struct SmckfState {
    Vector x_hat;
    Matrix gamma;
    Matrix s;
};

/// Result of one measurement update.
template <class StateT> struct MeasurementOutcome {
    StateT state;
    Matrix gain;           // n x m
    Vector innovation;     // z − H·x̂⁻ − N·p̂
    Matrix innovation_cov; // m x m, symmetric positive definite
};

using KfOutcome = MeasurementOutcome<KfState>;
using CkfOutcome = MeasurementOutcome<CkfState>;
using SdkfOutcome = MeasurementOutcome<SdkfState>;

/// SMCKF update additionally reports the recovered full covariance.
struct SmckfOutcome {
    SmckfState state;
    Matrix gain;
    Vector innovation;
    Matrix innovation_cov;
    Matrix full_cov; // Γ⁺ + S⁺·P_pp·S⁺ᵀ
};

// ---------------------------------------------------------------------------
// Standard KF (parameter-blind baseline)
// ---------------------------------------------------------------------------

KfState kf_time_update(const KfState& state, const StepMatrices& sm);
KfOutcome kf_measurement_update(const KfState& state, const Vector& z,
                                const StepMatrices& sm);

// ---------------------------------------------------------------------------
// Consider Kalman filter
// ---------------------------------------------------------------------------

/// x̂⁻ = Φx̂⁺ + Ψp̂
/// P⁻ = ΦP⁺Φᵀ + ΦC⁺Ψᵀ + ΨC⁺ᵀΦᵀ + ΨP_ppΨᵀ + GQGᵀ   (symmetrized)
/// C⁻ = ΦC⁺ + ΨP_pp
CkfState ckf_time_update(const CkfState& state, const StepMatrices& sm,
                         const ParameterPrior& prior);

/// Ω  = HP⁻Hᵀ + NC⁻ᵀHᵀ + HC⁻Nᵀ + NP_ppNᵀ + R
/// K  = (P⁻Hᵀ + C⁻Nᵀ)Ω⁻¹
/// x̂⁺ = x̂⁻ + K(z − Hx̂⁻ − Np̂)
/// P⁺ = (I − KH)P⁻ − KNC⁻ᵀ                           (symmetrized)
/// C⁺ = (I − KH)C⁻ − KNP_pp
CkfOutcome ckf_measurement_update(const CkfState& state, const Vector& z,
                                  const StepMatrices& sm,
                                  const ParameterPrior& prior);

// ---------------------------------------------------------------------------
// Desensitized Kalman filter (analytical gain)
// ---------------------------------------------------------------------------

/// x̂⁻ = Φx̂⁺ + Ψp̂;  S⁻ = ΦS⁺ + Ψ;  P⁻ = ΦP⁺Φᵀ + GQGᵀ
SdkfState sdkf_time_update(const SdkfState& state, const StepMatrices& sm,
                           const ParameterPrior& prior);

/// Analytical minimizer of the desensitized cost, with γ = HS⁻ + N:
/// K = (P⁻Hᵀ + S⁻Wγᵀ)(HP⁻Hᵀ + γWγᵀ + R)⁻¹
Matrix sdkf_gain(const SdkfState& state, const StepMatrices& sm,
                 const SensitivityWeight& w);

/// x̂⁺ = x̂⁻ + K(z − Hx̂⁻ − Np̂);  S⁺ = S⁻ − Kγ;
/// P⁺ = (I − KH)P⁻ + S⁺WγᵀKᵀ                         (symmetrized)
SdkfOutcome sdkf_measurement_update(const SdkfState& state, const Vector& z,
                                    const StepMatrices& sm,
                                    const ParameterPrior& prior,
                                    const SensitivityWeight& w);

// ---------------------------------------------------------------------------
// Sensitivity-matrix consider filter
// ---------------------------------------------------------------------------

/// x̂⁻ = Φx̂⁺ + Ψp̂;  S⁻ = ΦS⁺ + Ψ;  Γ⁻ = ΦΓ⁺Φᵀ + GQGᵀ
SmckfState smckf_time_update(const SmckfState& state, const StepMatrices& sm,
                             const ParameterPrior& prior);

/// K  = (Γ⁻Hᵀ + S⁻P_ppγᵀ)(HΓ⁻Hᵀ + γP_ppγᵀ + R)⁻¹,  γ = HS⁻ + N
/// S⁺ = S⁻ − Kγ;  Γ⁺ = (I − KH)Γ⁻ + S⁺P_ppγᵀKᵀ      (symmetrized)
/// full covariance P⁺ = Γ⁺ + S⁺P_ppS⁺ᵀ
SmckfOutcome smckf_measurement_update(const SmckfState& state, const Vector& z,
                                      const StepMatrices& sm,
                                      const ParameterPrior& prior);

// ---------------------------------------------------------------------------
// Desensitized cost and its gradient
// ---------------------------------------------------------------------------

/// J(K) = Tr((I−KH)P⁻(I−KH)ᵀ + KRKᵀ) + Tr(S⁺(K)·W·S⁺(K)ᵀ)
/// with S⁺(K) = S⁻ − K(HS⁻ + N). The covariance term is kept in quadratic
/// (Joseph) form so J is well defined for any gain, optimal or not.
double desensitized_cost(const Matrix& p_minus, const Matrix& s_minus,
                         const Matrix& k_gain, const StepMatrices& sm,
                         const SensitivityWeight& w);

/// ∂J/∂K = 2K(HP⁻Hᵀ + R) − 2P⁻Hᵀ − 2S⁻Wγᵀ + 2KγWγᵀ
/// Vanishes exactly at the sdkf_gain solution.
Matrix desensitized_cost_gradient(const Matrix& p_minus, const Matrix& s_minus,
                                  const Matrix& k_gain, const StepMatrices& sm,
                                  const SensitivityWeight& w);

} // namespace ckf
