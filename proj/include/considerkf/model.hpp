// Discrete-time linear system with uncertain constant parameters:
//
//   x_k = Phi_{k/k-1} x_{k-1} + Psi_{k/k-1} p + G_{k-1} w_{k-1}
//   z_k = H_k x_k + N_k p + v_k
//
// with w ~ N(0, Q), v ~ N(0, R) white and mutually independent, and the
// parameter p a random constant with prior mean p_hat and covariance P_pp.
// Matrices are supplied per time index k so constant and time-varying systems
// share one interface; step k consumes the matrix set at(k).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "considerkf/linalg.hpp"

namespace ckf {

/// Matrix set for a single transition/measurement index.
struct StepMatrices {
    Matrix phi;  // n x n state transition
    Matrix psi;  // n x l parameter transition
    Matrix g;    // n x q process-noise input
    Matrix q;    // q x q process-noise covariance
    Matrix h;    // m x n measurement
    Matrix nmat; // m x l measurement parameter
    Matrix r;    // m x m measurement-noise covariance
};

class SystemModel {
  public:
    using StepFn = std::function<StepMatrices(int)>;

    /// Constant system: the same matrices at every index. Dimensions are
    /// inferred from the matrix shapes; inconsistent shapes throw.
    static SystemModel constant(StepMatrices step);

    /// Time-varying system with declared dimensions. The callback output is
    /// trusted here and audited by validate_model.
    static SystemModel time_varying(int state_dim, int meas_dim, int param_dim,
                                    int noise_dim, StepFn fn);

    StepMatrices at(int k) const;

    int state_dim() const { return n_; }
    int meas_dim() const { return m_; }
    int param_dim() const { return l_; }
    int noise_dim() const { return q_; }
    bool is_constant() const { return constant_; }

  private:
    SystemModel() = default;

    int n_ = 0, m_ = 0, l_ = 0, q_ = 0;
    bool constant_ = false;
    StepMatrices base_;
    StepFn fn_;
};

/// Prior statistics of the uncertain parameter: mean p_hat, covariance P_pp.
/// Construction accepts any symmetric PSD covariance (asymmetry and negative
/// eigenvalues are tolerated down to -1e-10); operations whose derivation
/// needs a strictly positive definite P_pp enforce that themselves.
struct ParameterPrior {
    Vector p_hat;
    Matrix p_pp;

    ParameterPrior(Vector p_hat_in, Matrix p_pp_in);

    int param_dim() const { return static_cast<int>(p_hat.size()); }
};

/// Symmetric PSD weighting matrix for the desensitized cost.
struct SensitivityWeight {
    Matrix w;

    explicit SensitivityWeight(Matrix w_in);

    static SensitivityWeight zero(int param_dim) {
        return SensitivityWeight(Matrix::Zero(param_dim, param_dim));
    }
};

/// Everything needed to run a filter or a simulation campaign.
struct Scenario {
    SystemModel model;
    ParameterPrior prior;
    Vector x0_hat;       // initial state estimate
    Matrix p0;           // initial error covariance, symmetric PSD
    Matrix s0;           // initial sensitivity, n x l (normally zero)
    int steps = 0;
    std::uint64_t seed = 0;
};

struct ValidationReport {
    std::vector<std::string> issues;

    bool ok() const { return issues.empty(); }
};

/// Audits the model at indices k = 0 .. horizon-1: matrix shapes against the
/// declared dimensions, symmetry and positive semi-definiteness of Q, symmetry
/// and positive definiteness of R. Never throws; every violation becomes one
/// issue line naming the offending index.
ValidationReport validate_model(const SystemModel& model, int horizon);

/// Named test scenarios.
///
///   SCALAR-1       scalar system, parameter drives both state and propagation
///   SCALAR-2       scalar system, parameter enters the measurement only
///   KF-REDUCTION   parameter fully decoupled; all filters reduce to the KF
///   RANDOM-STABLE(seed,n,m,l)
///                  seeded random system, Phi scaled to spectral radius 0.95,
///                  PSD Q, PD R and P_pp; bit-identical for equal arguments
///
/// Unknown names throw Error naming the identifier.
Scenario builtin_fixture(const std::string& name);

/// Names accepted by builtin_fixture, with one-line descriptions.
std::vector<std::pair<std::string, std::string>> builtin_fixture_catalog();

} // namespace ckf
