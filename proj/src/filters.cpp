#include "considerkf/filters.hpp"

#include <Eigen/Cholesky>

namespace ckf {

namespace {

void require(bool cond, const char* what) {
    if (!cond) {
        throw DimensionError(what);
    }
}

void check_state_dims(const Vector& x, const Matrix& p,
                      const StepMatrices& sm) {
    const auto n = x.size();
    require(p.rows() == n && p.cols() == n, "state covariance must be n x n");
    require(sm.phi.rows() == n && sm.phi.cols() == n, "phi must be n x n");
    require(sm.g.rows() == n && sm.g.cols() == sm.q.rows(),
            "g must be n x q and match Q");
    require(sm.q.rows() == sm.q.cols(), "Q must be square");
}

void check_param_dims(const Matrix& coupling, const ParameterPrior& prior,
                      const StepMatrices& sm, Eigen::Index n) {
    const auto l = prior.p_hat.size();
    require(coupling.rows() == n && coupling.cols() == l,
            "sensitivity/cross-covariance must be n x l");
    require(sm.psi.rows() == n && sm.psi.cols() == l, "psi must be n x l");
    require(sm.nmat.cols() == l, "nmat must have l columns");
}

void check_meas_dims(const Vector& z, const StepMatrices& sm, Eigen::Index n) {
    const auto m = z.size();
    require(sm.h.rows() == m && sm.h.cols() == n, "h must be m x n");
    require(sm.r.rows() == m && sm.r.cols() == m, "R must be m x m");
    require(sm.nmat.rows() == m, "nmat must have m rows");
}

/// Solves K·A = B for K with A symmetric positive definite, checking A first.
Matrix solve_gain(const Matrix& a, const Matrix& b, const char* label) {
    require_spd(a, label);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrixError(std::string(label) +
                                  " factorization failed");
    }
    return llt.solve(b.transpose()).transpose();
}

} // namespace

// ---------------------------------------------------------------------------
// Standard KF
// ---------------------------------------------------------------------------

KfState kf_time_update(const KfState& state, const StepMatrices& sm) {
    check_state_dims(state.x_hat, state.p, sm);
    KfState out;
    out.x_hat = sm.phi * state.x_hat;
    out.p = symmetrize(sm.phi * state.p * sm.phi.transpose() +
                       sm.g * sm.q * sm.g.transpose());
    return out;
}

KfOutcome kf_measurement_update(const KfState& state, const Vector& z,
                                const StepMatrices& sm) {
    const auto n = state.x_hat.size();
    check_meas_dims(z, sm, n);

    const Matrix omega =
        symmetrize(sm.h * state.p * sm.h.transpose() + sm.r);
    const Matrix gain = solve_gain(omega, state.p * sm.h.transpose(),
                                   "innovation covariance");
    const Vector innovation = z - sm.h * state.x_hat;

    KfState out;
    out.x_hat = state.x_hat + gain * innovation;
    out.p = symmetrize((Matrix::Identity(n, n) - gain * sm.h) * state.p);
    return KfOutcome{std::move(out), gain, innovation, omega};
}

// ---------------------------------------------------------------------------
// Consider Kalman filter
// ---------------------------------------------------------------------------

CkfState ckf_time_update(const CkfState& state, const StepMatrices& sm,
                         const ParameterPrior& prior) {
    check_state_dims(state.x_hat, state.p, sm);
    check_param_dims(state.c, prior, sm, state.x_hat.size());

    const Matrix phi_c_psi = sm.phi * state.c * sm.psi.transpose();
    CkfState out;
    out.x_hat = sm.phi * state.x_hat + sm.psi * prior.p_hat;
    out.p = symmetrize(sm.phi * state.p * sm.phi.transpose() + phi_c_psi +
                       phi_c_psi.transpose() +
                       sm.psi * prior.p_pp * sm.psi.transpose() +
                       sm.g * sm.q * sm.g.transpose());
    out.c = sm.phi * state.c + sm.psi * prior.p_pp;
    return out;
}

CkfOutcome ckf_measurement_update(const CkfState& state, const Vector& z,
                                  const StepMatrices& sm,
                                  const ParameterPrior& prior) {
    const auto n = state.x_hat.size();
    check_meas_dims(z, sm, n);
    check_param_dims(state.c, prior, sm, n);

    const Matrix ph_t = state.p * sm.h.transpose();
    const Matrix cn_t = state.c * sm.nmat.transpose();
    const Matrix hc_n = sm.h * cn_t;
    const Matrix omega =
        symmetrize(sm.h * ph_t + hc_n + hc_n.transpose() +
                   sm.nmat * prior.p_pp * sm.nmat.transpose() + sm.r);
    const Matrix gain = solve_gain(omega, ph_t + cn_t,
                                   "innovation covariance");

    const Vector innovation =
        z - sm.h * state.x_hat - sm.nmat * prior.p_hat;
    const Matrix ikh = Matrix::Identity(n, n) - gain * sm.h;

    CkfState out;
    out.x_hat = state.x_hat + gain * innovation;
    out.p = symmetrize(ikh * state.p -
                       gain * sm.nmat * state.c.transpose());
    out.c = ikh * state.c - gain * sm.nmat * prior.p_pp;
    return CkfOutcome{std::move(out), gain, innovation, omega};
}

// ---------------------------------------------------------------------------
// Desensitized Kalman filter
// ---------------------------------------------------------------------------

SdkfState sdkf_time_update(const SdkfState& state, const StepMatrices& sm,
                           const ParameterPrior& prior) {
    check_state_dims(state.x_hat, state.p, sm);
    check_param_dims(state.s, prior, sm, state.x_hat.size());

    SdkfState out;
    out.x_hat = sm.phi * state.x_hat + sm.psi * prior.p_hat;
    out.s = sm.phi * state.s + sm.psi;
    out.p = symmetrize(sm.phi * state.p * sm.phi.transpose() +
                       sm.g * sm.q * sm.g.transpose());
    return out;
}

Matrix sdkf_gain(const SdkfState& state, const StepMatrices& sm,
                 const SensitivityWeight& w) {
    const auto n = state.x_hat.size();
    require(sm.h.cols() == n, "h must be m x n");
    require(state.s.rows() == n && state.s.cols() == w.w.rows(),
            "sensitivity must be n x l and match W");
    require(sm.nmat.rows() == sm.h.rows() && sm.nmat.cols() == w.w.rows(),
            "nmat must be m x l");

    const Matrix gamma = sm.h * state.s + sm.nmat;
    const Matrix w_gamma_t = w.w * gamma.transpose();
    const Matrix ph_t = state.p * sm.h.transpose();
    const Matrix denom =
        symmetrize(sm.h * ph_t + gamma * w_gamma_t + sm.r);
    return solve_gain(denom, ph_t + state.s * w_gamma_t,
                      "desensitized gain denominator");
}

SdkfOutcome sdkf_measurement_update(const SdkfState& state, const Vector& z,
                                    const StepMatrices& sm,
                                    const ParameterPrior& prior,
                                    const SensitivityWeight& w) {
    const auto n = state.x_hat.size();
    check_meas_dims(z, sm, n);
    check_param_dims(state.s, prior, sm, n);

    const Matrix gamma = sm.h * state.s + sm.nmat;
    const Matrix w_gamma_t = w.w * gamma.transpose();
    const Matrix ph_t = state.p * sm.h.transpose();
    const Matrix denom =
        symmetrize(sm.h * ph_t + gamma * w_gamma_t + sm.r);
    const Matrix gain = solve_gain(denom, ph_t + state.s * w_gamma_t,
                                   "desensitized gain denominator");

    const Vector innovation =
        z - sm.h * state.x_hat - sm.nmat * prior.p_hat;

    SdkfOutcome out;
    out.state.x_hat = state.x_hat + gain * innovation;
    out.state.s = state.s - gain * gamma;
    // Equals the quadratic-form covariance at this gain, with the
    // sensitivity correction folded in.
    out.state.p =
        symmetrize((Matrix::Identity(n, n) - gain * sm.h) * state.p +
                   out.state.s * w_gamma_t * gain.transpose());
    out.gain = gain;
    out.innovation = innovation;
    out.innovation_cov = denom;
    return out;
}

// ---------------------------------------------------------------------------
// Sensitivity-matrix consider filter
// ---------------------------------------------------------------------------

SmckfState smckf_time_update(const SmckfState& state, const StepMatrices& sm,
                             const ParameterPrior& prior) {
    check_state_dims(state.x_hat, state.gamma, sm);
    check_param_dims(state.s, prior, sm, state.x_hat.size());

    SmckfState out;
    out.x_hat = sm.phi * state.x_hat + sm.psi * prior.p_hat;
    out.s = sm.phi * state.s + sm.psi;
    out.gamma = symmetrize(sm.phi * state.gamma * sm.phi.transpose() +
                           sm.g * sm.q * sm.g.transpose());
    return out;
}

SmckfOutcome smckf_measurement_update(const SmckfState& state, const Vector& z,
                                      const StepMatrices& sm,
                                      const ParameterPrior& prior) {
    const auto n = state.x_hat.size();
    check_meas_dims(z, sm, n);
    check_param_dims(state.s, prior, sm, n);

    const Matrix gamma_vec = sm.h * state.s + sm.nmat;
    const Matrix ppp_gamma_t = prior.p_pp * gamma_vec.transpose();
    const Matrix gh_t = state.gamma * sm.h.transpose();
    const Matrix denom =
        symmetrize(sm.h * gh_t + gamma_vec * ppp_gamma_t + sm.r);
    const Matrix gain = solve_gain(denom, gh_t + state.s * ppp_gamma_t,
                                   "reduced innovation covariance");

    const Vector innovation =
        z - sm.h * state.x_hat - sm.nmat * prior.p_hat;

    SmckfOutcome out;
    out.state.x_hat = state.x_hat + gain * innovation;
    out.state.s = state.s - gain * gamma_vec;
    const Matrix correction =
        out.state.s * ppp_gamma_t * gain.transpose();
    out.state.gamma = symmetrize(
        (Matrix::Identity(n, n) - gain * sm.h) * state.gamma + correction);
    out.full_cov = symmetrize(out.state.gamma + out.state.s * prior.p_pp *
                                                    out.state.s.transpose());
    out.gain = gain;
    out.innovation = innovation;
    out.innovation_cov = denom;
    return out;
}

// ---------------------------------------------------------------------------
// Desensitized cost and gradient
// ---------------------------------------------------------------------------

double desensitized_cost(const Matrix& p_minus, const Matrix& s_minus,
                         const Matrix& k_gain, const StepMatrices& sm,
                         const SensitivityWeight& w) {
    const auto n = p_minus.rows();
    require(p_minus.cols() == n, "P must be square");
    require(k_gain.rows() == n && k_gain.cols() == sm.h.rows(),
            "gain must be n x m");

    const Matrix ikh = Matrix::Identity(n, n) - k_gain * sm.h;
    const Matrix p_plus = ikh * p_minus * ikh.transpose() +
                          k_gain * sm.r * k_gain.transpose();
    const Matrix gamma = sm.h * s_minus + sm.nmat;
    const Matrix s_plus = s_minus - k_gain * gamma;
    return p_plus.trace() + (s_plus * w.w * s_plus.transpose()).trace();
}

Matrix desensitized_cost_gradient(const Matrix& p_minus, const Matrix& s_minus,
                                  const Matrix& k_gain, const StepMatrices& sm,
                                  const SensitivityWeight& w) {
    const auto n = p_minus.rows();
    require(p_minus.cols() == n, "P must be square");
    require(k_gain.rows() == n && k_gain.cols() == sm.h.rows(),
            "gain must be n x m");

    const Matrix gamma = sm.h * s_minus + sm.nmat;
    return 2.0 * k_gain * (sm.h * p_minus * sm.h.transpose() + sm.r) -
           2.0 * p_minus * sm.h.transpose() -
           2.0 * s_minus * w.w * gamma.transpose() +
           2.0 * k_gain * gamma * w.w * gamma.transpose();
}

} // namespace ckf
