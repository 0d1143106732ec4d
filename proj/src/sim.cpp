#include "considerkf/sim.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <string>

#include "considerkf/bridge.hpp"

namespace ckf {

namespace {

struct NoiseFactors {
    Matrix process;     // PSD square root of Q
    Matrix measurement; // PSD square root of R
};

NoiseFactors noise_factors(const StepMatrices& sm) {
    return NoiseFactors{psd_sqrt(sm.q), psd_sqrt(sm.r)};
}

TruthStep step_with_factors(const Vector& x, const Vector& p,
                            const StepMatrices& sm, const NoiseFactors& nf,
                            RngStream& process_rng,
                            RngStream& measurement_rng) {
    TruthStep out;
    out.x_next =
        sm.phi * x + sm.psi * p +
        sm.g * (nf.process *
                process_rng.normal_vector(static_cast<int>(sm.q.rows())));
    out.z = sm.h * out.x_next + sm.nmat * p +
            nf.measurement *
                measurement_rng.normal_vector(static_cast<int>(sm.r.rows()));
    return out;
}

/// Holds the per-scenario factorizations so a campaign pays for them once.
class TruthSampler {
  public:
    explicit TruthSampler(const Scenario& scenario)
        : scenario_(scenario),
          ppp_chol_(
              chol_factor(scenario.prior.p_pp, "parameter covariance")),
          p0_sqrt_(psd_sqrt(scenario.p0)) {
        if (scenario.model.is_constant()) {
            constant_step_ = scenario.model.at(1);
            constant_factors_ = noise_factors(*constant_step_);
        }
    }

    std::vector<TruthRecord> run(int run_index) const {
        const Scenario& sc = scenario_;
        const auto run = static_cast<std::uint64_t>(run_index);
        RngStream param_rng(sc.seed, run, channel::parameter);
        RngStream init_rng(sc.seed, run, channel::init_state);
        RngStream process_rng(sc.seed, run, channel::process);
        RngStream meas_rng(sc.seed, run, channel::measurement);

        const Vector p_true =
            sc.prior.p_hat +
            ppp_chol_ * param_rng.normal_vector(sc.prior.param_dim());
        // Truth starts from the filter prior: x0 ~ N(x0_hat, P0).
        Vector x = sc.x0_hat +
                   p0_sqrt_ * init_rng.normal_vector(sc.model.state_dim());

        std::vector<TruthRecord> records;
        records.reserve(sc.steps);
        for (int k = 1; k <= sc.steps; ++k) {
            const StepMatrices sm =
                constant_step_ ? *constant_step_ : sc.model.at(k);
            const NoiseFactors nf =
                constant_factors_ ? *constant_factors_ : noise_factors(sm);
            const TruthStep step =
                step_with_factors(x, p_true, sm, nf, process_rng, meas_rng);
            x = step.x_next;
            records.push_back(TruthRecord{k, x, step.z, p_true});
        }
        return records;
    }

  private:
    const Scenario& scenario_;
    Matrix ppp_chol_;
    Matrix p0_sqrt_;
    std::optional<StepMatrices> constant_step_;
    std::optional<NoiseFactors> constant_factors_;
};

} // namespace

Vector sample_parameter(const ParameterPrior& prior, RngStream& rng) {
    const Matrix factor = chol_factor(prior.p_pp, "parameter covariance");
    return prior.p_hat + factor * rng.normal_vector(prior.param_dim());
}

TruthStep step_truth(const Vector& x, const Vector& p, const StepMatrices& sm,
                     RngStream& process_rng, RngStream& measurement_rng) {
    if (sm.phi.cols() != x.size() || sm.psi.cols() != p.size()) {
        throw DimensionError("step_truth: state/parameter dimension mismatch");
    }
    return step_with_factors(x, p, sm, noise_factors(sm), process_rng,
                             measurement_rng);
}

std::vector<TruthRecord> simulate_truth(const Scenario& scenario,
                                        int run_index) {
    return TruthSampler(scenario).run(run_index);
}

double nees(const Vector& error, const Matrix& p) {
    if (p.rows() != error.size() || p.cols() != error.size()) {
        throw DimensionError("nees: covariance must match the error vector");
    }
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrixError("nees: covariance is not positive definite");
    }
    return error.dot(llt.solve(error));
}

std::string filter_name(FilterKind kind) {
    switch (kind) {
    case FilterKind::Kf:
        return "KF";
    case FilterKind::Ckf:
        return "CKF";
    case FilterKind::Sdkf:
        return "SDKF";
    case FilterKind::Smckf:
        return "SMCKF";
    }
    return "?";
}

McReport run_monte_carlo(const Scenario& scenario, int runs,
                         const std::vector<FilterKind>& filters,
                         const std::optional<SensitivityWeight>& sdkf_weight) {
    if (runs < 1) {
        throw Error("runs must be >= 1");
    }
    if (filters.empty()) {
        throw Error("at least one filter must be requested");
    }

    const ParameterPrior& prior = scenario.prior;
    const int n = scenario.model.state_dim();
    const int steps = scenario.steps;

    const SensitivityWeight w =
        sdkf_weight.value_or(SensitivityWeight(prior.p_pp));
    const bool weight_is_prior =
        w.w.rows() == prior.p_pp.rows() && w.w.isApprox(prior.p_pp, 1e-12);

    struct Accumulator {
        Vector err_sq;
        Vector nees_per_step;
        double nees_total = 0.0;
    };
    std::vector<Accumulator> acc(filters.size());
    for (auto& a : acc) {
        a.err_sq = Vector::Zero(n);
        a.nees_per_step = Vector::Zero(steps);
    }

    const TruthSampler sampler(scenario);
    for (int run = 0; run < runs; ++run) {
        const std::vector<TruthRecord> truth = sampler.run(run);

        KfState kf{scenario.x0_hat, scenario.p0};
        CkfState ckf{scenario.x0_hat, scenario.p0,
                     scenario.s0 * prior.p_pp};
        SdkfState sdkf{scenario.x0_hat,
                       symmetrize(scenario.p0 - scenario.s0 * w.w *
                                                    scenario.s0.transpose()),
                       scenario.s0};
        SmckfState smc{scenario.x0_hat,
                       symmetrize(scenario.p0 -
                                  scenario.s0 * prior.p_pp *
                                      scenario.s0.transpose()),
                       scenario.s0};

        for (const TruthRecord& rec : truth) {
            const StepMatrices sm = scenario.model.at(rec.k);
            try {
                for (std::size_t f = 0; f < filters.size(); ++f) {
                    Vector x_hat;
                    Matrix cov;
                    switch (filters[f]) {
                    case FilterKind::Kf: {
                        // Parameter-blind baseline: the KF steps ignore the
                        // psi/nmat feed-through while the truth keeps it.
                        kf = kf_time_update(kf, sm);
                        const KfOutcome o = kf_measurement_update(kf, rec.z, sm);
                        kf = o.state;
                        x_hat = kf.x_hat;
                        cov = kf.p;
                        break;
                    }
                    case FilterKind::Ckf: {
                        ckf = ckf_time_update(ckf, sm, prior);
                        const CkfOutcome o =
                            ckf_measurement_update(ckf, rec.z, sm, prior);
                        ckf = o.state;
                        x_hat = ckf.x_hat;
                        cov = ckf.p;
                        break;
                    }
                    case FilterKind::Sdkf: {
                        sdkf = sdkf_time_update(sdkf, sm, prior);
                        const SdkfOutcome o = sdkf_measurement_update(
                            sdkf, rec.z, sm, prior, w);
                        sdkf = o.state;
                        x_hat = sdkf.x_hat;
                        cov = weight_is_prior
                                  ? recover_full_covariance(sdkf.p, sdkf.s,
                                                            prior)
                                  : sdkf.p;
                        break;
                    }
                    case FilterKind::Smckf: {
                        smc = smckf_time_update(smc, sm, prior);
                        const SmckfOutcome o =
                            smckf_measurement_update(smc, rec.z, sm, prior);
                        smc = o.state;
                        x_hat = smc.x_hat;
                        cov = o.full_cov;
                        break;
                    }
                    }

                    const Vector err = x_hat - rec.x_true;
                    acc[f].err_sq += err.cwiseProduct(err);
                    const double nv = nees(err, cov);
                    acc[f].nees_per_step(rec.k - 1) += nv;
                    acc[f].nees_total += nv;
                }
            } catch (const Error& e) {
                throw Error("monte carlo run " + std::to_string(run) +
                            ", step " + std::to_string(rec.k) + ": " +
                            e.what());
            }
        }
    }

    McReport report;
    report.runs = runs;
    report.steps = steps;
    const double samples = static_cast<double>(runs) * steps;
    for (std::size_t f = 0; f < filters.size(); ++f) {
        FilterMetrics metrics;
        metrics.kind = filters[f];
        metrics.rmse = (acc[f].err_sq / samples).cwiseSqrt();
        metrics.mean_nees = acc[f].nees_per_step / static_cast<double>(runs);
        metrics.avg_nees = acc[f].nees_total / samples;
        metrics.calibrated_covariance =
            filters[f] != FilterKind::Sdkf || weight_is_prior;
        report.filters.push_back(std::move(metrics));
    }
    return report;
}

} // namespace ckf
