#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "considerkf/bridge.hpp"
#include "considerkf/sim.hpp"

using namespace ckf;

namespace {

Matrix m1(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

Vector v1(double v) {
    Vector x(1);
    x(0) = v;
    return x;
}

std::vector<Vector> measurements_for(const Scenario& sc) {
    std::vector<Vector> zs;
    zs.reserve(sc.steps);
    for (const TruthRecord& rec : simulate_truth(sc)) {
        zs.push_back(rec.z);
    }
    return zs;
}

} // namespace

TEST_CASE("cross covariance from sensitivity") {
    const ParameterPrior prior(Vector::Zero(2),
                               (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished());

    CHECK(cross_cov_from_sensitivity(Matrix::Zero(3, 2), prior)
              .cwiseAbs()
              .maxCoeff() == 0.0);

    const ParameterPrior identity(Vector::Zero(2), Matrix::Identity(2, 2));
    const Matrix s = (Matrix(2, 2) << 1.0, -2.0, 0.25, 3.0).finished();
    CHECK((cross_cov_from_sensitivity(s, identity) - s).cwiseAbs().maxCoeff() ==
          0.0);

    CHECK_THROWS_AS(cross_cov_from_sensitivity(Matrix::Zero(2, 3), prior),
                    DimensionError);
}

TEST_CASE("lockstep scalar step: sensitivity recursion reproduces the CKF") {
    const Scenario s1 = builtin_fixture("SCALAR-1");

    CkfState ckf{s1.x0_hat, s1.p0, m1(0.0)};
    SmckfState smc{s1.x0_hat, s1.p0, m1(0.0)};

    ckf = ckf_time_update(ckf, s1.model.at(1), s1.prior);
    smc = smckf_time_update(smc, s1.model.at(1), s1.prior);
    CHECK(std::abs(cross_cov_from_sensitivity(smc.s, s1.prior)(0, 0) -
                   ckf.c(0, 0)) <= 1e-15);

    const CkfOutcome oc =
        ckf_measurement_update(ckf, v1(1.0), s1.model.at(1), s1.prior);
    const SmckfOutcome og =
        smckf_measurement_update(smc, v1(1.0), s1.model.at(1), s1.prior);

    // S+ = 1/3 with Ppp = 1 gives exactly the CKF posterior cross-covariance.
    CHECK(std::abs(cross_cov_from_sensitivity(og.state.s, s1.prior)(0, 0) -
                   oc.state.c(0, 0)) <= 1e-14);
    CHECK(std::abs(og.state.s(0, 0) - 1.0 / 3.0) <= 1e-14);
}

TEST_CASE("recover_full_covariance") {
    const ParameterPrior p1(v1(0.0), m1(1.0));

    // Scalar posterior: 5/9 + (1/3)^2 = 2/3, the CKF posterior covariance.
    CHECK(std::abs(recover_full_covariance(m1(5.0 / 9.0), m1(1.0 / 3.0), p1)(0, 0) -
                   2.0 / 3.0) <= 1e-14);

    // Zero sensitivity: recovery is the reduced covariance itself.
    const ParameterPrior p2(Vector::Zero(2), Matrix::Identity(2, 2) * 3.0);
    const Matrix gamma = (Matrix(2, 2) << 2.0, 0.1, 0.1, 1.0).finished();
    CHECK((recover_full_covariance(gamma, Matrix::Zero(2, 2), p2) - gamma)
              .cwiseAbs()
              .maxCoeff() == 0.0);

    // Direct arithmetic: I + (1,0)' * 4 * (1,0) = [[5,0],[0,1]].
    const ParameterPrior p4(v1(0.0), m1(4.0));
    Matrix s(2, 1);
    s << 1.0, 0.0;
    const Matrix full =
        recover_full_covariance(Matrix::Identity(2, 2), s, p4);
    CHECK(full(0, 0) == 5.0);
    CHECK(full(0, 1) == 0.0);
    CHECK(full(1, 0) == 0.0);
    CHECK(full(1, 1) == 1.0);
}

TEST_CASE("equivalence on SCALAR-1 holds to machine precision") {
    Scenario sc = builtin_fixture("SCALAR-1");
    sc.steps = 100;
    sc.seed = 7;
    const EquivalenceReport report =
        run_equivalence(sc, measurements_for(sc));

    CHECK(report.steps == 100);
    CHECK(static_cast<int>(report.per_step.size()) == 100);
    CHECK(report.max_rel_dev_state <= 1e-12);
    CHECK(report.max_rel_dev_gain <= 1e-12);
    CHECK(report.max_rel_dev_cov <= 1e-12);
    CHECK(report.max_rel_dev_cross <= 1e-12);
    for (const DeviationRow& row : report.per_step) {
        CHECK(row.dev_state >= 0.0);
        CHECK(row.dev_gain >= 0.0);
        CHECK(row.dev_cov >= 0.0);
        CHECK(row.dev_cross >= 0.0);
    }
}

TEST_CASE("equivalence at matrix scale over a long horizon") {
    Scenario sc = builtin_fixture("RANDOM-STABLE(42,4,2,3)");
    sc.steps = 1000;
    const EquivalenceReport report =
        run_equivalence(sc, measurements_for(sc));
    CHECK(report.max_deviation() <= 1e-9);
}

TEST_CASE("equivalence holds from a nonzero initial sensitivity") {
    // With s0 = 0.5 the runner derives C0 = 0.5 and Gamma0 = 1 - 0.25 = 0.75;
    // the identities then hold from step zero.
    Scenario sc = builtin_fixture("SCALAR-1");
    sc.s0 = m1(0.5);
    sc.steps = 50;
    sc.seed = 13;
    const EquivalenceReport report =
        run_equivalence(sc, measurements_for(sc));
    CHECK(report.max_deviation() <= 1e-12);
}

TEST_CASE("equivalence trivially exact when the parameter decouples") {
    Scenario sc = builtin_fixture("KF-REDUCTION");
    sc.steps = 50;
    sc.seed = 3;
    const std::vector<Vector> zs = measurements_for(sc);
    const EquivalenceReport report = run_equivalence(sc, zs);
    CHECK(report.max_deviation() <= 1e-14);

    // And every filter equals the plain KF on the same measurements.
    KfState kf{sc.x0_hat, sc.p0};
    CkfState ckf{sc.x0_hat, sc.p0, m1(0.0)};
    for (int k = 1; k <= sc.steps; ++k) {
        const StepMatrices sm = sc.model.at(k);
        kf = kf_time_update(kf, sm);
        ckf = ckf_time_update(ckf, sm, sc.prior);
        kf = kf_measurement_update(kf, zs[k - 1], sm).state;
        ckf = ckf_measurement_update(ckf, zs[k - 1], sm, sc.prior).state;
        CHECK(rel_deviation(ckf.p, kf.p) <= 1e-14);
        CHECK(rel_deviation(ckf.x_hat, kf.x_hat) <= 1e-14);
    }
}

TEST_CASE("per-step identities hold for priors and posteriors") {
    Scenario sc = builtin_fixture("RANDOM-STABLE(11,3,2,2)");
    sc.steps = 200;
    const std::vector<Vector> zs = measurements_for(sc);
    const SensitivityWeight w(sc.prior.p_pp);

    CkfState ckf{sc.x0_hat, sc.p0, Matrix::Zero(3, 2)};
    SdkfState sdkf{sc.x0_hat, sc.p0, Matrix::Zero(3, 2)};
    SmckfState smc{sc.x0_hat, sc.p0, Matrix::Zero(3, 2)};

    for (int k = 1; k <= sc.steps; ++k) {
        const StepMatrices sm = sc.model.at(k);
        ckf = ckf_time_update(ckf, sm, sc.prior);
        sdkf = sdkf_time_update(sdkf, sm, sc.prior);
        smc = smckf_time_update(smc, sm, sc.prior);

        CHECK(rel_deviation(cross_cov_from_sensitivity(smc.s, sc.prior),
                            ckf.c) <= 1e-10);
        CHECK(rel_deviation(recover_full_covariance(smc.gamma, smc.s, sc.prior),
                            ckf.p) <= 1e-10);
        CHECK(rel_deviation(sdkf.p, smc.gamma) <= 1e-10);

        const CkfOutcome oc =
            ckf_measurement_update(ckf, zs[k - 1], sm, sc.prior);
        const SdkfOutcome od =
            sdkf_measurement_update(sdkf, zs[k - 1], sm, sc.prior, w);
        const SmckfOutcome og =
            smckf_measurement_update(smc, zs[k - 1], sm, sc.prior);
        ckf = oc.state;
        sdkf = od.state;
        smc = og.state;

        CHECK(rel_deviation(cross_cov_from_sensitivity(smc.s, sc.prior),
                            ckf.c) <= 1e-10);
        CHECK(rel_deviation(recover_full_covariance(smc.gamma, smc.s, sc.prior),
                            ckf.p) <= 1e-10);
        CHECK(rel_deviation(sdkf.p, smc.gamma) <= 1e-10);
        CHECK(rel_deviation(og.full_cov, oc.state.p) <= 1e-10);
    }
}

TEST_CASE("weighting away from Ppp breaks the equivalence") {
    const Scenario s1 = builtin_fixture("SCALAR-1");

    // Step 1 by hand: CKF gain 2/3 vs SDKF gain (1+2)/(1+2+1) = 3/4 with
    // W = 2*Ppp; the gap is exactly 1/12.
    CkfState ckf{s1.x0_hat, s1.p0, m1(0.0)};
    ckf = ckf_time_update(ckf, s1.model.at(1), s1.prior);
    const CkfOutcome oc =
        ckf_measurement_update(ckf, v1(0.2), s1.model.at(1), s1.prior);

    SdkfState sdkf{s1.x0_hat, s1.p0, m1(0.0)};
    sdkf = sdkf_time_update(sdkf, s1.model.at(1), s1.prior);
    const Matrix k_sdkf =
        sdkf_gain(sdkf, s1.model.at(1), SensitivityWeight(m1(2.0)));

    CHECK(std::abs(std::abs(k_sdkf(0, 0) - oc.gain(0, 0)) - 1.0 / 12.0) <=
          1e-14);

    Scenario sc = s1;
    sc.steps = 20;
    sc.seed = 7;
    const EquivalenceReport report = run_equivalence(
        sc, measurements_for(sc), SensitivityWeight(m1(2.0)));
    CHECK(report.per_step.front().dev_gain > 1e-3);
    CHECK(report.max_rel_dev_gain > 1e-3);
}

TEST_CASE("equivalence runner rejects bad inputs") {
    Scenario sc = builtin_fixture("SCALAR-1");
    sc.steps = 10;
    std::vector<Vector> too_few(3, v1(0.0));
    CHECK_THROWS_AS(run_equivalence(sc, too_few), DimensionError);

    // Positive definite parameter covariance is required.
    Scenario degenerate = sc;
    degenerate.prior = ParameterPrior(v1(0.0), m1(0.0));
    std::vector<Vector> zs(10, v1(0.0));
    CHECK_THROWS_AS(run_equivalence(degenerate, zs), Error);
}

TEST_CASE("filter failures carry the step index") {
    // Measurement model collapses at step 3.
    const SystemModel model = SystemModel::time_varying(1, 1, 1, 1, [](int k) {
        StepMatrices sm;
        sm.phi = Matrix::Ones(1, 1);
        sm.psi = Matrix::Ones(1, 1);
        sm.g = Matrix::Ones(1, 1);
        sm.q = Matrix::Zero(1, 1);
        sm.h = k == 3 ? Matrix::Zero(1, 1) : Matrix::Ones(1, 1);
        sm.nmat = Matrix::Zero(1, 1);
        sm.r = k == 3 ? Matrix::Zero(1, 1) : Matrix::Ones(1, 1);
        return sm;
    });
    const Scenario sc{model, ParameterPrior(v1(0.0), m1(1.0)), v1(0.0),
                      m1(1.0), m1(0.0), 5, 1};
    std::vector<Vector> zs(5, v1(0.5));
    CHECK_THROWS_WITH_AS(run_equivalence(sc, zs), doctest::Contains("step 3"),
                         Error);
}
