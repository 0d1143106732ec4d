#include "considerkf/model.hpp"

#include <Eigen/Eigenvalues>

#include <cctype>
#include <sstream>
#include <utility>

#include "considerkf/rng.hpp"

namespace ckf {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kEigenvalueFloor = -1e-10;

void require_shape(const Matrix& m, int rows, int cols, const char* label) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << label << " dimension mismatch: expected " << rows << "x" << cols
           << ", got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

Matrix random_matrix(RngStream& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = rng.normal();
        }
    }
    return m;
}

double spectral_radius(const Matrix& a) {
    const Eigen::EigenSolver<Matrix> es(a);
    double rho = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        rho = std::max(rho, std::abs(es.eigenvalues()(i)));
    }
    return rho;
}

Matrix scalar_matrix(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

Scenario scalar_fixture(double psi, double nmat) {
    StepMatrices sm;
    sm.phi = scalar_matrix(1.0);
    sm.psi = scalar_matrix(psi);
    sm.g = scalar_matrix(1.0);
    sm.q = scalar_matrix(0.0);
    sm.h = scalar_matrix(1.0);
    sm.nmat = scalar_matrix(nmat);
    sm.r = scalar_matrix(1.0);

    return Scenario{SystemModel::constant(std::move(sm)),
                    ParameterPrior(Vector::Zero(1), scalar_matrix(1.0)),
                    Vector::Zero(1),
                    scalar_matrix(1.0),
                    scalar_matrix(0.0),
                    100,
                    1};
}

Scenario random_stable_fixture(std::uint64_t seed, int n, int m, int l) {
    if (n < 1 || m < 1 || l < 1) {
        throw Error("RANDOM-STABLE dimensions must be at least 1");
    }
    // Mix the dimensions into the stream so every (seed, n, m, l) tuple gets
    // its own matrix draws.
    const std::uint64_t dims = static_cast<std::uint64_t>(n) * 10000 +
                               static_cast<std::uint64_t>(m) * 100 +
                               static_cast<std::uint64_t>(l);
    RngStream rng(seed, dims, channel::fixture);

    const int q = n;
    StepMatrices sm;
    Matrix raw = random_matrix(rng, n, n);
    double rho = spectral_radius(raw);
    while (rho == 0.0) {
        raw = random_matrix(rng, n, n);
        rho = spectral_radius(raw);
    }
    sm.phi = raw * (0.95 / rho);
    sm.psi = random_matrix(rng, n, l);
    sm.g = random_matrix(rng, n, q);
    const Matrix a = random_matrix(rng, q, q);
    sm.q = a * a.transpose() / static_cast<double>(q);
    sm.h = random_matrix(rng, m, n);
    sm.nmat = random_matrix(rng, m, l);
    const Matrix b = random_matrix(rng, m, m);
    sm.r = b * b.transpose() + 0.1 * Matrix::Identity(m, m);

    const Matrix c = random_matrix(rng, l, l);
    const Matrix ppp = c * c.transpose() + 0.1 * Matrix::Identity(l, l);
    const Vector p_hat = random_matrix(rng, l, 1).col(0);
    const Vector x0 = random_matrix(rng, n, 1).col(0);
    const Matrix d = random_matrix(rng, n, n);
    const Matrix p0 = d * d.transpose() + 0.1 * Matrix::Identity(n, n);

    return Scenario{SystemModel::constant(std::move(sm)),
                    ParameterPrior(p_hat, ppp),
                    x0,
                    p0,
                    Matrix::Zero(n, l),
                    100,
                    seed};
}

/// Parses "RANDOM-STABLE(seed,n,m,l)"; returns false if the name is not a
/// RANDOM-STABLE reference at all.
bool parse_random_stable(const std::string& name, std::uint64_t& seed, int& n,
                         int& m, int& l) {
    const std::string prefix = "RANDOM-STABLE(";
    if (name.rfind(prefix, 0) != 0) {
        return false;
    }
    if (name.back() != ')') {
        throw Error("malformed fixture reference '" + name + "'");
    }
    const std::string args =
        name.substr(prefix.size(), name.size() - prefix.size() - 1);
    std::istringstream is(args);
    long long vals[4];
    char sep = ',';
    for (int i = 0; i < 4; ++i) {
        if (i > 0) {
            is >> sep;
            if (sep != ',') {
                throw Error("malformed fixture reference '" + name + "'");
            }
        }
        if (!(is >> vals[i])) {
            throw Error("malformed fixture reference '" + name + "'");
        }
    }
    std::string rest;
    is >> rest;
    if (!rest.empty() || vals[0] < 0) {
        throw Error("malformed fixture reference '" + name + "'");
    }
    seed = static_cast<std::uint64_t>(vals[0]);
    n = static_cast<int>(vals[1]);
    m = static_cast<int>(vals[2]);
    l = static_cast<int>(vals[3]);
    return true;
}

} // namespace

SystemModel SystemModel::constant(StepMatrices step) {
    SystemModel model;
    model.n_ = static_cast<int>(step.phi.rows());
    model.m_ = static_cast<int>(step.h.rows());
    model.l_ = static_cast<int>(step.psi.cols());
    model.q_ = static_cast<int>(step.g.cols());
    model.constant_ = true;

    require_shape(step.phi, model.n_, model.n_, "phi");
    require_shape(step.psi, model.n_, model.l_, "psi");
    require_shape(step.g, model.n_, model.q_, "g");
    require_shape(step.q, model.q_, model.q_, "q");
    require_shape(step.h, model.m_, model.n_, "h");
    require_shape(step.nmat, model.m_, model.l_, "nmat");
    require_shape(step.r, model.m_, model.m_, "r");

    model.base_ = std::move(step);
    return model;
}

SystemModel SystemModel::time_varying(int state_dim, int meas_dim,
                                      int param_dim, int noise_dim,
                                      StepFn fn) {
    SystemModel model;
    model.n_ = state_dim;
    model.m_ = meas_dim;
    model.l_ = param_dim;
    model.q_ = noise_dim;
    model.constant_ = false;
    model.fn_ = std::move(fn);
    return model;
}

StepMatrices SystemModel::at(int k) const {
    return constant_ ? base_ : fn_(k);
}

ParameterPrior::ParameterPrior(Vector p_hat_in, Matrix p_pp_in)
    : p_hat(std::move(p_hat_in)), p_pp(std::move(p_pp_in)) {
    const auto l = p_hat.size();
    if (p_pp.rows() != l || p_pp.cols() != l) {
        throw DimensionError("ParameterPrior: p_pp must be l x l");
    }
    if (max_asymmetry(p_pp) > kSymmetryTol) {
        throw Error("ParameterPrior: p_pp is not symmetric");
    }
    if (min_eigenvalue(p_pp) < kEigenvalueFloor) {
        throw Error("ParameterPrior: p_pp is not positive semi-definite");
    }
}

SensitivityWeight::SensitivityWeight(Matrix w_in) : w(std::move(w_in)) {
    if (w.rows() != w.cols()) {
        throw DimensionError("SensitivityWeight: matrix must be square");
    }
    if (max_asymmetry(w) > kSymmetryTol) {
        throw Error("SensitivityWeight: matrix is not symmetric");
    }
    if (min_eigenvalue(w) < kEigenvalueFloor) {
        throw Error("SensitivityWeight: matrix is not positive semi-definite");
    }
}

ValidationReport validate_model(const SystemModel& model, int horizon) {
    ValidationReport report;
    if (horizon < 1) {
        report.issues.push_back("horizon must be at least 1");
        return report;
    }

    const int n = model.state_dim();
    const int m = model.meas_dim();
    const int l = model.param_dim();
    const int q = model.noise_dim();

    for (int k = 0; k < horizon; ++k) {
        const StepMatrices sm = model.at(k);

        auto check_shape = [&](const Matrix& mat, int rows, int cols,
                               const char* label) {
            if (mat.rows() != rows || mat.cols() != cols) {
                std::ostringstream os;
                os << label << " dimension mismatch at k=" << k << ": expected "
                   << rows << "x" << cols << ", got " << mat.rows() << "x"
                   << mat.cols();
                report.issues.push_back(os.str());
                return false;
            }
            return true;
        };

        check_shape(sm.phi, n, n, "phi");
        check_shape(sm.psi, n, l, "psi");
        const bool g_ok = check_shape(sm.g, n, q, "g");
        const bool q_ok = check_shape(sm.q, q, q, "Q");
        check_shape(sm.h, m, n, "h");
        check_shape(sm.nmat, m, l, "nmat");
        const bool r_ok = check_shape(sm.r, m, m, "R");
        (void)g_ok;

        if (q_ok) {
            if (max_asymmetry(sm.q) > kSymmetryTol) {
                report.issues.push_back("Q not symmetric at k=" +
                                        std::to_string(k));
            } else if (min_eigenvalue(sm.q) < kEigenvalueFloor) {
                report.issues.push_back("Q not positive semi-definite at k=" +
                                        std::to_string(k));
            }
        }
        if (r_ok) {
            if (max_asymmetry(sm.r) > kSymmetryTol) {
                report.issues.push_back("R not symmetric at k=" +
                                        std::to_string(k));
            } else if (min_eigenvalue(sm.r) <=
                       1e-12 * std::max(sm.r.trace(), 0.0)) {
                report.issues.push_back("R not positive definite at k=" +
                                        std::to_string(k));
            }
        }

        if (model.is_constant()) {
            break; // one index tells the whole story
        }
    }
    return report;
}

Scenario builtin_fixture(const std::string& name) {
    if (name == "SCALAR-1") {
        return scalar_fixture(1.0, 0.0);
    }
    if (name == "SCALAR-2") {
        return scalar_fixture(0.0, 1.0);
    }
    if (name == "KF-REDUCTION") {
        return scalar_fixture(0.0, 0.0);
    }

    // Strip blanks so "RANDOM-STABLE(42, 4, 2, 3)" works too.
    std::string compact;
    compact.reserve(name.size());
    for (const char ch : name) {
        if (!std::isspace(static_cast<unsigned char>(ch))) {
            compact.push_back(ch);
        }
    }
    std::uint64_t seed = 0;
    int n = 0, m = 0, l = 0;
    if (parse_random_stable(compact, seed, n, m, l)) {
        return random_stable_fixture(seed, n, m, l);
    }
    throw Error("unknown fixture '" + name + "'");
}

std::vector<std::pair<std::string, std::string>> builtin_fixture_catalog() {
    return {
        {"SCALAR-1",
         "scalar system; parameter drives the state and the covariance"},
        {"SCALAR-2", "scalar system; parameter enters the measurement only"},
        {"KF-REDUCTION",
         "scalar system with the parameter fully decoupled (plain KF)"},
        {"RANDOM-STABLE(seed,n,m,l)",
         "seeded stable random system: spectral radius 0.95, PSD Q, PD R/Ppp"},
    };
}

} // namespace ckf
