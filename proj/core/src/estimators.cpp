#include "hicov/estimators.hpp"

#include "hicov/models.hpp"
#include "hicov/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hicov {

namespace {

struct KindName {
    EstimatorKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {EstimatorKind::Naive, "naive"},
    {EstimatorKind::Linear, "linear"},
    {EstimatorKind::Alca, "alca"},
    {EstimatorKind::LP, "lp"},
    {EstimatorKind::Stein, "stein"},
    {EstimatorKind::SymStein, "symstein"},
    {EstimatorKind::Ycm, "ycm"},
    {EstimatorKind::TwoStepLP, "2s-lp"},
    {EstimatorKind::TwoStepStein, "2s-stein"},
    {EstimatorKind::TwoStepSymStein, "2s-symstein"},
    {EstimatorKind::TwoStepYcm, "2s-ycm"},
};

}  // namespace

std::string to_string(EstimatorKind kind) {
    for (const auto& entry : kKindNames) {
        if (entry.kind == kind) return entry.name;
    }
    return "unknown";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
    std::string valid;
    for (const auto& entry : kKindNames) {
        if (name == entry.name) return entry.kind;
        if (!valid.empty()) valid += ", ";
        valid += entry.name;
    }
    throw std::invalid_argument("unknown estimator '" + name + "' (valid: " + valid + ")");
}

const std::vector<EstimatorKind>& all_estimator_kinds() {
    static const std::vector<EstimatorKind> all = [] {
        std::vector<EstimatorKind> out;
        for (const auto& entry : kKindNames) out.push_back(entry.kind);
        return out;
    }();
    return all;
}

void EstimatorSpec::validate() const {
    if (rho_grid_size < 2) throw std::invalid_argument("rho_grid_size must be >= 2");
    if (!(fixed_point_tol > 0.0)) throw std::invalid_argument("fixed_point_tol must be > 0");
    if (fixed_point_max_iter < 1) throw std::invalid_argument("fixed_point_max_iter must be >= 1");
    if (!(stieltjes_eta_scale > 0.0)) throw std::invalid_argument("stieltjes_eta_scale must be > 0");
}

void to_json(nlohmann::json& j, const EstimatorSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)},
                       {"rho_grid_size", spec.rho_grid_size},
                       {"fixed_point_tol", spec.fixed_point_tol},
                       {"fixed_point_max_iter", spec.fixed_point_max_iter},
                       {"stieltjes_eta_scale", spec.stieltjes_eta_scale},
                       {"grid_workers", spec.grid_workers}};
}

void from_json(const nlohmann::json& j, EstimatorSpec& spec) {
    EstimatorSpec out;
    if (j.contains("kind")) out.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
    out.rho_grid_size = j.value("rho_grid_size", out.rho_grid_size);
    out.fixed_point_tol = j.value("fixed_point_tol", out.fixed_point_tol);
    out.fixed_point_max_iter = j.value("fixed_point_max_iter", out.fixed_point_max_iter);
    out.stieltjes_eta_scale = j.value("stieltjes_eta_scale", out.stieltjes_eta_scale);
    out.grid_workers = j.value("grid_workers", out.grid_workers);
    out.validate();
    spec = out;
}

// ---------------------------------------------------------------------------

LinearShrinkage estimate_linear(const DataPanel& panel) {
    const Eigen::Index p = panel.p();
    const auto n = static_cast<double>(panel.n());
    const Matrix& y = panel.values();
    const CovarianceMatrix sample = sample_covariance(panel, false);
    const Matrix& s = sample.matrix();
    const double zeta = s.trace() / static_cast<double>(p);
    const double delta = (s - zeta * Matrix::Identity(p, p)).squaredNorm();
    if (delta == 0.0) return {sample, 0.0};

    // sum_i ||y_i y_i^T - S||_F^2 = sum_i ||y_i||^4 - n ||S||_F^2
    const double fourth = y.colwise().squaredNorm().array().square().sum();
    const double spread = std::max(fourth - n * s.squaredNorm(), 0.0);
    const double beta = spread / (n * n);
    const double alpha = std::clamp(std::min(beta, delta) / delta, 0.0, 1.0);

    Matrix xi = (1.0 - alpha) * s;
    xi.diagonal().array() += alpha * zeta;
    return {CovarianceMatrix::symmetrized(xi), alpha};
}

CovarianceMatrix estimate_alca(const CovarianceMatrix& sample) {
    const Eigen::Index p = sample.dim();
    const Vector variances = sample.matrix().diagonal();
    if ((variances.array() <= 0.0).any()) {
        throw std::invalid_argument("ALCA: sample covariance needs a strictly positive diagonal");
    }
    const Vector sd = variances.cwiseSqrt();
    const Vector inv_sd = sd.cwiseInverse();
    Matrix dissimilarity = 1.0 - (inv_sd.asDiagonal() * sample.matrix() * inv_sd.asDiagonal()).array();
    dissimilarity = 0.5 * (dissimilarity + dissimilarity.transpose());
    dissimilarity.diagonal().setZero();

    const Matrix cophenetic = cophenetic_matrix(alca_dendrogram(dissimilarity));
    const Matrix filtered = sd.asDiagonal() * (1.0 - cophenetic.array()).matrix() * sd.asDiagonal();
    if (p == 1) return CovarianceMatrix(filtered);
    return psd_repair(filtered, "alca");
}

// ---------------------------------------------------------------------------

std::complex<double> stieltjes(const Vector& spectrum, std::complex<double> z) {
    if (z.imag() == 0.0) throw std::invalid_argument("stieltjes: Im(z) must be non-zero");
    if (spectrum.size() == 0) throw std::invalid_argument("stieltjes: empty spectrum");
    std::complex<double> total = 0.0;
    for (Eigen::Index k = 0; k < spectrum.size(); ++k) total += 1.0 / (spectrum(k) - z);
    return total / static_cast<double>(spectrum.size());
}

Vector shrink_eigenvalues(ShrinkageRule rule, const Vector& eigenvalues,
                          const Vector& reference_spectrum, double q, double eta_scale) {
    if (!(q > 0.0)) throw std::invalid_argument("shrinkage: q must be > 0");
    if (!(eta_scale > 0.0)) throw std::invalid_argument("shrinkage: eta_scale must be > 0");
    if (eigenvalues.size() == 0 || reference_spectrum.size() == 0) {
        throw std::invalid_argument("shrinkage: empty spectrum");
    }
    const double reference_top = std::max(reference_spectrum.maxCoeff(), 0.0);
    const double eval_top = std::max(eigenvalues.maxCoeff(), 0.0);
    const double floor = 1e-12 * eval_top;
    const double root_p = std::sqrt(static_cast<double>(reference_spectrum.size()));
    const double tiny = std::max(1e-12 * reference_top, std::numeric_limits<double>::min());

    Vector out(eigenvalues.size());
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
        const double lambda = eigenvalues(k);
        const double eta = eta_scale * std::max(lambda, tiny) / root_p;
        const std::complex<double> g = -stieltjes(reference_spectrum, {lambda, -eta});

        const double lp = lambda / std::norm(1.0 - q + q * lambda * g);
        double denominator = 1.0 - q + 2.0 * q * lambda * g.real();
        if (std::abs(denominator) < 1e-8) denominator = denominator < 0.0 ? -1e-8 : 1e-8;
        const double stein = std::max(lambda / denominator, floor);
        const double lp_floored = std::max(lp, floor);

        switch (rule) {
            case ShrinkageRule::LP: out(k) = lp_floored; break;
            case ShrinkageRule::Stein: out(k) = stein; break;
            case ShrinkageRule::SymStein: out(k) = std::sqrt(lp_floored * stein); break;
        }
    }
    return out;
}

CovarianceMatrix shrink_covariance(ShrinkageRule rule, const CovarianceMatrix& input, double q,
                                   double eta_scale, const Vector* reference_spectrum) {
    const SpectralDecomposition& spectral = input.spectrum();
    const Vector& reference = reference_spectrum ? *reference_spectrum : spectral.eigenvalues;
    const Vector cleaned = shrink_eigenvalues(rule, spectral.eigenvalues, reference, q, eta_scale);
    return CovarianceMatrix(spectral.reconstruct(cleaned));
}

// ---------------------------------------------------------------------------

FixedPointResult ycm_fixed_point(const Matrix& centered, double rho, double tol, int max_iter) {
    const Eigen::Index p = centered.rows();
    const auto n = static_cast<double>(centered.cols());
    if (p < 1 || centered.cols() < 1) throw std::invalid_argument("YCM: empty panel");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("YCM: rho must lie in [0, 1]");

    FixedPointResult result;
    result.estimate = Matrix::Identity(p, p);
    double previous_change = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iter; ++iter) {
        result.iterations = iter;
        Eigen::LLT<Matrix> chol(result.estimate);
        if (chol.info() != Eigen::Success) return result;
        const Matrix whitened = chol.matrixL().solve(centered);
        const Vector quadratic = whitened.colwise().squaredNorm().transpose() / static_cast<double>(p);

        Matrix weighted = centered;
        for (Eigen::Index i = 0; i < centered.cols(); ++i) {
            weighted.col(i) *= quadratic(i) > 0.0 ? 1.0 / quadratic(i) : 0.0;
        }
        Matrix next = ((1.0 - rho) / n) * weighted * centered.transpose();
        next.diagonal().array() += rho;
        next = 0.5 * (next + next.transpose());
        const double trace = next.trace();
        if (!(trace > 0.0) || !next.allFinite()) return result;
        next *= static_cast<double>(p) / trace;

        const double change = (next - result.estimate).norm() / result.estimate.norm();
        if (iter > 3 && change > previous_change * (1.0 + 1e-6)) {
            spdlog::debug("YCM fixed point residual rose at iteration {} (rho={})", iter, rho);
        }
        previous_change = change;
        result.estimate = std::move(next);
        if (change < tol) {
            result.converged = true;
            return result;
        }
    }
    return result;
}

std::vector<double> ycm_rho_grid(Eigen::Index p, Eigen::Index n, int size) {
    if (size < 2) throw std::invalid_argument("YCM: rho grid needs at least 2 points");
    const double lower =
        0.01 + std::max(0.0, 1.0 - static_cast<double>(n) / static_cast<double>(p));
    if (lower > 1.0) throw std::invalid_argument("YCM: rho grid lower bound exceeds 1");
    std::vector<double> grid(static_cast<std::size_t>(size));
    for (int k = 0; k < size; ++k) {
        grid[static_cast<std::size_t>(k)] = lower + (1.0 - lower) * k / (size - 1);
    }
    return grid;
}

namespace {

Matrix demean_rows(const Matrix& x) { return x.colwise() - x.rowwise().mean(); }

std::optional<Vector> internal_mvp(const Matrix& xi) {
    Eigen::LLT<Matrix> chol(xi);
    if (chol.info() != Eigen::Success) return std::nullopt;
    const Vector u = chol.solve(Vector::Ones(xi.rows()));
    const double total = u.sum();
    if (!u.allFinite() || total == 0.0) return std::nullopt;
    return Vector(u / total);
}

}  // namespace

std::optional<double> ycm_split_proxy(const Matrix& centered, double rho, const EstimatorSpec& spec) {
    const Eigen::Index n = centered.cols();
    const Eigen::Index half = n / 2;
    if (half < 1 || n - half < 1) return std::nullopt;
    const Matrix a = demean_rows(centered.leftCols(half));
    const Matrix b = demean_rows(centered.rightCols(n - half));

    const auto fit_a = ycm_fixed_point(a, rho, spec.fixed_point_tol, spec.fixed_point_max_iter);
    if (!fit_a.converged) return std::nullopt;
    const auto fit_b = ycm_fixed_point(b, rho, spec.fixed_point_tol, spec.fixed_point_max_iter);
    if (!fit_b.converged) return std::nullopt;
    const auto w_a = internal_mvp(fit_a.estimate);
    const auto w_b = internal_mvp(fit_b.estimate);
    if (!w_a || !w_b) return std::nullopt;

    // w^T S w = ||X^T w||^2 / m without forming S.
    const double risk_a_on_b = (b.transpose() * *w_a).squaredNorm() / static_cast<double>(b.cols());
    const double risk_b_on_a = (a.transpose() * *w_b).squaredNorm() / static_cast<double>(a.cols());
    return 0.5 * (risk_a_on_b + risk_b_on_a);
}

YcmResult estimate_ycm(const DataPanel& panel, const EstimatorSpec& spec) {
    spec.validate();
    const Matrix centered = demean_rows(panel.values());
    if (centered.squaredNorm() == 0.0) {
        throw std::invalid_argument("YCM: all columns are identical");
    }
    const double target_trace = panel.values().squaredNorm() / static_cast<double>(panel.n());
    const std::vector<double> rhos = ycm_rho_grid(panel.p(), panel.n(), spec.rho_grid_size);

    std::vector<YcmGridPoint> grid(rhos.size());
    parallel_for(rhos.size(), spec.grid_workers, [&](std::size_t k) {
        const auto proxy = ycm_split_proxy(centered, rhos[k], spec);
        grid[k] = {rhos[k], proxy.value_or(std::numeric_limits<double>::quiet_NaN()),
                   proxy.has_value()};
    });

    // Candidates by proxy, lowest rho first on ties.
    std::vector<std::size_t> ranked;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k].converged) ranked.push_back(k);
    }
    if (ranked.empty()) {
        throw NumericalError("YCM: fixed point failed to converge at every rho grid point");
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t l, std::size_t r) { return grid[l].proxy < grid[r].proxy; });

    for (std::size_t k : ranked) {
        auto fit = ycm_fixed_point(centered, grid[k].rho, spec.fixed_point_tol,
                                   spec.fixed_point_max_iter);
        if (!fit.converged) {
            spdlog::warn("YCM: full-sample fixed point did not converge at rho={}, trying next", grid[k].rho);
            continue;
        }
        Matrix xi = fit.estimate * (target_trace / static_cast<double>(panel.p()));
        return {CovarianceMatrix::symmetrized(xi), grid[k].rho, std::move(grid)};
    }
    throw NumericalError("YCM: full-sample fixed point failed at every usable rho");
}

// ---------------------------------------------------------------------------

DataPanel recolor_panel(const DataPanel& panel, const CovarianceMatrix& sample,
                        const CovarianceMatrix& target) {
    if (sample.dim() != panel.p() || target.dim() != panel.p()) {
        throw std::invalid_argument("recolor_panel: dimension mismatch");
    }
    const SpectralDecomposition& spectral = sample.spectrum();
    const double cutoff = 1e-12 * std::max(spectral.eigenvalues(0), 0.0);
    Vector inv_root(spectral.size());
    for (Eigen::Index k = 0; k < spectral.size(); ++k) {
        const double lambda = spectral.eigenvalues(k);
        inv_root(k) = lambda > cutoff ? 1.0 / std::sqrt(lambda) : 0.0;
    }
    const Matrix whitening = spectral.reconstruct(inv_root);
    const Matrix transform = matrix_sqrt(target).matrix() * whitening;
    return DataPanel(transform * panel.values());
}

EstimationWorkspace::EstimationWorkspace(DataPanel panel)
    : panel_(std::move(panel)),
      sample_(sample_covariance(panel_, false)),
      alca_cache_(std::make_shared<AlcaCache>()) {}

const CovarianceMatrix& EstimationWorkspace::alca() const {
    std::call_once(alca_cache_->once, [this] { alca_cache_->value = estimate_alca(sample_); });
    return *alca_cache_->value;
}

CovarianceMatrix estimate_two_step(const EstimationWorkspace& workspace, EstimatorKind inner,
                                   const EstimatorSpec& spec) {
    const CovarianceMatrix& first = workspace.alca();
    const Vector& reference = workspace.sample().spectrum().eigenvalues;
    const double q = workspace.q();
    const double eta = spec.stieltjes_eta_scale;
    switch (inner) {
        case EstimatorKind::LP:
        case EstimatorKind::TwoStepLP:
            return shrink_covariance(ShrinkageRule::LP, first, q, eta, &reference);
        case EstimatorKind::Stein:
        case EstimatorKind::TwoStepStein:
            return shrink_covariance(ShrinkageRule::Stein, first, q, eta, &reference);
        case EstimatorKind::SymStein:
        case EstimatorKind::TwoStepSymStein:
            return shrink_covariance(ShrinkageRule::SymStein, first, q, eta, &reference);
        case EstimatorKind::Ycm:
        case EstimatorKind::TwoStepYcm:
            return estimate_ycm(recolor_panel(workspace.panel(), workspace.sample(), first), spec)
                .estimate;
        default:
            throw std::invalid_argument("two-step inner estimator must be lp, stein, symstein or ycm");
    }
}

CovarianceMatrix estimate(const EstimationWorkspace& workspace, const EstimatorSpec& spec) {
    const double q = workspace.q();
    const double eta = spec.stieltjes_eta_scale;
    switch (spec.kind) {
        case EstimatorKind::Naive: return estimate_naive(workspace.sample());
        case EstimatorKind::Linear: return estimate_linear(workspace.panel()).estimate;
        case EstimatorKind::Alca: return workspace.alca();
        case EstimatorKind::LP: return estimate_lp(workspace.sample(), q, eta);
        case EstimatorKind::Stein: return estimate_stein(workspace.sample(), q, eta);
        case EstimatorKind::SymStein: return estimate_symstein(workspace.sample(), q, eta);
        case EstimatorKind::Ycm: return estimate_ycm(workspace.panel(), spec).estimate;
        case EstimatorKind::TwoStepLP:
        case EstimatorKind::TwoStepStein:
        case EstimatorKind::TwoStepSymStein:
        case EstimatorKind::TwoStepYcm: return estimate_two_step(workspace, spec.kind, spec);
    }
    throw std::logic_error("unhandled estimator kind");
}

CovarianceMatrix estimate(const DataPanel& panel, const EstimatorSpec& spec) {
    return estimate(EstimationWorkspace(panel), spec);
}

}  // namespace hicov
