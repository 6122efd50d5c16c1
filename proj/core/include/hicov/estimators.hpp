#pragma once

#include "hicov/clustering.hpp"
#include "hicov/covariance.hpp"

#include <nlohmann/json.hpp>

#include <complex>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace hicov {

enum class EstimatorKind {
    Naive,
    Linear,
    Alca,
    LP,
    Stein,
    SymStein,
    Ycm,
    TwoStepLP,
    TwoStepStein,
    TwoStepSymStein,
    TwoStepYcm,
};

/// CLI vocabulary: naive, linear, alca, lp, stein, symstein, ycm, 2s-lp, ...
std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);
const std::vector<EstimatorKind>& all_estimator_kinds();

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::Naive;
    int rho_grid_size = 20;
    double fixed_point_tol = 1e-8;
    int fixed_point_max_iter = 500;
    double stieltjes_eta_scale = 1.0;
    /// Threads used for the YCM rho grid; 1 keeps the search sequential.
    unsigned grid_workers = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const EstimatorSpec& spec);
void from_json(const nlohmann::json& j, EstimatorSpec& spec);

// ---------------------------------------------------------------------------
// Sample-based estimators

inline CovarianceMatrix estimate_naive(const CovarianceMatrix& sample) { return sample; }

struct LinearShrinkage {
    CovarianceMatrix estimate;
    double alpha;
};

/// Shrinks S = (1/n) Y Y^T toward zeta I, zeta = tr(S)/p, with the
/// Ledoit-Wolf intensity
///   alpha = min(beta, delta) / delta,
///   beta  = (1/n^2) sum_i ||Y_i Y_i^T - S||_F^2,  delta = ||S - zeta I||_F^2.
/// An isotropic S (delta == 0) is returned unchanged.
LinearShrinkage estimate_linear(const DataPanel& panel);

/// Average-linkage filtering of the correlation structure:
/// Xi = H^{1/2} (1 1^T - D_coph) H^{1/2}, where D_coph is the cophenetic
/// matrix of the average-linkage dendrogram of D = 1 1^T - C.
CovarianceMatrix estimate_alca(const CovarianceMatrix& sample);

// ---------------------------------------------------------------------------
// Rotationally invariant (eigenvalue-only) estimators

/// G(z) = (1/p) sum_k 1 / (lambda_k - z).
std::complex<double> stieltjes(const Vector& spectrum, std::complex<double> z);
inline std::complex<double> stieltjes(const SpectralDecomposition& spec, std::complex<double> z) {
    return stieltjes(spec.eigenvalues, z);
}

enum class ShrinkageRule { LP, Stein, SymStein };

/// Cleaned eigenvalues for `eigenvalues` using the Stieltjes transform of
/// `reference_spectrum` (the noisy sample spectrum) at aspect ratio q.
///
/// With z_k = lambda_k - i eta_k and g = -G (resolvent sign):
///   LP:       lambda_k / |1 - q + q lambda_k g(z_k)|^2
///   Stein:    lambda_k / (1 - q + 2 q lambda_k Re g(z_k))
///   SymStein: sqrt(LP * Stein)
/// eta_k = eta_scale * max(lambda_k, 1e-12 lambda_max) / sqrt(p). Stein
/// denominators are kept at least 1e-8 in magnitude (sign preserved) and all
/// results are floored at 1e-12 lambda_max.
Vector shrink_eigenvalues(ShrinkageRule rule, const Vector& eigenvalues,
                          const Vector& reference_spectrum, double q, double eta_scale = 1.0);

/// Applies the rule to the eigenpairs of `input`; the reference spectrum
/// defaults to the input's own spectrum.
CovarianceMatrix shrink_covariance(ShrinkageRule rule, const CovarianceMatrix& input, double q,
                                   double eta_scale = 1.0,
                                   const Vector* reference_spectrum = nullptr);

inline CovarianceMatrix estimate_lp(const CovarianceMatrix& input, double q, double eta_scale = 1.0) {
    return shrink_covariance(ShrinkageRule::LP, input, q, eta_scale);
}
inline CovarianceMatrix estimate_stein(const CovarianceMatrix& input, double q,
                                       double eta_scale = 1.0) {
    return shrink_covariance(ShrinkageRule::Stein, input, q, eta_scale);
}
inline CovarianceMatrix estimate_symstein(const CovarianceMatrix& input, double q,
                                          double eta_scale = 1.0) {
    return shrink_covariance(ShrinkageRule::SymStein, input, q, eta_scale);
}

// ---------------------------------------------------------------------------
// Regularized Tyler fixed point (YCM)

struct FixedPointResult {
    Matrix estimate;  // trace normalized to p
    int iterations = 0;
    bool converged = false;
};

/// Iterates Xi <- (1-rho)/n sum_i x_i x_i^T / ((1/p) x_i^T Xi^{-1} x_i) + rho I
/// from Xi = I, renormalizing to trace p, until the relative Frobenius change
/// drops below `tol`. `centered` holds demeaned observations as columns.
FixedPointResult ycm_fixed_point(const Matrix& centered, double rho, double tol, int max_iter);

struct YcmGridPoint {
    double rho;
    double proxy;  // NaN when the point was skipped
    bool converged;
};

struct YcmResult {
    CovarianceMatrix estimate;
    double rho_hat;
    std::vector<YcmGridPoint> grid;
};

/// Uniform rho grid of `size` points over [0.01 + max(0, 1 - n/p), 1].
std::vector<double> ycm_rho_grid(Eigen::Index p, Eigen::Index n, int size);

/// Split-sample realized-risk proxy for a given rho: fit on one half of the
/// columns, take the MVP weights, score them on the other half's sample
/// covariance, and average both orientations. Empty when a fit fails.
std::optional<double> ycm_split_proxy(const Matrix& centered, double rho, const EstimatorSpec& spec);

/// Full estimator: rho grid search on the proxy, then the fixed point on all
/// columns at rho_hat, rescaled to the trace of (1/n) Y Y^T.
YcmResult estimate_ycm(const DataPanel& panel, const EstimatorSpec& spec);

// ---------------------------------------------------------------------------
// Two-step estimators

/// Z = target^{1/2} S^{+1/2} Y with S = (1/n) Y Y^T (pseudo-inverse root,
/// cutoff 1e-12 lambda_max). When S is non-singular (1/n) Z Z^T == target.
DataPanel recolor_panel(const DataPanel& panel, const CovarianceMatrix& sample,
                        const CovarianceMatrix& target);

/// Caches the pieces shared by several estimators on one panel. The ALCA
/// filter is computed once on first use and is safe to request concurrently.
class EstimationWorkspace {
public:
    explicit EstimationWorkspace(DataPanel panel);

    const DataPanel& panel() const { return panel_; }
    const CovarianceMatrix& sample() const { return sample_; }
    const CovarianceMatrix& alca() const;
    double q() const { return static_cast<double>(panel_.p()) / static_cast<double>(panel_.n()); }

private:
    DataPanel panel_;
    CovarianceMatrix sample_;
    struct AlcaCache {
        std::once_flag once;
        std::optional<CovarianceMatrix> value;
    };
    std::shared_ptr<AlcaCache> alca_cache_;
};

CovarianceMatrix estimate_two_step(const EstimationWorkspace& workspace, EstimatorKind inner,
                                   const EstimatorSpec& spec);

/// Dispatches on spec.kind. The sample covariance is (1/n) Y Y^T of the panel
/// as given; callers demean empirical panels beforehand.
CovarianceMatrix estimate(const EstimationWorkspace& workspace, const EstimatorSpec& spec);
CovarianceMatrix estimate(const DataPanel& panel, const EstimatorSpec& spec);

}  // namespace hicov
