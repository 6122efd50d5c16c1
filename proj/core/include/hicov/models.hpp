#pragma once

#include "hicov/covariance.hpp"
#include "hicov/rng.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace hicov {

enum class ModelKind { Nested, OneFactor, Diagonal };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct EigenvalueFraction {
    double eigenvalue;
    double fraction;
};

/// Population covariance model and its data-generating distribution.
struct ModelSpec {
    ModelKind kind = ModelKind::Nested;
    int p = 100;
    double gamma = 0.1;
    double sigma = 0.16;
    double sigma_r = 0.2;
    int dof = 3;
    std::vector<EigenvalueFraction> diag_fractions{{1.0, 0.2}, {3.0, 0.4}, {10.0, 0.4}};

    void validate() const;
};

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

struct FactorModel {
    CovarianceMatrix sigma;
    Vector loadings;
};

/// Completely nested hierarchical model: entry(i,j) = (p + 1 - max(i,j)) * gamma^2
/// for 1-based i, j, which equals L L^T for the anti-triangular all-gamma L.
CovarianceMatrix build_nested_sigma(int p, double gamma);

/// One-factor model sigma^2 b b^T + sigma_r^2 I with b ~ U(0.5, 1.5).
FactorModel build_factor_sigma(int p, double sigma, double sigma_r, Rng& rng);
CovarianceMatrix build_factor_sigma(const Vector& loadings, double sigma, double sigma_r);

/// Diagonal model with eigenvalue groups of the given fractions. Group sizes
/// are round(fraction * p); any remainder goes to the largest-fraction group
/// (first one listed on ties). The diagonal is sorted in descending order.
CovarianceMatrix build_diagonal_sigma(int p, const std::vector<EigenvalueFraction>& fractions);

/// Population covariance for a model spec. One-factor models draw fresh loadings.
CovarianceMatrix build_sigma(const ModelSpec& spec, Rng& rng);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-10 * lambda_max, 0) are clamped to zero; anything more negative throws.
CovarianceMatrix matrix_sqrt(const CovarianceMatrix& sigma);

struct NoiseDistribution {
    enum class Kind { Gaussian, StudentT } kind = Kind::Gaussian;
    int dof = 3;

    static NoiseDistribution gaussian() { return {}; }
    static NoiseDistribution student_t(int dof) { return {Kind::StudentT, dof}; }
};

NoiseDistribution noise_for(const ModelSpec& spec);

/// Draws Y = sqrt(Sigma) X with X i.i.d. unit-variance entries. Student-t
/// entries are scaled by sqrt((d - 2) / d).
DataPanel sample_panel(const CovarianceMatrix& sigma, int n, NoiseDistribution dist, Rng& rng);
DataPanel sample_panel_with_root(const CovarianceMatrix& root, int n, NoiseDistribution dist,
                                 Rng& rng);

/// (1/n) Y Y^T; with `centered` the rows are demeaned first (divisor stays n).
CovarianceMatrix sample_covariance(const DataPanel& panel, bool centered);

/// det(Sigma - lambda I) for the nested model, evaluated with the tridiagonal
/// recurrence D_k = a D_{k-1} - lambda^2 D_{k-2}, a = gamma^2 - 2 lambda, and
/// last pivot gamma^2 - lambda.
double nested_characteristic_determinant(int p, double gamma, double lambda);

/// Eigenvalues of the nested model, descending, from the tridiagonal
/// characteristic polynomial. Roots are isolated by Sturm counts on the same
/// recurrence and refined by bisection.
std::vector<double> nested_sigma_eigenvalues(int p, double gamma);

}  // namespace hicov
