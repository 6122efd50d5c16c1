#pragma once

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace hicov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a numerical routine cannot produce a meaningful result
/// (singular systems, non-convergence, non-PSD input beyond tolerance).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
struct SpectralDecomposition {
    Vector eigenvalues;
    Matrix eigenvectors;  // column k pairs with eigenvalues[k]
    double q = 0.0;       // aspect ratio p/n when the spectrum comes from a sample

    static SpectralDecomposition of(const Matrix& symmetric);

    Matrix reconstruct() const;
    Matrix reconstruct(const Vector& replacement_eigenvalues) const;
    Eigen::Index size() const { return eigenvalues.size(); }
};

/// Symmetric p x p matrix with a lazily computed, shared eigendecomposition.
///
/// Construction enforces exact symmetry and finiteness; positive
/// semi-definiteness is checked on demand because it needs the spectrum.
/// Instances are immutable, so copies share the cached decomposition.
class CovarianceMatrix {
public:
    CovarianceMatrix() = default;
    explicit CovarianceMatrix(Matrix entries);

    /// Symmetrizes (A + A^T)/2 before wrapping.
    static CovarianceMatrix symmetrized(const Matrix& entries);
    static CovarianceMatrix identity(Eigen::Index p);

    Eigen::Index dim() const { return entries_.rows(); }
    const Matrix& matrix() const { return entries_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
    double trace() const { return entries_.trace(); }

    const SpectralDecomposition& spectrum() const;
    double min_eigenvalue() const;
    double max_eigenvalue() const;

    /// Smallest eigenvalue >= -1e-10 * largest eigenvalue.
    bool is_psd() const;

private:
    struct Cache {
        std::once_flag once;
        SpectralDecomposition decomposition;
    };

    Matrix entries_;
    std::shared_ptr<Cache> cache_;
};

/// p x n observation matrix; column t is one time step.
class DataPanel {
public:
    DataPanel() = default;
    explicit DataPanel(Matrix values);

    Eigen::Index p() const { return values_.rows(); }
    Eigen::Index n() const { return values_.cols(); }
    const Matrix& values() const { return values_; }

    /// Columns [first, first + count).
    DataPanel columns(Eigen::Index first, Eigen::Index count) const;
    /// Copy with every row demeaned.
    DataPanel demeaned() const;

private:
    Matrix values_;
};

/// Clamp eigenvalues below zero to zero and symmetrize. A warning is logged
/// when the repair moves the spectrum by more than 1e-6 of its largest value.
CovarianceMatrix psd_repair(const Matrix& candidate, std::string_view label = {});

}  // namespace hicov
