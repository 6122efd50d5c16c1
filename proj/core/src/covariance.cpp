#include "hicov/covariance.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace hicov {

SpectralDecomposition SpectralDecomposition::of(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("symmetric eigendecomposition failed");
    }
    // Eigen returns ascending order.
    SpectralDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

Matrix SpectralDecomposition::reconstruct() const { return reconstruct(eigenvalues); }

Matrix SpectralDecomposition::reconstruct(const Vector& replacement_eigenvalues) const {
    if (replacement_eigenvalues.size() != eigenvalues.size()) {
        throw std::invalid_argument("reconstruct: eigenvalue count mismatch");
    }
    Matrix out = eigenvectors * replacement_eigenvalues.asDiagonal() * eigenvectors.transpose();
    return 0.5 * (out + out.transpose());
}

CovarianceMatrix::CovarianceMatrix(Matrix entries)
    : entries_(std::move(entries)), cache_(std::make_shared<Cache>()) {
    if (entries_.rows() != entries_.cols()) {
        throw std::invalid_argument("covariance matrix must be square, got " +
                                    std::to_string(entries_.rows()) + "x" +
                                    std::to_string(entries_.cols()));
    }
    if (entries_.rows() == 0) {
        throw std::invalid_argument("covariance matrix must have dimension >= 1");
    }
    if (!entries_.allFinite()) {
        throw std::invalid_argument("covariance matrix has non-finite entries");
    }
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
        for (Eigen::Index i = j + 1; i < entries_.rows(); ++i) {
            if (entries_(i, j) != entries_(j, i)) {
                throw std::invalid_argument("covariance matrix is not symmetric at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

CovarianceMatrix CovarianceMatrix::symmetrized(const Matrix& entries) {
    if (entries.rows() != entries.cols()) {
        throw std::invalid_argument("covariance matrix must be square");
    }
    return CovarianceMatrix(Matrix(0.5 * (entries + entries.transpose())));
}

CovarianceMatrix CovarianceMatrix::identity(Eigen::Index p) {
    return CovarianceMatrix(Matrix::Identity(p, p));
}

const SpectralDecomposition& CovarianceMatrix::spectrum() const {
    if (!cache_) {
        throw std::logic_error("spectrum() on an empty covariance matrix");
    }
    std::call_once(cache_->once,
                   [this] { cache_->decomposition = SpectralDecomposition::of(entries_); });
    return cache_->decomposition;
}

double CovarianceMatrix::min_eigenvalue() const {
    const auto& ev = spectrum().eigenvalues;
    return ev(ev.size() - 1);
}

double CovarianceMatrix::max_eigenvalue() const { return spectrum().eigenvalues(0); }

bool CovarianceMatrix::is_psd() const {
    const double top = std::max(max_eigenvalue(), 0.0);
    return min_eigenvalue() >= -1e-10 * top;
}

DataPanel::DataPanel(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 2) {
        throw std::invalid_argument("data panel needs p >= 1 and n >= 2, got p=" +
                                    std::to_string(values_.rows()) +
                                    " n=" + std::to_string(values_.cols()));
    }
    if (!values_.allFinite()) {
        throw std::invalid_argument("data panel has non-finite values");
    }
}

DataPanel DataPanel::columns(Eigen::Index first, Eigen::Index count) const {
    if (first < 0 || count < 0 || first + count > n()) {
        throw std::out_of_range("panel column slice out of range");
    }
    return DataPanel(values_.middleCols(first, count));
}

DataPanel DataPanel::demeaned() const {
    Matrix centered = values_.colwise() - values_.rowwise().mean();
    return DataPanel(std::move(centered));
}

CovarianceMatrix psd_repair(const Matrix& candidate, std::string_view label) {
    const Matrix sym = 0.5 * (candidate + candidate.transpose());
    auto decomposition = SpectralDecomposition::of(sym);
    const double top = std::max(decomposition.eigenvalues(0), 0.0);
    const double bottom = decomposition.eigenvalues(decomposition.size() - 1);
    if (bottom >= 0.0) {
        return CovarianceMatrix(sym);
    }
    if (-bottom > 1e-6 * top) {
        spdlog::warn("{}: PSD repair clamped eigenvalue {:.3e} (largest {:.3e})",
                     label.empty() ? "estimate" : label, bottom, top);
    }
    Vector clamped = decomposition.eigenvalues.cwiseMax(0.0);
    return CovarianceMatrix(decomposition.reconstruct(clamped));
}

}  // namespace hicov
