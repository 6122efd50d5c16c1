#pragma once

#include "hicov/covariance.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace hicov {

/// Capital allocation; entries sum to one within 1e-10.
class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(Vector weights);

    const Vector& values() const { return weights_; }
    Eigen::Index size() const { return weights_.size(); }
    double operator[](Eigen::Index i) const { return weights_(i); }

private:
    Vector weights_;
};

enum class Strategy { Mvp, MvpLongOnly, Hrp, Uniform };

/// Vocabulary: mvp, mvp+, hrp, uniform.
std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);
const std::vector<Strategy>& all_strategies();

/// Raised when a covariance estimate cannot be inverted for allocation.
class SingularCovarianceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Xi^{-1} 1 / (1^T Xi^{-1} 1) via a Cholesky solve. Condition numbers above
/// 1e14 are rejected; `source` names the estimator in the error message.
WeightVector mvp_weights(const CovarianceMatrix& xi, std::string_view source = {});

/// Long-only minimum variance portfolio (w >= 0, 1^T w = 1) solved by a
/// primal active-set method; at most 10 p working-set changes.
WeightVector mvp_long_only(const CovarianceMatrix& xi, std::string_view source = {});

/// Hierarchical risk parity: single-linkage tree on the correlation-distance
/// of distances, quasi-diagonal seriation, recursive bisection with
/// inverse-variance cluster weights (left half gets ceil(len/2) assets).
WeightVector hrp_weights(const CovarianceMatrix& xi);

WeightVector uniform_weights(Eigen::Index p);

WeightVector allocate(Strategy strategy, const CovarianceMatrix& xi, std::string_view source = {});

}  // namespace hicov
