#include "hicov/allocation.hpp"

#include "hicov/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

namespace hicov {

WeightVector::WeightVector(Vector weights) : weights_(std::move(weights)) {
    if (weights_.size() < 1) throw std::invalid_argument("weight vector is empty");
    if (!weights_.allFinite()) throw NumericalError("weight vector has non-finite entries");
    const double total = weights_.sum();
    if (std::abs(total - 1.0) > 1e-10) {
        throw NumericalError("weights sum to " + std::to_string(total) + ", expected 1");
    }
}

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::Mvp: return "mvp";
        case Strategy::MvpLongOnly: return "mvp+";
        case Strategy::Hrp: return "hrp";
        case Strategy::Uniform: return "uniform";
    }
    return "unknown";
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> all{Strategy::Mvp, Strategy::MvpLongOnly, Strategy::Hrp,
                                           Strategy::Uniform};
    return all;
}

Strategy strategy_from_string(const std::string& name) {
    for (Strategy s : all_strategies()) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown strategy '" + name + "' (valid: mvp, mvp+, hrp, uniform)");
}

namespace {

std::string label(std::string_view source) {
    return source.empty() ? std::string("covariance estimate") : "estimator '" + std::string(source) + "'";
}

Vector normalized(const Vector& raw) { return raw / raw.sum(); }

}  // namespace

WeightVector mvp_weights(const CovarianceMatrix& xi, std::string_view source) {
    const double top = xi.max_eigenvalue();
    const double bottom = xi.min_eigenvalue();
    if (!(bottom > 0.0) || top / bottom > 1e14) {
        throw SingularCovarianceError("MVP: " + label(source) +
                                      " is singular or ill-conditioned (eigenvalues " +
                                      std::to_string(bottom) + " .. " + std::to_string(top) + ")");
    }
    Eigen::LLT<Matrix> chol(xi.matrix());
    if (chol.info() != Eigen::Success) {
        throw SingularCovarianceError("MVP: Cholesky failed for " + label(source));
    }
    const Vector u = chol.solve(Vector::Ones(xi.dim()));
    const double total = u.sum();
    if (!(std::abs(total) > 0.0) || !u.allFinite()) {
        throw SingularCovarianceError("MVP: 1^T Xi^{-1} 1 vanished for " + label(source));
    }
    return WeightVector(u / total);
}

WeightVector mvp_long_only(const CovarianceMatrix& xi, std::string_view source) {
    const Eigen::Index p = xi.dim();
    const Matrix& s = xi.matrix();
    const double scale = std::max(s.diagonal().maxCoeff(), 1e-300);
    const double kkt_tol = 1e-10 * scale;
    const Eigen::Index max_changes = 10 * p;

    std::vector<char> at_bound(static_cast<std::size_t>(p), 0);
    Vector w = Vector::Constant(p, 1.0 / static_cast<double>(p));
    Eigen::Index changes = 0;

    while (true) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!at_bound[static_cast<std::size_t>(i)]) free.push_back(i);
        }
        const auto f = static_cast<Eigen::Index>(free.size());
        Matrix sub(f, f);
        for (Eigen::Index a = 0; a < f; ++a) {
            for (Eigen::Index b = 0; b < f; ++b) sub(a, b) = s(free[a], free[b]);
        }
        Eigen::LDLT<Matrix> ldlt(sub);
        const Vector u = ldlt.solve(Vector::Ones(f));
        const double total = u.sum();
        if (ldlt.info() != Eigen::Success || !u.allFinite() || !(total > 0.0)) {
            throw SingularCovarianceError("MVP+: singular free block for " + label(source));
        }

        Vector direction = Vector::Zero(p);
        for (Eigen::Index a = 0; a < f; ++a) direction(free[a]) = u(a) / total - w(free[a]);

        if (direction.lpNorm<Eigen::Infinity>() <= 1e-14) {
            const Vector gradient = s * w;
            double nu = 0.0;
            for (Eigen::Index i : free) nu += gradient(i);
            nu /= static_cast<double>(f);
            Eigen::Index release = -1;
            double most_negative = -kkt_tol;
            for (Eigen::Index i = 0; i < p; ++i) {
                if (!at_bound[static_cast<std::size_t>(i)]) continue;
                const double multiplier = gradient(i) - nu;
                if (multiplier < most_negative) {
                    most_negative = multiplier;
                    release = i;
                }
            }
            if (release < 0) break;
            at_bound[static_cast<std::size_t>(release)] = 0;
        } else {
            double step = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index i : free) {
                if (direction(i) < 0.0) {
                    const double ratio = -w(i) / direction(i);
                    if (ratio < step) {
                        step = ratio;
                        blocking = i;
                    }
                }
            }
            w += step * direction;
            if (blocking < 0) continue;
            w(blocking) = 0.0;
            at_bound[static_cast<std::size_t>(blocking)] = 1;
        }
        if (++changes > max_changes) {
            throw NumericalError("MVP+: active-set iteration cap exceeded for " + label(source));
        }
    }
    w = w.cwiseMax(0.0);
    return WeightVector(normalized(w));
}

WeightVector hrp_weights(const CovarianceMatrix& xi) {
    const Eigen::Index p = xi.dim();
    const Vector variances = xi.matrix().diagonal();
    if ((variances.array() <= 0.0).any()) {
        throw std::invalid_argument("HRP: covariance diagonal must be strictly positive");
    }
    if (p == 1) return WeightVector(Vector::Ones(1));

    const Vector inv_sd = variances.cwiseSqrt().cwiseInverse();
    Matrix corr = inv_sd.asDiagonal() * xi.matrix() * inv_sd.asDiagonal();
    if ((corr.array().abs() > 1.0 + 1e-8).any()) {
        throw NumericalError("HRP: correlation outside [-1, 1] beyond tolerance");
    }
    corr = corr.cwiseMax(-1.0).cwiseMin(1.0);
    const Matrix distance = (0.5 * (1.0 - corr.array())).sqrt().matrix();

    Matrix of_distances(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        of_distances(j, j) = 0.0;
        for (Eigen::Index i = j + 1; i < p; ++i) {
            const double d = (distance.col(i) - distance.col(j)).norm();
            of_distances(i, j) = d;
            of_distances(j, i) = d;
        }
    }
    const std::vector<int> order = quasi_diagonal_order(agglomerate(of_distances, Linkage::Single));

    const auto cluster_variance = [&](std::span<const int> members) {
        Vector w(static_cast<Eigen::Index>(members.size()));
        for (std::size_t a = 0; a < members.size(); ++a) {
            w(static_cast<Eigen::Index>(a)) = 1.0 / variances(members[a]);
        }
        w /= w.sum();
        double v = 0.0;
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = 0; b < members.size(); ++b) {
                v += w(static_cast<Eigen::Index>(a)) * xi(members[a], members[b]) *
                     w(static_cast<Eigen::Index>(b));
            }
        }
        return v;
    };

    Vector weights = Vector::Ones(p);
    std::function<void(std::span<const int>)> bisect = [&](std::span<const int> items) {
        if (items.size() <= 1) return;
        const std::size_t left_size = (items.size() + 1) / 2;
        const auto left = items.first(left_size);
        const auto right = items.subspan(left_size);
        const double v_left = cluster_variance(left);
        const double v_right = cluster_variance(right);
        const double alpha = 1.0 - v_left / (v_left + v_right);
        for (int i : left) weights(i) *= alpha;
        for (int i : right) weights(i) *= 1.0 - alpha;
        bisect(left);
        bisect(right);
    };
    bisect(order);
    return WeightVector(normalized(weights));
}

WeightVector uniform_weights(Eigen::Index p) {
    if (p < 1) throw std::invalid_argument("uniform_weights: p must be >= 1");
    return WeightVector(Vector::Constant(p, 1.0 / static_cast<double>(p)));
}

WeightVector allocate(Strategy strategy, const CovarianceMatrix& xi, std::string_view source) {
    switch (strategy) {
        case Strategy::Mvp: return mvp_weights(xi, source);
        case Strategy::MvpLongOnly: return mvp_long_only(xi, source);
        case Strategy::Hrp: return hrp_weights(xi);
        case Strategy::Uniform: return uniform_weights(xi.dim());
    }
    throw std::logic_error("unhandled strategy");
}

}  // namespace hicov
