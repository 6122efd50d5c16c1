#include "hicov/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hicov {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Nested: return "nested";
        case ModelKind::OneFactor: return "one-factor";
        case ModelKind::Diagonal: return "diagonal";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "nested" || name == "Nested" || name == "model1") return ModelKind::Nested;
    if (name == "one-factor" || name == "OneFactor" || name == "factor" || name == "model2") {
        return ModelKind::OneFactor;
    }
    if (name == "diagonal" || name == "Diagonal" || name == "model3") return ModelKind::Diagonal;
    throw std::invalid_argument("unknown model kind '" + name +
                                "' (valid: nested, one-factor, diagonal)");
}

void ModelSpec::validate() const {
    if (p < 1) throw std::invalid_argument("model p must be >= 1");
    switch (kind) {
        case ModelKind::Nested:
            if (!(gamma > 0.0)) throw std::invalid_argument("nested model needs gamma > 0");
            break;
        case ModelKind::OneFactor:
            if (!(sigma > 0.0) || !(sigma_r > 0.0)) {
                throw std::invalid_argument("one-factor model needs sigma, sigma_r > 0");
            }
            if (dof < 3) throw std::invalid_argument("Student-t noise needs dof >= 3");
            break;
        case ModelKind::Diagonal: {
            double total = 0.0;
            for (const auto& g : diag_fractions) {
                if (g.fraction < 0.0) throw std::invalid_argument("negative eigenvalue fraction");
                total += g.fraction;
            }
            if (diag_fractions.empty() || std::abs(total - 1.0) > 1e-9) {
                throw std::invalid_argument("diagonal model fractions must sum to 1");
            }
            break;
        }
    }
}

void to_json(nlohmann::json& j, const ModelSpec& spec) {
    nlohmann::json fractions = nlohmann::json::array();
    for (const auto& g : spec.diag_fractions) fractions.push_back({g.eigenvalue, g.fraction});
    j = nlohmann::json{{"kind", to_string(spec.kind)}, {"p", spec.p},
                       {"gamma", spec.gamma},          {"sigma", spec.sigma},
                       {"sigma_r", spec.sigma_r},      {"dof", spec.dof},
                       {"diag_fractions", fractions}};
}

void from_json(const nlohmann::json& j, ModelSpec& spec) {
    spec = ModelSpec{};
    spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("p")) spec.p = j.at("p").get<int>();
    if (j.contains("gamma")) spec.gamma = j.at("gamma").get<double>();
    if (j.contains("sigma")) spec.sigma = j.at("sigma").get<double>();
    if (j.contains("sigma_r")) spec.sigma_r = j.at("sigma_r").get<double>();
    if (j.contains("dof")) spec.dof = j.at("dof").get<int>();
    if (j.contains("diag_fractions")) {
        spec.diag_fractions.clear();
        for (const auto& pair : j.at("diag_fractions")) {
            spec.diag_fractions.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
        }
    }
    spec.validate();
}

CovarianceMatrix build_nested_sigma(int p, double gamma) {
    if (p < 1) throw std::invalid_argument("build_nested_sigma: p must be >= 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("build_nested_sigma: gamma must be > 0");
    const double g2 = gamma * gamma;
    Matrix sigma(p, p);
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) {
            sigma(i, j) = static_cast<double>(p - std::max(i, j)) * g2;
        }
    }
    return CovarianceMatrix(std::move(sigma));
}

CovarianceMatrix build_factor_sigma(const Vector& loadings, double sigma, double sigma_r) {
    if (loadings.size() < 1) throw std::invalid_argument("build_factor_sigma: empty loadings");
    if (!(sigma > 0.0) || !(sigma_r > 0.0)) {
        throw std::invalid_argument("build_factor_sigma: sigma and sigma_r must be > 0");
    }
    Matrix out = (sigma * sigma) * (loadings * loadings.transpose());
    out.diagonal().array() += sigma_r * sigma_r;
    return CovarianceMatrix::symmetrized(out);
}

FactorModel build_factor_sigma(int p, double sigma, double sigma_r, Rng& rng) {
    if (p < 1) throw std::invalid_argument("build_factor_sigma: p must be >= 1");
    std::uniform_real_distribution<double> uniform(0.5, 1.5);
    Vector b(p);
    for (int i = 0; i < p; ++i) b(i) = uniform(rng);
    return {build_factor_sigma(b, sigma, sigma_r), b};
}

CovarianceMatrix build_diagonal_sigma(int p, const std::vector<EigenvalueFraction>& fractions) {
    if (p < 1) throw std::invalid_argument("build_diagonal_sigma: p must be >= 1");
    if (fractions.empty()) throw std::invalid_argument("build_diagonal_sigma: no groups");
    double total = 0.0;
    for (const auto& g : fractions) total += g.fraction;
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("build_diagonal_sigma: fractions must sum to 1");
    }

    std::vector<long> counts;
    counts.reserve(fractions.size());
    for (const auto& g : fractions) counts.push_back(std::lround(g.fraction * p));
    const auto largest = static_cast<std::size_t>(
        std::max_element(fractions.begin(), fractions.end(),
                         [](const auto& a, const auto& b) { return a.fraction < b.fraction; }) -
        fractions.begin());
    counts[largest] += p - std::accumulate(counts.begin(), counts.end(), 0L);
    if (std::any_of(counts.begin(), counts.end(), [](long c) { return c < 0; })) {
        throw std::invalid_argument("build_diagonal_sigma: rounding produced a negative count");
    }

    std::vector<double> diagonal;
    diagonal.reserve(static_cast<std::size_t>(p));
    for (std::size_t g = 0; g < fractions.size(); ++g) {
        diagonal.insert(diagonal.end(), static_cast<std::size_t>(counts[g]), fractions[g].eigenvalue);
    }
    std::sort(diagonal.begin(), diagonal.end(), std::greater<>());
    Matrix out = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i) out(i, i) = diagonal[static_cast<std::size_t>(i)];
    return CovarianceMatrix(std::move(out));
}

CovarianceMatrix build_sigma(const ModelSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case ModelKind::Nested: return build_nested_sigma(spec.p, spec.gamma);
        case ModelKind::OneFactor: return build_factor_sigma(spec.p, spec.sigma, spec.sigma_r, rng).sigma;
        case ModelKind::Diagonal: return build_diagonal_sigma(spec.p, spec.diag_fractions);
    }
    throw std::logic_error("unhandled model kind");
}

CovarianceMatrix matrix_sqrt(const CovarianceMatrix& sigma) {
    const auto& spec = sigma.spectrum();
    const double top = std::max(spec.eigenvalues(0), 0.0);
    Vector roots(spec.size());
    for (Eigen::Index k = 0; k < spec.size(); ++k) {
        const double lambda = spec.eigenvalues(k);
        if (lambda < -1e-10 * top) {
            throw NumericalError("matrix_sqrt: input is not PSD (eigenvalue " +
                                 std::to_string(lambda) + ")");
        }
        roots(k) = std::sqrt(std::max(lambda, 0.0));
    }
    return CovarianceMatrix(spec.reconstruct(roots));
}

NoiseDistribution noise_for(const ModelSpec& spec) {
    return spec.kind == ModelKind::OneFactor ? NoiseDistribution::student_t(spec.dof)
                                             : NoiseDistribution::gaussian();
}

DataPanel sample_panel_with_root(const CovarianceMatrix& root, int n, NoiseDistribution dist,
                                 Rng& rng) {
    if (n < 2) throw std::invalid_argument("sample_panel: n must be >= 2");
    const Eigen::Index p = root.dim();
    Matrix x(p, n);
    std::normal_distribution<double> normal(0.0, 1.0);
    if (dist.kind == NoiseDistribution::Kind::Gaussian) {
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < p; ++i) x(i, j) = normal(rng);
        }
    } else {
        if (dist.dof < 3) throw std::invalid_argument("sample_panel: Student-t needs dof >= 3");
        const double d = dist.dof;
        const double scale = std::sqrt((d - 2.0) / d);
        std::chi_squared_distribution<double> chi2(d);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < p; ++i) {
                const double z = normal(rng);
                x(i, j) = scale * z / std::sqrt(chi2(rng) / d);
            }
        }
    }
    return DataPanel(root.matrix() * x);
}

DataPanel sample_panel(const CovarianceMatrix& sigma, int n, NoiseDistribution dist, Rng& rng) {
    return sample_panel_with_root(matrix_sqrt(sigma), n, dist, rng);
}

CovarianceMatrix sample_covariance(const DataPanel& panel, bool centered) {
    const double n = static_cast<double>(panel.n());
    Matrix gram(panel.p(), panel.p());
    if (centered) {
        const Matrix c = panel.values().colwise() - panel.values().rowwise().mean();
        gram.setZero();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(c, 1.0 / n);
    } else {
        gram.setZero();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(panel.values(), 1.0 / n);
    }
    Matrix full = gram.selfadjointView<Eigen::Lower>();
    return CovarianceMatrix(std::move(full));
}

double nested_characteristic_determinant(int p, double gamma, double lambda) {
    if (p < 1) throw std::invalid_argument("nested determinant: p must be >= 1");
    const double g2 = gamma * gamma;
    const double a = g2 - 2.0 * lambda;
    if (p == 1) return g2 - lambda;
    double before = 1.0;  // D_0
    double current = a;   // D_1
    for (int k = 2; k < p; ++k) {
        const double next = a * current - lambda * lambda * before;
        before = current;
        current = next;
    }
    return (g2 - lambda) * current - lambda * lambda * before;
}

namespace {

/// Number of negative LDL^T pivots of the tridiagonal matrix, which equals
/// the number of nested-model eigenvalues strictly below lambda (lambda > 0).
int roots_below(int p, double g2, double lambda) {
    const double pivmin = std::numeric_limits<double>::min() * 1e4;
    const double a = g2 - 2.0 * lambda;
    const double off2 = lambda * lambda;
    int negatives = 0;
    double pivot = (p == 1) ? g2 - lambda : a;
    if (std::abs(pivot) < pivmin) pivot = -pivmin;
    if (pivot < 0.0) ++negatives;
    for (int k = 2; k <= p; ++k) {
        const double diag = (k == p) ? g2 - lambda : a;
        pivot = diag - off2 / pivot;
        if (std::abs(pivot) < pivmin) pivot = -pivmin;
        if (pivot < 0.0) ++negatives;
    }
    return negatives;
}

}  // namespace

std::vector<double> nested_sigma_eigenvalues(int p, double gamma) {
    if (p < 1) throw std::invalid_argument("nested_sigma_eigenvalues: p must be >= 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("nested_sigma_eigenvalues: gamma must be > 0");
    const double g2 = gamma * gamma;
    // trace bounds the largest eigenvalue; every eigenvalue exceeds g2 / 4.
    const double upper = 2.0 * g2 * p * (p + 1) / 2.0;
    constexpr int kMaxIterations = 400;

    std::vector<double> roots(static_cast<std::size_t>(p));
    for (int k = 0; k < p; ++k) {
        // k-th smallest root: smallest lambda with roots_below(lambda) > k.
        double lo = 0.0;
        double hi = upper;
        int iterations = 0;
        while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            if (++iterations > kMaxIterations) {
                throw NumericalError("nested_sigma_eigenvalues: bisection did not converge for root " +
                                     std::to_string(k));
            }
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (roots_below(p, g2, mid) > k) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots[static_cast<std::size_t>(k)] = 0.5 * (lo + hi);
    }
    std::sort(roots.begin(), roots.end(), std::greater<>());
    return roots;
}

}  // namespace hicov
