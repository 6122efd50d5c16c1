#include "hicov/estimators.hpp"
#include "hicov/models.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace hicov {
namespace {

using namespace std::complex_literals;

DataPanel gaussian_panel(const CovarianceMatrix& sigma, int n, std::uint64_t seed) {
    Rng rng(seed);
    return sample_panel(sigma, n, NoiseDistribution::gaussian(), rng);
}

// Rows are orthogonal, so (1/n) Y Y^T = diag(scales^2).
DataPanel orthogonal_row_panel(const Vector& scales) {
    Matrix h(3, 4);
    h << 1, 1, -1, -1, 1, -1, 1, -1, 1, -1, -1, 1;
    return DataPanel(scales.asDiagonal() * h);
}

Matrix block_correlation() {
    Matrix c(3, 3);
    c << 1, 0.9, 0.2, 0.9, 1, 0.2, 0.2, 0.2, 1;
    return c;
}

TEST(EstimatorNames, RoundTripAndVocabularyInErrors) {
    for (EstimatorKind kind : all_estimator_kinds()) {
        EXPECT_EQ(estimator_kind_from_string(to_string(kind)), kind);
    }
    EXPECT_EQ(all_estimator_kinds().size(), 11u);
    try {
        estimator_kind_from_string("ridge");
        FAIL() << "expected an exception";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("2s-ycm"), std::string::npos);
    }
}

TEST(EstimatorSpec, JsonRoundTripAndValidation) {
    EstimatorSpec spec;
    spec.kind = EstimatorKind::TwoStepStein;
    spec.rho_grid_size = 7;
    const auto back = nlohmann::json(spec).get<EstimatorSpec>();
    EXPECT_EQ(back.kind, EstimatorKind::TwoStepStein);
    EXPECT_EQ(back.rho_grid_size, 7);
    spec.rho_grid_size = 1;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Naive, ReturnsInputUnchanged) {
    Rng rng(1);
    const auto s = testing::random_pd(5, rng);
    EXPECT_EQ(estimate_naive(s).matrix(), s.matrix());
}

TEST(Linear, IsotropicSampleIsReturnedAsIs) {
    Matrix y(2, 2);
    y << std::sqrt(2.0), 0, 0, std::sqrt(2.0);
    const auto result = estimate_linear(DataPanel(y));
    EXPECT_EQ(result.alpha, 0.0);
    EXPECT_LT((result.estimate.matrix() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Linear, IntensityMatchesPerObservationSum) {
    Rng rng(2);
    const Matrix y = testing::random_matrix(6, 15, rng);
    const DataPanel panel(y);
    const Matrix s = y * y.transpose() / 15.0;
    const double zeta = s.trace() / 6.0;
    double beta = 0.0;
    for (int i = 0; i < 15; ++i) beta += (y.col(i) * y.col(i).transpose() - s).squaredNorm();
    beta /= 15.0 * 15.0;
    const double delta = (s - zeta * Matrix::Identity(6, 6)).squaredNorm();
    const double alpha = std::min(beta, delta) / delta;
    const auto result = estimate_linear(panel);
    EXPECT_NEAR(result.alpha, alpha, 1e-12);
    const Matrix expected = (1 - alpha) * s + alpha * zeta * Matrix::Identity(6, 6);
    EXPECT_LT(testing::relative_frobenius(result.estimate.matrix(), expected), 1e-12);
}

TEST(Linear, IntensityVanishesWithManyObservations) {
    Matrix d = Matrix::Zero(5, 5);
    d.diagonal() << 5, 4, 3, 2, 1;
    const auto result = estimate_linear(gaussian_panel(CovarianceMatrix(d), 100000, 3));
    EXPECT_LT(result.alpha, 0.01);
}

TEST(Alca, TwoAssetsReproduceTheSample) {
    Matrix s(2, 2);
    s << 2.0, 0.6, 0.6, 1.0;
    EXPECT_LT((estimate_alca(CovarianceMatrix(s)).matrix() - s).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Alca, DiagonalSampleStaysDiagonal) {
    Matrix s = Matrix::Zero(4, 4);
    s.diagonal() << 4, 3, 2, 1;
    EXPECT_LT((estimate_alca(CovarianceMatrix(s)).matrix() - s).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Alca, ThreeAssetBlockExample) {
    const auto xi = estimate_alca(CovarianceMatrix(block_correlation()));
    EXPECT_NEAR(xi(0, 1), 0.9, 1e-14);
    EXPECT_NEAR(xi(0, 2), 0.2, 1e-14);
    EXPECT_NEAR(xi(1, 2), 0.2, 1e-14);
    EXPECT_NEAR(xi(2, 2), 1.0, 1e-14);
}

TEST(Alca, AveragesCorrelationsAcrossAMerge) {
    Matrix c(3, 3);
    c << 1, 0.9, 0.3, 0.9, 1, 0.1, 0.3, 0.1, 1;
    Vector sd(3);
    sd << 1.0, 2.0, 0.5;
    const Matrix s = sd.asDiagonal() * c * sd.asDiagonal();
    const auto xi = estimate_alca(CovarianceMatrix(s));
    EXPECT_NEAR(xi(0, 2) / (sd(0) * sd(2)), 0.2, 1e-14);
    EXPECT_NEAR(xi(1, 2) / (sd(1) * sd(2)), 0.2, 1e-14);
    EXPECT_NEAR(xi(0, 1), 0.9 * 2.0, 1e-14);
}

TEST(Alca, IsIdempotentOnPositiveCorrelations) {
    Rng rng(31);
    Vector b = Vector::Ones(8);
    const auto sigma = build_factor_sigma(b + 0.5 * testing::random_matrix(8, 1, rng).cwiseAbs(), 0.3, 0.2);
    const auto once = estimate_alca(sample_covariance(gaussian_panel(sigma, 40, 9), false));
    const auto twice = estimate_alca(once);
    EXPECT_LT(testing::relative_frobenius(twice.matrix(), once.matrix()), 1e-12);
}

TEST(Alca, RejectsZeroVariance) {
    EXPECT_THROW(estimate_alca(CovarianceMatrix(Matrix::Zero(2, 2))), std::invalid_argument);
}

TEST(Stieltjes, SingleAtom) {
    Vector spectrum = Vector::Ones(4);
    const auto g = stieltjes(spectrum, 1.0 - 1.0i);
    EXPECT_NEAR(g.real(), 0.0, 1e-15);
    EXPECT_NEAR(g.imag(), -1.0, 1e-15);
}

TEST(Stieltjes, TwoAtoms) {
    Vector spectrum(2);
    spectrum << 2.0, 0.0;
    const auto g = stieltjes(spectrum, -1.0i);
    EXPECT_NEAR(g.real(), 0.2, 1e-15);
    EXPECT_NEAR(g.imag(), -0.6, 1e-15);
}

TEST(Stieltjes, MatchesReverseOrderSummation) {
    Rng rng(17);
    const Vector spectrum = testing::random_matrix(40, 1, rng).cwiseAbs();
    const std::complex<double> z{0.7, 0.05};
    std::complex<double> oracle = 0.0;
    for (Eigen::Index k = spectrum.size() - 1; k >= 0; --k) oracle += 1.0 / (spectrum(k) - z);
    oracle /= 40.0;
    EXPECT_LT(std::abs(stieltjes(spectrum, z) - oracle), 1e-14 * std::abs(oracle));
    EXPECT_THROW(stieltjes(spectrum, {1.0, 0.0}), std::invalid_argument);
}

TEST(Shrinkage, SymSteinIsGeometricMean) {
    const auto s = sample_covariance(gaussian_panel(CovarianceMatrix::identity(30), 60, 5), false);
    const Vector& ev = s.spectrum().eigenvalues;
    const Vector lp = shrink_eigenvalues(ShrinkageRule::LP, ev, ev, 0.5);
    const Vector st = shrink_eigenvalues(ShrinkageRule::Stein, ev, ev, 0.5);
    const Vector sym = shrink_eigenvalues(ShrinkageRule::SymStein, ev, ev, 0.5);
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        EXPECT_NEAR(sym(k), std::sqrt(lp(k) * st(k)), 1e-14 * sym(k));
    }
}

TEST(Shrinkage, LpMatchesDirectFormula) {
    Vector ev(3);
    ev << 3.0, 1.5, 0.5;
    const double q = 0.3;
    const Vector lp = shrink_eigenvalues(ShrinkageRule::LP, ev, ev, q);
    const Vector st = shrink_eigenvalues(ShrinkageRule::Stein, ev, ev, q);
    for (Eigen::Index k = 0; k < 3; ++k) {
        const double eta = ev(k) / std::sqrt(3.0);
        std::complex<double> g = 0.0;
        for (Eigen::Index j = 0; j < 3; ++j) g -= 1.0 / (ev(j) - std::complex<double>(ev(k), -eta));
        g /= 3.0;
        EXPECT_NEAR(lp(k), ev(k) / std::norm(1.0 - q + q * ev(k) * g), 1e-13);
        EXPECT_NEAR(st(k), ev(k) / (1.0 - q + 2.0 * q * ev(k) * g.real()), 1e-13);
    }
}

TEST(Shrinkage, RotationalInvariance) {
    Rng rng(6);
    const auto s = testing::random_pd(8, rng);
    const Eigen::HouseholderQR<Matrix> qr(testing::random_matrix(8, 8, rng));
    const Matrix o = qr.householderQ();
    const auto rotated = CovarianceMatrix::symmetrized(o * s.matrix() * o.transpose());
    for (auto rule : {ShrinkageRule::LP, ShrinkageRule::Stein, ShrinkageRule::SymStein}) {
        const Matrix direct = shrink_covariance(rule, s, 0.4).matrix();
        const Matrix after = shrink_covariance(rule, rotated, 0.4).matrix();
        EXPECT_LT(testing::relative_frobenius(after, o * direct * o.transpose()), 1e-9);
    }
}

TEST(Shrinkage, ClassicalLimitRecoversSample) {
    Matrix d = Matrix::Zero(5, 5);
    d.diagonal() << 5, 4, 3, 2, 1;
    const auto panel = gaussian_panel(CovarianceMatrix(d), 100000, 4);
    const EstimationWorkspace ws(panel);
    const Vector& ref = ws.sample().spectrum().eigenvalues;
    for (auto kind : {EstimatorKind::Linear, EstimatorKind::LP, EstimatorKind::Stein,
                      EstimatorKind::SymStein}) {
        EstimatorSpec spec;
        spec.kind = kind;
        const Vector got = estimate(ws, spec).spectrum().eigenvalues;
        EXPECT_LT(((got - ref).array().abs() / ref.array()).maxCoeff(), 0.02) << to_string(kind);
    }
}

TEST(Shrinkage, RejectsBadArguments) {
    Vector ev = Vector::Ones(2);
    EXPECT_THROW(shrink_eigenvalues(ShrinkageRule::LP, ev, ev, 0.0), std::invalid_argument);
    EXPECT_THROW(shrink_eigenvalues(ShrinkageRule::LP, ev, ev, 0.5, -1.0), std::invalid_argument);
}

TEST(YcmFixedPoint, RhoOneIsIdentity) {
    Rng rng(8);
    const Matrix y = testing::random_matrix(6, 20, rng);
    const auto fit = ycm_fixed_point(y, 1.0, 1e-10, 10);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT((fit.estimate - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(YcmFixedPoint, SatisfiesItsEquation) {
    Rng rng(9);
    Matrix y = testing::random_matrix(10, 40, rng);
    y = y.colwise() - y.rowwise().mean();
    const double rho = 0.3;
    const auto fit = ycm_fixed_point(y, rho, 1e-12, 2000);
    ASSERT_TRUE(fit.converged);
    const Matrix inv = fit.estimate.inverse();
    Matrix rhs = Matrix::Zero(10, 10);
    for (int i = 0; i < 40; ++i) {
        const double quad = y.col(i).dot(inv * y.col(i)) / 10.0;
        rhs += y.col(i) * y.col(i).transpose() / quad;
    }
    rhs = (1 - rho) / 40.0 * rhs + rho * Matrix::Identity(10, 10);
    rhs *= 10.0 / rhs.trace();
    EXPECT_LT(testing::relative_frobenius(fit.estimate, rhs), 1e-9);
    EXPECT_NEAR(fit.estimate.trace(), 10.0, 1e-10);
}

TEST(Ycm, GridEndpoints) {
    const auto grid = ycm_rho_grid(100, 200, 20);
    EXPECT_EQ(grid.size(), 20u);
    EXPECT_DOUBLE_EQ(grid.front(), 0.01);
    EXPECT_DOUBLE_EQ(grid.back(), 1.0);
    const auto wide = ycm_rho_grid(100, 50, 5);
    EXPECT_DOUBLE_EQ(wide.front(), 0.51);
}

TEST(Ycm, IdentityPopulationIsRecovered) {
    const auto panel = gaussian_panel(CovarianceMatrix::identity(50), 200, 10);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::Ycm;
    const auto result = estimate_ycm(panel, spec);
    const Matrix diff = result.estimate.matrix() - Matrix::Identity(50, 50);
    EXPECT_LT(diff.operatorNorm(), 0.15);
    // Isotropic truth should push the regularization to the top of the grid.
    EXPECT_GT(result.rho_hat, 0.5);
}

TEST(Ycm, TraceMatchesUncenteredSample) {
    const auto panel = gaussian_panel(build_nested_sigma(20, 0.3), 60, 11);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::Ycm;
    const auto result = estimate_ycm(panel, spec);
    EXPECT_NEAR(result.estimate.trace(), sample_covariance(panel, false).trace(), 1e-10);
    EXPECT_TRUE(result.estimate.is_psd());
    EXPECT_EQ(result.grid.size(), 20u);
}

TEST(Ycm, GridWorkersDoNotChangeTheAnswer) {
    const auto panel = gaussian_panel(build_nested_sigma(15, 0.3), 40, 12);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::Ycm;
    const auto serial = estimate_ycm(panel, spec);
    spec.grid_workers = 4;
    const auto parallel = estimate_ycm(panel, spec);
    EXPECT_EQ(serial.rho_hat, parallel.rho_hat);
    EXPECT_EQ(serial.estimate.matrix(), parallel.estimate.matrix());
}

TEST(Ycm, ConstantPanelIsRejected) {
    EstimatorSpec spec;
    EXPECT_THROW(estimate_ycm(DataPanel(Matrix::Ones(3, 10)), spec), std::invalid_argument);
}

TEST(Recolor, SampleOfRecoloredPanelEqualsTarget) {
    Rng rng(14);
    const DataPanel panel(testing::random_matrix(6, 30, rng));
    const auto sample = sample_covariance(panel, false);
    const auto target = testing::random_pd(6, rng);
    const auto z = recolor_panel(panel, sample, target);
    EXPECT_LT(testing::relative_frobenius(sample_covariance(z, false).matrix(), target.matrix()), 1e-10);
}

TEST(TwoStep, DiagonalSampleReducesToSingleStep) {
    Vector scales(3);
    scales << 2.0, 1.0, 0.5;
    const EstimationWorkspace ws(orthogonal_row_panel(scales));
    for (auto [kind, rule] : {std::pair{EstimatorKind::TwoStepLP, ShrinkageRule::LP},
                              std::pair{EstimatorKind::TwoStepStein, ShrinkageRule::Stein},
                              std::pair{EstimatorKind::TwoStepSymStein, ShrinkageRule::SymStein}}) {
        EstimatorSpec spec;
        spec.kind = kind;
        const Matrix got = estimate(ws, spec).matrix();
        const Matrix expected = shrink_covariance(rule, ws.sample(), ws.q()).matrix();
        EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-12) << to_string(kind);
        EXPECT_LT((got - Matrix(got.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(TwoStep, RejectsNonShrinkageInner) {
    Rng rng(15);
    const EstimationWorkspace ws(DataPanel(testing::random_matrix(3, 10, rng)));
    EXPECT_THROW(estimate_two_step(ws, EstimatorKind::Linear, EstimatorSpec{}), std::invalid_argument);
}

TEST(Workspace, AlcaIsComputedOnceUnderConcurrency) {
    Rng rng(16);
    const EstimationWorkspace ws(DataPanel(testing::random_matrix(10, 30, rng)));
    std::vector<const CovarianceMatrix*> seen(8);
    {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < seen.size(); ++t) {
            threads.emplace_back([&, t] { seen[t] = &ws.alca(); });
        }
    }
    for (const auto* ptr : seen) EXPECT_EQ(ptr, seen.front());
}

TEST(Estimate, EveryKindIsPsdAndFinite) {
    const auto panel = gaussian_panel(build_nested_sigma(20, 0.2), 40, 18);
    const EstimationWorkspace ws(panel);
    for (EstimatorKind kind : all_estimator_kinds()) {
        EstimatorSpec spec;
        spec.kind = kind;
        const auto xi = estimate(ws, spec);
        EXPECT_TRUE(xi.matrix().allFinite()) << to_string(kind);
        EXPECT_TRUE(xi.is_psd()) << to_string(kind);
    }
}

}  // namespace
}  // namespace hicov
