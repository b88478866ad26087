#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <eitsense/errors.hpp>
#include <eitsense/inverse.hpp>

#include "test_util.hpp"

using namespace eitsense;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
}

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

// Dense reference solution of the normal equations (J^T J + lambda I) x =
// J^T dv. Evaluated as the stacked least-squares problem [J; sqrt(lambda) I]
// x = [dv; 0] via QR: forming J^T J explicitly would square the condition
// number and leave the oracle less accurate than the operator under test.
Eigen::VectorXd dense_tikhonov(const Eigen::MatrixXd& J, const Eigen::VectorXd& dv,
                               double lambda) {
    int m = static_cast<int>(J.rows()), n = static_cast<int>(J.cols());
    Eigen::MatrixXd stacked(m + n, n);
    stacked.topRows(m) = J;
    stacked.bottomRows(n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
    rhs.head(m) = dv;
    return stacked.colPivHouseholderQr().solve(rhs);
}

}  // namespace

TEST(Reconstruction, MatchesDenseNormalEquations) {
    struct Case {
        int m, n;
        double lambda;
    };
    for (const Case& c : {Case{3, 7, 1e-2}, Case{9, 150, 1e-4}, Case{9, 500, 1e-6}}) {
        Eigen::MatrixXd J = random_matrix(c.m, c.n, 100 + c.n);
        Eigen::VectorXd dv = random_vector(c.m, 200 + c.n);
        ReconstructionOperator op = ReconstructionOperator::build(J, c.lambda);
        Eigen::VectorXd fast = op.apply(dv);
        Eigen::VectorXd dense = dense_tikhonov(J, dv, c.lambda);
        EXPECT_LT((fast - dense).norm() / dense.norm(), 1e-10)
            << c.m << "x" << c.n << " lambda " << c.lambda;
    }
}

TEST(Reconstruction, MaterializedMatrixMatchesApply) {
    Eigen::MatrixXd J = random_matrix(5, 40, 1);
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-3);
    Eigen::MatrixXd R = op.matrix();
    ASSERT_EQ(R.rows(), 40);
    ASSERT_EQ(R.cols(), 5);
    Eigen::VectorXd dv = random_vector(5, 2);
    EXPECT_LT((R * dv - op.apply(dv)).norm(), 1e-12 * op.apply(dv).norm());
}

TEST(Reconstruction, LambdaLimits) {
    // Identity Jacobian: as lambda -> 0 the reconstruction approaches the
    // data; as lambda -> infinity it is damped to nothing.
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(6, 6);
    Eigen::VectorXd dv = random_vector(6, 3);
    Eigen::VectorXd tiny = ReconstructionOperator::build(J, 1e-14).apply(dv);
    EXPECT_LT((tiny - dv).norm() / dv.norm(), 1e-12);
    Eigen::VectorXd huge = ReconstructionOperator::build(J, 1e14).apply(dv);
    EXPECT_LT(huge.norm(), 1e-12 * dv.norm());
}

TEST(Reconstruction, ZeroDataGivesZeroUpdate) {
    Eigen::MatrixXd J = random_matrix(4, 30, 4);
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-3);
    Eigen::VectorXd ds = op.apply(Eigen::VectorXd::Zero(4));
    EXPECT_EQ(ds.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Reconstruction, LocalizesSingleParameterSpike) {
    // Overdetermined J with weak damping: dv = J e_k is fit essentially
    // exactly, so the solution returns to the spike itself.
    Eigen::MatrixXd tall = random_matrix(60, 40, 5);
    for (int k : {0, 17, 39}) {
        Eigen::VectorXd ds = ReconstructionOperator::build(tall, 1e-8).apply(tall.col(k));
        int argmax = 0;
        ds.cwiseAbs().maxCoeff(&argmax);
        EXPECT_EQ(argmax, k);
        EXPECT_NEAR(ds[k], 1.0, 1e-6);
    }

    // Underdetermined J cannot pin the spike, but its own entry is the
    // quadratic form (J e_k)^T (J J^T + lambda I)^-1 (J e_k) > 0 regardless.
    Eigen::MatrixXd wide = random_matrix(8, 60, 51);
    for (int k : {0, 17, 59}) {
        Eigen::VectorXd ds = ReconstructionOperator::build(wide, 1e-8).apply(wide.col(k));
        EXPECT_GT(ds[k], 0.0);
    }
}

TEST(Reconstruction, MinimizesTheTikhonovFunctional) {
    // Spot check of optimality: random perturbations away from the returned
    // solution always increase ||J ds - dv||^2 + lambda ||ds||^2.
    Eigen::MatrixXd J = random_matrix(6, 50, 6);
    Eigen::VectorXd dv = random_vector(6, 7);
    const double lambda = 1e-3;
    Eigen::VectorXd ds = ReconstructionOperator::build(J, lambda).apply(dv);
    auto objective = [&](const Eigen::VectorXd& x) {
        return (J * x - dv).squaredNorm() + lambda * x.squaredNorm();
    };
    double best = objective(ds);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd bump(ds.size());
        for (int i = 0; i < bump.size(); ++i) bump[i] = gauss(rng);
        // Keep the smallest bumps above the rounding floor of the objective.
        bump *= std::pow(10.0, -4.0 + 4.0 * (trial % 10) / 10.0);
        EXPECT_GT(objective(ds + bump), best);
    }
}

TEST(Reconstruction, IsLinearInTheData) {
    Eigen::MatrixXd J = random_matrix(7, 80, 9);
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-4);
    Eigen::VectorXd a = random_vector(7, 10), b = random_vector(7, 11);
    Eigen::VectorXd combined = op.apply(2.0 * a - 3.0 * b);
    Eigen::VectorXd separate = 2.0 * op.apply(a) - 3.0 * op.apply(b);
    EXPECT_LT((combined - separate).norm() / separate.norm(), 1e-12);
}

TEST(Reconstruction, LcurveIsMonotoneAcrossTheGrid) {
    // Residual grows and solution norm shrinks as lambda increases; both
    // monotone along the whole default grid.
    Eigen::MatrixXd J = random_matrix(9, 300, 12);
    Eigen::VectorXd dv = random_vector(9, 13);
    std::vector<double> grid = default_lambda_grid(J);
    ASSERT_EQ(grid.size(), 40u);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GT(grid[i], grid[i - 1]);

    double prev_residual = -1.0, prev_norm = 1e300;
    for (double lambda : grid) {
        ReconstructionResult r = reconstruct(J, dv, lambda);
        EXPECT_GE(r.residual, prev_residual) << "lambda " << lambda;
        EXPECT_LE(r.solution_norm, prev_norm) << "lambda " << lambda;
        prev_residual = r.residual;
        prev_norm = r.solution_norm;
    }
}

TEST(Reconstruction, RejectsBadArguments) {
    Eigen::MatrixXd J = random_matrix(4, 30, 14);
    EXPECT_THROW(ReconstructionOperator::build(J, 0.0), ValidationError);
    EXPECT_THROW(ReconstructionOperator::build(J, -1.0), ValidationError);
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-3);
    EXPECT_THROW(op.apply(Eigen::VectorXd::Zero(5)), ValidationError);
}

TEST(CrossValidation, ZeroNoiseStaysOnTheSmallLambdaPlateau) {
    // Without noise nothing penalizes small lambda: the scores are flat (to
    // rounding) across the bottom of the grid and rise beyond it. The run is
    // flagged degenerate and the winner sits on that plateau (ties keep the
    // largest lambda, so it need not be the very first point).
    Eigen::MatrixXd J = random_matrix(9, 120, 15);
    std::vector<double> grid = default_lambda_grid(J);
    CvResult cv = select_lambda_cv(J, grid, 0.0, 20, 99);
    EXPECT_TRUE(cv.zero_noise);
    EXPECT_LE(cv.best_lambda, grid[grid.size() / 4]);
    std::size_t best = 0;
    while (best < cv.lambdas.size() && cv.lambdas[best] != cv.best_lambda) ++best;
    ASSERT_LT(best, cv.lambdas.size());
    EXPECT_EQ(cv.scores[best], cv.scores.front());
}

TEST(CrossValidation, MoreNoiseNeverLoosensRegularization) {
    Eigen::MatrixXd J = random_matrix(9, 120, 16);
    std::vector<double> grid = default_lambda_grid(J);
    double sigma_v = 1e-4 * J.norm();
    CvResult low = select_lambda_cv(J, grid, sigma_v, 20, 1234);
    CvResult high = select_lambda_cv(J, grid, 100.0 * sigma_v, 20, 1234);
    EXPECT_FALSE(low.zero_noise);
    EXPECT_GE(high.best_lambda, low.best_lambda);
    EXPECT_GT(low.best_lambda, grid.front());
}

TEST(CrossValidation, IsDeterministicForAGivenSeed) {
    Eigen::MatrixXd J = random_matrix(6, 90, 17);
    std::vector<double> grid = default_lambda_grid(J);
    CvResult a = select_lambda_cv(J, grid, 1e-3, 20, 5);
    CvResult b = select_lambda_cv(J, grid, 1e-3, 20, 5);
    EXPECT_EQ(a.best_lambda, b.best_lambda);
    ASSERT_EQ(a.scores.size(), b.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_EQ(a.scores[i], b.scores[i]);
    CvResult c = select_lambda_cv(J, grid, 1e-3, 20, 6);
    bool same = true;
    for (std::size_t i = 0; i < a.scores.size() && same; ++i)
        same = a.scores[i] == c.scores[i];
    EXPECT_FALSE(same);  // different seed, different noise draws
}

TEST(CrossValidation, EnforcesGridAndSampleFloors) {
    Eigen::MatrixXd J = random_matrix(6, 90, 18);
    std::vector<double> grid = default_lambda_grid(J);
    // Fewer than 20 perturbations is below the variance floor.
    EXPECT_THROW(select_lambda_cv(J, grid, 1e-3, 10, 5), ValidationError);
    // A grid spanning fewer than four decades is rejected.
    std::vector<double> narrow{1e-4, 3e-4, 1e-3};
    EXPECT_THROW(select_lambda_cv(J, narrow, 1e-3, 20, 5), ValidationError);
    EXPECT_THROW(select_lambda_cv(J, {}, 1e-3, 20, 5), ValidationError);
}

TEST(ReconstructionIo, CsvRoundTrip) {
    TempDir dir;
    Eigen::VectorXd ds = random_vector(25, 19);
    std::string path = dir.file("recon.csv");
    save_reconstruction(ds, path);
    Eigen::VectorXd loaded = load_reconstruction(path);
    ASSERT_EQ(loaded.size(), ds.size());
    EXPECT_EQ((loaded - ds).lpNorm<Eigen::Infinity>(), 0.0);  // shortest-round-trip floats
    EXPECT_THROW(load_reconstruction(dir.file("missing.csv")), ValidationError);
}
