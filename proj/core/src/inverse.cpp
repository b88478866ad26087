#include "eitsense/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "eitsense/errors.hpp"
#include "eitsense/io_util.hpp"
#include "eitsense/parallel.hpp"

namespace eitsense {

ReconstructionOperator ReconstructionOperator::build(const Eigen::MatrixXd& jacobian,
                                                     double lambda) {
    if (!(lambda > 0.0))
        throw ValidationError("regularization lambda must be positive, got " +
                              format_double(lambda));
    if (!jacobian.allFinite()) throw ValidationError("Jacobian contains non-finite entries");
    if (jacobian.rows() == 0 || jacobian.cols() == 0)
        throw ValidationError("Jacobian is empty");

    // (J'J + lambda I)^-1 J' = J' (JJ' + lambda I)^-1: invert on the
    // measurement side, which is tiny (9x9 for the shipped protocol).
    Eigen::MatrixXd gram = jacobian * jacobian.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the Gram matrix failed");
    Eigen::VectorXd inv_spectrum = eig.eigenvalues();
    for (int i = 0; i < inv_spectrum.size(); ++i)
        inv_spectrum[i] = 1.0 / (std::max(inv_spectrum[i], 0.0) + lambda);

    ReconstructionOperator op;
    op.jacobian_ = jacobian;
    op.gram_filter_ = eig.eigenvectors() * inv_spectrum.asDiagonal() *
                      eig.eigenvectors().transpose();
    op.lambda_ = lambda;
    return op;
}

Eigen::VectorXd ReconstructionOperator::apply(const Eigen::VectorXd& delta_v) const {
    if (delta_v.size() != jacobian_.rows())
        throw ValidationError("voltage-change vector has " + std::to_string(delta_v.size()) +
                              " entries, operator expects " + std::to_string(jacobian_.rows()));
    return jacobian_.transpose() * (gram_filter_ * delta_v);
}

double ReconstructionOperator::residual_norm(const Eigen::VectorXd& delta_v,
                                             const Eigen::VectorXd& delta_sigma) const {
    return (jacobian_ * delta_sigma - delta_v).norm();
}

Eigen::MatrixXd ReconstructionOperator::matrix() const {
    return jacobian_.transpose() * gram_filter_;
}

ReconstructionResult reconstruct(const ReconstructionOperator& op,
                                 const Eigen::VectorXd& delta_v) {
    ReconstructionResult result;
    result.delta_sigma = op.apply(delta_v);
    result.residual = op.residual_norm(delta_v, result.delta_sigma);
    result.solution_norm = result.delta_sigma.norm();
    result.lambda = op.lambda();
    return result;
}

ReconstructionResult reconstruct(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& delta_v,
                                 double lambda) {
    return reconstruct(ReconstructionOperator::build(jacobian, lambda), delta_v);
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& jacobian, int count) {
    if (count < 2) throw ValidationError("lambda grid needs at least 2 points");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobian * jacobian.transpose());
    double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0)) throw ValidationError("Jacobian is numerically zero");
    // 10 decades below the largest squared singular value.
    std::vector<double> grid(count);
    for (int i = 0; i < count; ++i)
        grid[i] = top * std::pow(10.0, -10.0 + 10.0 * i / (count - 1));
    return grid;
}

CvResult select_lambda_cv(const Eigen::MatrixXd& jacobian, const std::vector<double>& grid,
                          double noise_std, int perturbation_count, std::uint64_t seed) {
    if (grid.empty()) throw ValidationError("lambda grid is empty");
    auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
    if (!(*lo > 0.0)) throw ValidationError("lambda grid entries must be positive");
    if (*hi / *lo < 1e4)
        throw ValidationError("lambda grid must span at least 4 decades");
    if (perturbation_count < 20)
        throw ValidationError("cross-validation needs at least 20 training perturbations");
    if (noise_std < 0.0) throw ValidationError("noise std must be non-negative");

    int m = static_cast<int>(jacobian.rows());
    int n = static_cast<int>(jacobian.cols());

    // Sparse random ground truths and their noisy simulated measurements.
    // Unit normals are drawn once and scaled, so different noise levels with
    // the same seed share draws (keeps lambda monotone in noise level).
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_element(0, n - 1);
    std::uniform_int_distribution<int> pick_support(1, std::max(1, std::min(3, n)));
    std::uniform_real_distribution<double> magnitude(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    std::vector<Eigen::VectorXd> truths(perturbation_count);
    std::vector<Eigen::VectorXd> data(perturbation_count);
    for (int p = 0; p < perturbation_count; ++p) {
        Eigen::VectorXd truth = Eigen::VectorXd::Zero(n);
        int support = pick_support(rng);
        for (int s = 0; s < support; ++s)
            truth[pick_element(rng)] = (sign(rng) ? 1.0 : -1.0) * magnitude(rng);
        Eigen::VectorXd noise(m);
        for (int i = 0; i < m; ++i) noise[i] = unit_normal(rng);
        truths[p] = truth;
        data[p] = jacobian * truth + noise_std * noise;
    }

    CvResult result;
    result.zero_noise = noise_std == 0.0;
    result.lambdas.assign(grid.begin(), grid.end());
    std::sort(result.lambdas.begin(), result.lambdas.end());
    result.scores.assign(result.lambdas.size(), 0.0);

    parallel_for(static_cast<int>(result.lambdas.size()), [&](int g) {
        ReconstructionOperator op = ReconstructionOperator::build(jacobian, result.lambdas[g]);
        double score = 0.0;
        for (int p = 0; p < perturbation_count; ++p)
            score += (op.apply(data[p]) - truths[p]).squaredNorm();
        result.scores[g] = score / perturbation_count;
    });

    // Ascending scan with <= keeps the larger lambda on ties.
    int best = 0;
    for (int g = 1; g < static_cast<int>(result.lambdas.size()); ++g)
        if (result.scores[g] <= result.scores[best]) best = g;
    result.best_lambda = result.lambdas[best];
    return result;
}

void save_reconstruction(const Eigen::VectorXd& delta_sigma, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write reconstruction file '" + path + "'");
    out << "# EITRECON 1\n";
    out << "element_id,delta_sigma\n";
    for (int e = 0; e < delta_sigma.size(); ++e)
        out << e << ',' << format_double(delta_sigma[e]) << '\n';
    if (!out) throw ValidationError("write failed for reconstruction file '" + path + "'");
}

Eigen::VectorXd load_reconstruction(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open reconstruction file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# EITRECON 1", 0) != 0)
        throw ValidationError("'" + path + "' is not an EITRECON 1 file");
    if (!std::getline(in, line))
        throw ValidationError("reconstruction file '" + path + "' has no column header");
    std::vector<double> values;
    int expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("reconstruction file '" + path + "': malformed row '" + line +
                                  "'");
        if (parse_int(line.substr(0, comma)) != expected)
            throw ValidationError("reconstruction file '" + path +
                                  "': element ids must be sequential");
        values.push_back(parse_double(line.substr(comma + 1)));
        ++expected;
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace eitsense
