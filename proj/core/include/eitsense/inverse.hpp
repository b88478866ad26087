// Linearized Tikhonov reconstruction: delta_sigma = (J^T J + lambda I)^-1
// J^T delta_v, evaluated through the small-side identity J^T (J J^T +
// lambda I)^-1 so building and applying the operator scale with the
// measurement count, not the element count.

#ifndef EITSENSE_INVERSE_HPP
#define EITSENSE_INVERSE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eitsense {

class ReconstructionOperator {
public:
    // lambda must be positive. Throws NumericalError if the Gram
    // eigendecomposition fails.
    static ReconstructionOperator build(const Eigen::MatrixXd& jacobian, double lambda);

    Eigen::VectorXd apply(const Eigen::VectorXd& delta_v) const;
    double lambda() const { return lambda_; }
    int measurement_count() const { return static_cast<int>(jacobian_.rows()); }
    int parameter_count() const { return static_cast<int>(jacobian_.cols()); }

    // Data misfit || J delta_sigma - delta_v || of a candidate solution.
    double residual_norm(const Eigen::VectorXd& delta_v,
                         const Eigen::VectorXd& delta_sigma) const;

    // Materialized parameter x measurement matrix (for inspection; apply()
    // never forms it).
    Eigen::MatrixXd matrix() const;

private:
    Eigen::MatrixXd jacobian_;      // m x n
    Eigen::MatrixXd gram_filter_;   // m x m: U diag(1/(s^2+lambda)) U^T
    double lambda_ = 0.0;
};

struct ReconstructionResult {
    Eigen::VectorXd delta_sigma;  // S/m per element (or voxel)
    double residual = 0.0;        // || J ds - dv ||
    double solution_norm = 0.0;   // || ds ||
    double lambda = 0.0;
};

ReconstructionResult reconstruct(const ReconstructionOperator& op,
                                 const Eigen::VectorXd& delta_v);
ReconstructionResult reconstruct(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& delta_v,
                                 double lambda);

// Log-spaced grid tied to the spectrum: count points covering
// [1e-10, 1] x s_max^2, where s_max is the largest singular value.
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& jacobian, int count = 40);

struct CvResult {
    double best_lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> scores;     // mean reconstruction error per lambda
    bool zero_noise = false;        // degenerate run: no noise was injected
};

// Picks lambda by Monte-Carlo cross-validation on synthetic data: sparse
// random perturbations are pushed through the Jacobian, measurement noise of
// the given standard deviation is added, and the lambda with the smallest
// mean reconstruction error wins. The same noise draws are reused across
// the grid (common random numbers), so the score curve is smooth in lambda.
// Ties resolve toward the larger (more regularized) lambda.
CvResult select_lambda_cv(const Eigen::MatrixXd& jacobian, const std::vector<double>& grid,
                          double noise_std, int perturbation_count, std::uint64_t seed);

// Reconstruction CSV ("EITRECON 1"): element_id, delta_sigma rows.
void save_reconstruction(const Eigen::VectorXd& delta_sigma, const std::string& path);
Eigen::VectorXd load_reconstruction(const std::string& path);

}  // namespace eitsense

#endif
