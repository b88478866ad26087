// Complete-electrode-model forward solver. DOFs are the node potentials
// followed by one voltage per electrode; current conservation is closed with
// a sum-zero electrode-voltage gauge. Electrodes with positive contact
// impedance couple through Robin boundary blocks; electrodes with zero
// contact impedance (ideal shunts) are handled exactly by tying their patch
// nodes to the electrode voltage DOF.

#ifndef EITSENSE_FEM_HPP
#define EITSENSE_FEM_HPP

#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "eitsense/conductivity.hpp"
#include "eitsense/mesh.hpp"
#include "eitsense/protocol.hpp"

namespace eitsense {

struct ForwardSolution {
    Eigen::VectorXd node_potentials;    // V, one per node
    Eigen::VectorXd electrode_voltages; // V, sum-zero gauge
};

struct ForwardResult {
    std::vector<ForwardSolution> solutions;  // one per injection
    Eigen::VectorXd measurements;            // V, injection-major flat order
};

// Gauge fixing for the floating potential: constrain the electrode voltages
// to sum to zero (default, keeps electrode symmetry) or pin the potential of
// node 0.
enum class Grounding { kSumZero, kSingleNode };

class CemSystem {
public:
    // The mesh must outlive the system. Throws ValidationError for meshes
    // without electrodes or conductivities that do not fit the mesh.
    CemSystem(const Mesh& mesh, const Conductivity& sigma,
              Grounding grounding = Grounding::kSumZero);

    // Re-assembles the conductivity-dependent stiffness block and drops the
    // factorization and pair cache. Geometry factors are reused.
    void update_conductivity(const Conductivity& sigma);

    const Mesh& mesh() const { return mesh_; }
    const Conductivity& conductivity() const { return sigma_; }

    // Full field (node potentials, then electrode voltages) for one ampere
    // driven source -> sink, by electrode id. Solutions are cached per
    // unordered pair until the conductivity changes, so reciprocal and
    // repeated requests are exact copies.
    Eigen::VectorXd unit_pair_field(int source_id, int sink_id);

    ForwardSolution solve_injection(const Injection& injection);

    // Solves every injection of the protocol and differences electrode
    // voltages into the flat measurement vector.
    ForwardResult forward(const Protocol& protocol);

    // Net current absorbed by each electrode (A), recovered from discrete
    // fluxes of the solution. For a consistent solve this reproduces the
    // injection pattern to solver precision (Kirchhoff check).
    Eigen::VectorXd electrode_currents(const ForwardSolution& solution) const;

    // Gradient (V/m) of a full solution field inside element e, and the
    // element measure in SI units (m^3, or m^2 at unit depth in 2D). These
    // are the ingredients of the adjoint sensitivity integral.
    Eigen::Vector3d element_gradient(int e, const Eigen::VectorXd& field) const;
    double element_si_volume(int e) const { return si_volume_[e]; }

    bool electrode_is_tied(int electrode_index) const { return tied_[electrode_index]; }
    int reduced_dof_count() const { return static_cast<int>(transfer_.cols()); }

    // Grounded system matrix (transfer' * K * transfer): symmetric positive
    // definite. Exposed for spectral checks.
    const Eigen::SparseMatrix<double>& reduced_matrix() const { return reduced_; }

private:
    void build_geometry_factors();
    void build_transfer();
    void assemble();
    void factorize();
    Eigen::VectorXd solve_unit(int source_id, int sink_id);

    const Mesh& mesh_;
    Conductivity sigma_;
    Grounding grounding_ = Grounding::kSumZero;
    int n_ = 0;  // nodes
    int L_ = 0;  // electrodes

    // Per-element basis gradients (1/m) and measures (SI); the stiffness
    // geometry factor is volume * grad * grad', scaled by sigma_e on
    // assembly.
    std::vector<Eigen::Matrix<double, 4, 3>> gradients_;
    std::vector<double> si_volume_;
    std::vector<Eigen::Matrix4d> element_stiffness_;
    std::vector<bool> tied_;                 // per electrode: z == 0
    Eigen::SparseMatrix<double> transfer_;   // (n+L) x reduced: ties + gauge
    Eigen::SparseMatrix<double> impedance_;  // fixed Robin blocks, (n+L)^2
    Eigen::SparseMatrix<double> volume_;     // sigma-dependent block, (n+L)^2
    Eigen::SparseMatrix<double> reduced_;    // transfer' * (volume+impedance) * transfer
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
    bool factorized_ = false;
    std::map<std::pair<int, int>, Eigen::VectorXd> pair_cache_;
};

// One-call forward solve.
Eigen::VectorXd forward_measurements(const Mesh& mesh, const Conductivity& sigma,
                                     const Protocol& protocol);

}  // namespace eitsense

#endif
