// Sensitivity of the measured voltages to per-element conductivity, computed
// with the adjoint-field identity: the derivative of measurement m with
// respect to sigma_k is minus the gradient product of the drive field and a
// unit-current field on the measurement pair, integrated over element k.
// Forward solves are shared across rows through the pair cache, so a
// protocol with p distinct electrode pairs costs p solves.

#ifndef EITSENSE_JACOBIAN_HPP
#define EITSENSE_JACOBIAN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsense/fem.hpp"

namespace eitsense {

// Dense measurement x element matrix in V/(S/m).
Eigen::MatrixXd compute_jacobian(CemSystem& system, const Protocol& protocol);

// One row of J reshaped onto the mesh elements, for export/inspection.
Eigen::VectorXd sensitivity_map(const Eigen::MatrixXd& jacobian, int measurement_index);

// Coarse hexahedral regrouping of Jacobian columns: the mesh bounding box is
// tiled with voxel_mm cubes anchored at bbox_min, each element contributes
// its whole column to the voxel containing its centroid, and voxels that
// receive no element are dropped. Column mass is conserved exactly.
struct HexAggregation {
    Eigen::MatrixXd jacobian;                 // measurements x kept voxels
    std::vector<Eigen::Vector3d> centers;     // voxel centres, mm
    std::vector<double> volumes;              // summed member element volume, mm^3
    std::vector<std::vector<int>> members;    // element indices per voxel
    int voxel_of_element(int e) const;        // index into kept voxels
    std::vector<int> element_voxel;           // per element
};

HexAggregation aggregate_to_hex(const Mesh& mesh, const Eigen::MatrixXd& jacobian,
                                double voxel_mm);

// Binary Jacobian file ("EITJAC 1"): text header with dimensions and the
// provenance hashes of mesh, conductivity and protocol, then row-major
// little-endian float64 payload. Loading verifies dimensions and, when the
// caller passes the expected hashes, provenance.
struct JacobianRecord {
    Eigen::MatrixXd jacobian;
    std::uint64_t mesh_hash = 0;
    std::uint64_t sigma_hash = 0;
    std::uint64_t protocol_hash = 0;
};

void save_jacobian(const JacobianRecord& record, const std::string& path);
JacobianRecord load_jacobian(const std::string& path);

std::uint64_t conductivity_hash(const Conductivity& sigma);

}  // namespace eitsense

#endif
