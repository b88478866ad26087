// Simplicial finite-element meshes (triangles in 2D, tetrahedra in 3D) with
// boundary electrode patches. Coordinates are in millimetres; contact
// impedances are in Ohm*m^2 (Ohm*m in 2D). Meshes are immutable after
// construction: generators and refiners return new values.

#ifndef EITSENSE_MESH_HPP
#define EITSENSE_MESH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsense/errors.hpp"

namespace eitsense {

// One boundary facet (triangle in 3D, segment in 2D) with its owning element
// and outward geometry. Rebuilt by Mesh::finalize().
struct BoundaryFacet {
    std::array<int, 3> nodes{-1, -1, -1};  // third entry unused in 2D
    int element = -1;
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // unit, outward
    double area = 0.0;                                 // mm^2 (mm in 2D)
};

struct ElectrodePatch {
    int id = 0;                       // 1-based, 1..L
    double contact_impedance = 1e-3;  // Ohm*m^2 (Ohm*m in 2D)
    std::vector<int> facets;          // indices into Mesh::boundary_facets
};

class Mesh {
public:
    int dimension = 3;
    std::vector<Eigen::Vector3d> nodes;        // mm; z = 0 in 2D
    std::vector<std::array<int, 4>> elements;  // last entry -1 in 2D
    std::vector<int> region_tags;              // per element, 0 = untagged
    std::vector<BoundaryFacet> boundary_facets;
    std::vector<ElectrodePatch> electrodes;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }
    int electrode_count() const { return static_cast<int>(electrodes.size()); }
    int nodes_per_element() const { return dimension + 1; }
    int nodes_per_facet() const { return dimension; }

    // Signed volume (area in 2D) of element e, in mm^dim.
    double element_volume(int e) const;
    Eigen::Vector3d element_centroid(int e) const;
    double total_volume() const;

    double electrode_area(int electrode_index) const;       // mm^dim-1
    Eigen::Vector3d electrode_centroid(int electrode_index) const;
    const ElectrodePatch& electrode_by_id(int id) const;

    Eigen::Vector3d bbox_min() const;
    Eigen::Vector3d bbox_max() const;

    // Region tag of a point, resolved through the element containing it
    // (nearest element centroid as fallback for points on facet seams).
    int region_of_point(const Eigen::Vector3d& p) const;
    bool element_contains(int e, const Eigen::Vector3d& p) const;

    // Recomputes boundary facets (faces owned by exactly one element) with
    // outward normals and areas. Must be called after editing connectivity
    // and before validate().
    void finalize();

    // Checks all structural invariants; throws ValidationError on the first
    // violation: positive element volumes, electrode facets on the boundary,
    // pairwise-disjoint patches with positive contact impedance, and a single
    // node-connected component.
    void validate() const;

    bool is_connected() const;

    // Canonical byte serialization hash for provenance records.
    std::uint64_t content_hash() const;
};

// Region tag scheme used by the actuator generators: chambers and hinges
// interleave along the length axis. chamber-1=1, hinge-1=2, chamber-2=3, ...
inline int chamber_tag(int i) { return 2 * i - 1; }
inline int hinge_tag(int i) { return 2 * i; }
std::string region_name(int tag);

struct BoxMeshOptions {
    // Mirror the per-cell decomposition about each axis midplane (axes with
    // an even cell count only). Makes the simplicial complex exactly
    // symmetric under coordinate reflection, which the actuator generators
    // rely on.
    bool symmetric = true;
};

// Structured box mesh: cells split into 6 tetrahedra (2 triangles in 2D).
// lengths has 2 or 3 entries (mm). Rejects target_edge_length larger than
// the smallest box dimension.
Mesh generate_box_mesh(const std::vector<double>& lengths, double target_edge_length,
                       const BoxMeshOptions& options = {});

struct HingedActuatorParams {
    double length = 200.0;       // mm, along x
    double width = 50.0;         // mm, along y
    double thickness = 8.0;      // mm, along z (inflated profile)
    double hinge_span = 20.0;    // diamond extent across the width (y)
    double hinge_depth = 10.0;   // diamond extent along the length (x)
    double target_edge_length = 2.5;
    double electrode_size = 2.0;     // square patch edge, mm
    double contact_impedance = 1e-3; // Ohm*m^2
};

// Double-hinge actuator: three chambers separated by two diamond
// constrictions, six electrodes (three per face) numbered to match the
// shipped protocol: 1/2 over chamber-1 (top/bottom), 3/4 over chamber-2,
// 5/6 over chamber-3.
Mesh generate_hinged_actuator_mesh(const HingedActuatorParams& params = {});

struct FingerChamberParams {
    double length = 25.0;        // mm, along x
    double width = 10.0;         // mm, along y
    double thickness = 4.0;      // mm
    double target_edge_length = 1.0;
    double electrode_size = 2.0;
    double contact_impedance = 1e-3;
    int region_tag = chamber_tag(1);
};

// Single hydraulic finger chamber with two electrodes facing each other
// across the chamber centre (ids 1 = top, 2 = bottom).
Mesh generate_finger_chamber_mesh(const FingerChamberParams& params = {});

// Attaches an electrode covering every boundary facet of one axis-aligned
// box face. axis in {0,1,2}, side false = min face, true = max face.
void attach_electrode_on_face(Mesh& mesh, int axis, bool side, double contact_impedance);

// Attaches a rectangular electrode patch on an axis-aligned face: all
// boundary facets of that face intersecting the size x size square centred
// at `center` (in-plane coordinates of the remaining two axes, mm).
void attach_electrode_patch(Mesh& mesh, int axis, bool side, const Eigen::Vector3d& center,
                            double size, double contact_impedance);

// Uniform red refinement: every element is split (1 -> 2^dim children via
// edge midpoints); conforming by construction.
Mesh refine_uniform(const Mesh& mesh);

// Local refinement around electrodes by conforming longest-edge bisection.
// Elements whose centroid lies within `radius` mm of any electrode centroid
// are bisected ceil(log2(factor)) times per sweep set; factor == 1 returns
// an identical copy. Throws NumericalError if a split would produce a
// degenerate element.
Mesh refine_near_electrodes(const Mesh& mesh, double radius, double factor);

}  // namespace eitsense

#endif
