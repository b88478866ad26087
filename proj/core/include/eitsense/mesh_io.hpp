// Text mesh format ("EITMESH 1"): node coordinates, element connectivity
// with region tags, and electrode patches by facet node tuples. Written with
// shortest round-trip floats so save/load is byte-stable.

#ifndef EITSENSE_MESH_IO_HPP
#define EITSENSE_MESH_IO_HPP

#include <iosfwd>
#include <string>

#include "eitsense/mesh.hpp"

namespace eitsense {

void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

void write_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_mesh(std::istream& in);

// Legacy-ASCII VTK unstructured grid with per-element scalars, for
// inspection in ParaView.
void export_vtk(const Mesh& mesh, const std::string& path,
                const Eigen::VectorXd& cell_values, const std::string& value_name);

}  // namespace eitsense

#endif
