#include "eitsense/mesh_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "eitsense/errors.hpp"
#include "eitsense/io_util.hpp"

namespace eitsense {

void write_mesh(const Mesh& mesh, std::ostream& out) {
    out << "EITMESH 1\n";
    out << "dimension " << mesh.dimension << "\n";
    out << "nodes " << mesh.node_count() << "\n";
    for (int n = 0; n < mesh.node_count(); ++n) {
        out << n;
        for (int a = 0; a < mesh.dimension; ++a) out << ' ' << format_double(mesh.nodes[n][a]);
        out << '\n';
    }
    out << "elements " << mesh.element_count() << "\n";
    for (int e = 0; e < mesh.element_count(); ++e) {
        out << e;
        for (int i = 0; i < mesh.nodes_per_element(); ++i) out << ' ' << mesh.elements[e][i];
        out << ' ' << mesh.region_tags[e] << '\n';
    }
    out << "electrodes " << mesh.electrode_count() << "\n";
    for (const ElectrodePatch& electrode : mesh.electrodes) {
        out << electrode.id << ' ' << format_double(electrode.contact_impedance) << ' '
            << electrode.facets.size() << '\n';
        for (int f : electrode.facets) {
            const BoundaryFacet& facet = mesh.boundary_facets[f];
            out << facet.nodes[0];
            for (int i = 1; i < mesh.nodes_per_facet(); ++i) out << ' ' << facet.nodes[i];
            out << '\n';
        }
    }
}

Mesh read_mesh(std::istream& in) {
    std::vector<std::string> tok;
    int line = 0;
    auto fail = [&](const std::string& what) {
        throw ValidationError("mesh file line " + std::to_string(line) + ": " + what);
    };
    auto expect_header = [&](const std::string& word, int count) {
        if (!next_content_line(in, tok, line) || tok.size() != static_cast<std::size_t>(count) ||
            tok[0] != word)
            fail("expected '" + word + "' header");
    };

    expect_header("EITMESH", 2);
    if (tok[1] != "1") fail("unsupported mesh format version " + tok[1]);

    Mesh mesh;
    expect_header("dimension", 2);
    mesh.dimension = static_cast<int>(parse_int(tok[1]));
    if (mesh.dimension != 2 && mesh.dimension != 3) fail("dimension must be 2 or 3");

    expect_header("nodes", 2);
    int node_count = static_cast<int>(parse_int(tok[1]));
    if (node_count <= 0) fail("node count must be positive");
    mesh.nodes.reserve(node_count);
    for (int n = 0; n < node_count; ++n) {
        if (!next_content_line(in, tok, line) ||
            tok.size() != static_cast<std::size_t>(1 + mesh.dimension))
            fail("expected node line with id and " + std::to_string(mesh.dimension) +
                 " coordinates");
        if (parse_int(tok[0]) != n) fail("node ids must be sequential from 0");
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        for (int a = 0; a < mesh.dimension; ++a) p[a] = parse_double(tok[1 + a]);
        mesh.nodes.push_back(p);
    }

    expect_header("elements", 2);
    int element_count = static_cast<int>(parse_int(tok[1]));
    if (element_count <= 0) fail("element count must be positive");
    int k = mesh.nodes_per_element();
    mesh.elements.reserve(element_count);
    for (int e = 0; e < element_count; ++e) {
        if (!next_content_line(in, tok, line) || tok.size() != static_cast<std::size_t>(2 + k))
            fail("expected element line with id, " + std::to_string(k) +
                 " nodes and a region tag");
        if (parse_int(tok[0]) != e) fail("element ids must be sequential from 0");
        std::array<int, 4> el{-1, -1, -1, -1};
        for (int i = 0; i < k; ++i) el[i] = static_cast<int>(parse_int(tok[1 + i]));
        mesh.elements.push_back(el);
        mesh.region_tags.push_back(static_cast<int>(parse_int(tok[1 + k])));
    }

    expect_header("electrodes", 2);
    int electrode_count = static_cast<int>(parse_int(tok[1]));
    if (electrode_count < 0) fail("electrode count must be non-negative");

    // Facets are identified by node tuples in the file; bind them to the
    // recomputed boundary list.
    mesh.finalize();
    std::map<std::array<int, 3>, int> facet_index;
    for (int f = 0; f < static_cast<int>(mesh.boundary_facets.size()); ++f) {
        std::array<int, 3> key = mesh.boundary_facets[f].nodes;
        if (mesh.dimension == 2) key[2] = -1;
        std::sort(key.begin(), key.end());
        facet_index[key] = f;
    }

    for (int l = 0; l < electrode_count; ++l) {
        if (!next_content_line(in, tok, line) || tok.size() != 3)
            fail("expected electrode line: id z_contact facet_count");
        ElectrodePatch electrode;
        electrode.id = static_cast<int>(parse_int(tok[0]));
        electrode.contact_impedance = parse_double(tok[1]);
        if (!(electrode.contact_impedance > 0.0))
            fail("electrode " + std::to_string(electrode.id) +
                 " contact impedance must be positive");
        int facet_count = static_cast<int>(parse_int(tok[2]));
        if (facet_count <= 0) fail("electrode facet count must be positive");
        for (int f = 0; f < facet_count; ++f) {
            if (!next_content_line(in, tok, line) ||
                tok.size() != static_cast<std::size_t>(mesh.nodes_per_facet()))
                fail("expected facet line with " + std::to_string(mesh.nodes_per_facet()) +
                     " node ids");
            std::array<int, 3> key{-1, -1, -1};
            for (int i = 0; i < mesh.nodes_per_facet(); ++i)
                key[i] = static_cast<int>(parse_int(tok[i]));
            std::sort(key.begin(), key.end());
            auto it = facet_index.find(key);
            if (it == facet_index.end())
                fail("electrode " + std::to_string(electrode.id) +
                     " facet is not a boundary facet");
            electrode.facets.push_back(it->second);
        }
        mesh.electrodes.push_back(std::move(electrode));
    }
    if (next_content_line(in, tok, line)) fail("trailing content after electrodes section");

    mesh.validate();
    return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw ValidationError("cannot write mesh file '" + path + "'");
    write_mesh(mesh, out);
    if (!out) throw ValidationError("write failed for mesh file '" + path + "'");
}

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

void export_vtk(const Mesh& mesh, const std::string& path, const Eigen::VectorXd& cell_values,
                const std::string& value_name) {
    if (cell_values.size() != mesh.element_count())
        throw ValidationError("cell value count does not match element count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write VTK file '" + path + "'");
    out << "# vtk DataFile Version 3.0\n";
    out << "eitsense export\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& p : mesh.nodes)
        out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
            << format_double(p.z()) << '\n';
    int k = mesh.nodes_per_element();
    out << "CELLS " << mesh.element_count() << ' ' << mesh.element_count() * (k + 1) << '\n';
    for (int e = 0; e < mesh.element_count(); ++e) {
        out << k;
        for (int i = 0; i < k; ++i) out << ' ' << mesh.elements[e][i];
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.element_count() << '\n';
    int cell_type = mesh.dimension == 3 ? 10 : 5;  // tetra / triangle
    for (int e = 0; e < mesh.element_count(); ++e) out << cell_type << '\n';
    out << "CELL_DATA " << mesh.element_count() << '\n';
    out << "SCALARS " << value_name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int e = 0; e < mesh.element_count(); ++e) out << format_double(cell_values[e]) << '\n';
    if (!out) throw ValidationError("write failed for VTK file '" + path + "'");
}

}  // namespace eitsense
