#include "eitsense/jacobian.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "eitsense/io_util.hpp"
#include "eitsense/parallel.hpp"

namespace eitsense {

Eigen::MatrixXd compute_jacobian(CemSystem& system, const Protocol& protocol) {
    const Mesh& mesh = system.mesh();
    protocol.validate(mesh);
    int rows = protocol.measurement_count();
    int cols = mesh.element_count();
    Eigen::MatrixXd jacobian(rows, cols);

    // Warm the pair cache serially: every drive and measurement field comes
    // from the same factorization, and repeated pairs are exact copies.
    struct Row {
        Eigen::VectorXd drive;
        Eigen::VectorXd meas;
        double amplitude;
    };
    std::vector<Row> fields;
    fields.reserve(rows);
    for (const Injection& inj : protocol.injections) {
        Eigen::VectorXd drive = system.unit_pair_field(inj.source, inj.sink);
        for (const auto& [pos, neg] : inj.measurements)
            fields.push_back({drive, system.unit_pair_field(pos, neg), inj.amplitude});
    }

    parallel_for(rows, [&](int m) {
        const Row& row = fields[m];
        for (int e = 0; e < cols; ++e) {
            Eigen::Vector3d gd = system.element_gradient(e, row.drive);
            Eigen::Vector3d gm = system.element_gradient(e, row.meas);
            jacobian(m, e) = -row.amplitude * system.element_si_volume(e) * gd.dot(gm);
        }
    });
    return jacobian;
}

Eigen::VectorXd sensitivity_map(const Eigen::MatrixXd& jacobian, int measurement_index) {
    if (measurement_index < 0 || measurement_index >= jacobian.rows())
        throw ValidationError("measurement index " + std::to_string(measurement_index) +
                              " out of range for a " + std::to_string(jacobian.rows()) +
                              "-row Jacobian");
    return jacobian.row(measurement_index).transpose();
}

int HexAggregation::voxel_of_element(int e) const {
    if (e < 0 || e >= static_cast<int>(element_voxel.size()))
        throw ValidationError("element index out of range");
    return element_voxel[e];
}

HexAggregation aggregate_to_hex(const Mesh& mesh, const Eigen::MatrixXd& jacobian,
                                double voxel_mm) {
    if (jacobian.cols() != mesh.element_count())
        throw ValidationError("Jacobian columns do not match mesh elements");
    double min_edge = std::numeric_limits<double>::infinity();
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        for (int i = 0; i < mesh.nodes_per_element(); ++i)
            for (int j = i + 1; j < mesh.nodes_per_element(); ++j)
                min_edge = std::min(min_edge, (mesh.nodes[el[i]] - mesh.nodes[el[j]]).norm());
    }
    if (!(voxel_mm > min_edge))
        throw ValidationError("voxel size must exceed the smallest element edge (" +
                              format_double(min_edge) + " mm)");

    Eigen::Vector3d origin = mesh.bbox_min();
    Eigen::Vector3d extent = mesh.bbox_max() - origin;
    std::array<int, 3> dims;
    for (int a = 0; a < 3; ++a)
        dims[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / voxel_mm - 1e-12)));

    auto flat_index = [&](const Eigen::Vector3d& p) {
        int idx[3];
        for (int a = 0; a < 3; ++a) {
            idx[a] = static_cast<int>(std::floor((p[a] - origin[a]) / voxel_mm));
            idx[a] = std::min(std::max(idx[a], 0), dims[a] - 1);
        }
        return (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0];
    };

    // Kept voxels in flat order; every element lands in exactly one voxel.
    std::map<int, std::vector<int>> occupied;
    for (int e = 0; e < mesh.element_count(); ++e)
        occupied[flat_index(mesh.element_centroid(e))].push_back(e);
    if (occupied.empty()) throw ValidationError("voxel grid does not intersect the mesh");

    HexAggregation agg;
    agg.jacobian = Eigen::MatrixXd::Zero(jacobian.rows(), static_cast<int>(occupied.size()));
    agg.element_voxel.assign(mesh.element_count(), -1);
    int v = 0;
    for (const auto& [flat, members] : occupied) {
        int ix = flat % dims[0];
        int iy = (flat / dims[0]) % dims[1];
        int iz = flat / (dims[0] * dims[1]);
        agg.centers.push_back(origin + voxel_mm * Eigen::Vector3d(ix + 0.5, iy + 0.5, iz + 0.5));
        double volume = 0.0;
        for (int e : members) {
            agg.jacobian.col(v) += jacobian.col(e);
            volume += mesh.element_volume(e);
            agg.element_voxel[e] = v;
        }
        agg.volumes.push_back(volume);
        agg.members.push_back(members);
        ++v;
    }
    return agg;
}

void save_jacobian(const JacobianRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write Jacobian file '" + path + "'");
    out << "EITJAC 1\n";
    out << "rows " << record.jacobian.rows() << "\n";
    out << "cols " << record.jacobian.cols() << "\n";
    out << "mesh_hash " << hash_hex(record.mesh_hash) << "\n";
    out << "sigma_hash " << hash_hex(record.sigma_hash) << "\n";
    out << "protocol_hash " << hash_hex(record.protocol_hash) << "\n";
    out << "payload\n";
    for (int m = 0; m < record.jacobian.rows(); ++m)
        for (int e = 0; e < record.jacobian.cols(); ++e) write_le_f64(out, record.jacobian(m, e));
    if (!out) throw ValidationError("write failed for Jacobian file '" + path + "'");
}

JacobianRecord load_jacobian(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open Jacobian file '" + path + "'");
    std::vector<std::string> tok;
    int line = 0;
    auto fail = [&](const std::string& what) {
        throw ValidationError("Jacobian file line " + std::to_string(line) + ": " + what);
    };
    auto header = [&](const std::string& word) {
        if (!next_content_line(in, tok, line) || tok.size() != 2 || tok[0] != word)
            fail("expected '" + word + "' header");
        return tok[1];
    };
    if (header("EITJAC") != "1") fail("unsupported Jacobian format version");
    JacobianRecord record;
    int rows = static_cast<int>(parse_int(header("rows")));
    int cols = static_cast<int>(parse_int(header("cols")));
    if (rows <= 0 || cols <= 0) fail("matrix dimensions must be positive");
    record.mesh_hash = std::stoull(header("mesh_hash"), nullptr, 16);
    record.sigma_hash = std::stoull(header("sigma_hash"), nullptr, 16);
    record.protocol_hash = std::stoull(header("protocol_hash"), nullptr, 16);
    if (!next_content_line(in, tok, line) || tok.size() != 1 || tok[0] != "payload")
        fail("expected 'payload' marker");
    record.jacobian.resize(rows, cols);
    for (int m = 0; m < rows; ++m)
        for (int e = 0; e < cols; ++e) record.jacobian(m, e) = read_le_f64(in);
    return record;
}

std::uint64_t conductivity_hash(const Conductivity& sigma) {
    Fnv1a h;
    h.update_i64(sigma.size());
    for (int e = 0; e < sigma.size(); ++e) h.update_f64(sigma[e]);
    return h.digest();
}

}  // namespace eitsense
