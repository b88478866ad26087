#include "eitsense/mesh.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>

#include "eitsense/io_util.hpp"

namespace eitsense {

namespace {

// Local faces of a positively oriented tetrahedron, wound outward.
constexpr int kTetFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
// Edges of a counter-clockwise triangle; outward normal is the right-rotated
// edge direction.
constexpr int kTriEdges[3][2] = {{0, 1}, {1, 2}, {2, 0}};

}  // namespace

double Mesh::element_volume(int e) const {
    const auto& el = elements[e];
    if (dimension == 3) {
        Eigen::Vector3d a = nodes[el[1]] - nodes[el[0]];
        Eigen::Vector3d b = nodes[el[2]] - nodes[el[0]];
        Eigen::Vector3d c = nodes[el[3]] - nodes[el[0]];
        return a.cross(b).dot(c) / 6.0;
    }
    Eigen::Vector3d a = nodes[el[1]] - nodes[el[0]];
    Eigen::Vector3d b = nodes[el[2]] - nodes[el[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

Eigen::Vector3d Mesh::element_centroid(int e) const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    int k = nodes_per_element();
    for (int i = 0; i < k; ++i) c += nodes[elements[e][i]];
    return c / k;
}

double Mesh::total_volume() const {
    double v = 0.0;
    for (int e = 0; e < element_count(); ++e) v += element_volume(e);
    return v;
}

double Mesh::electrode_area(int electrode_index) const {
    double area = 0.0;
    for (int f : electrodes[electrode_index].facets) area += boundary_facets[f].area;
    return area;
}

Eigen::Vector3d Mesh::electrode_centroid(int electrode_index) const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double area = 0.0;
    for (int f : electrodes[electrode_index].facets) {
        const BoundaryFacet& facet = boundary_facets[f];
        Eigen::Vector3d fc = Eigen::Vector3d::Zero();
        for (int i = 0; i < nodes_per_facet(); ++i) fc += nodes[facet.nodes[i]];
        fc /= nodes_per_facet();
        c += facet.area * fc;
        area += facet.area;
    }
    if (area <= 0.0) throw ValidationError("electrode has zero contact area");
    return c / area;
}

const ElectrodePatch& Mesh::electrode_by_id(int id) const {
    for (const ElectrodePatch& e : electrodes)
        if (e.id == id) return e;
    throw ValidationError("no electrode with id " + std::to_string(id));
}

Eigen::Vector3d Mesh::bbox_min() const {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    for (const auto& p : nodes) lo = lo.cwiseMin(p);
    return lo;
}

Eigen::Vector3d Mesh::bbox_max() const {
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& p : nodes) hi = hi.cwiseMax(p);
    return hi;
}

bool Mesh::element_contains(int e, const Eigen::Vector3d& p) const {
    // Barycentric sign test with a volume-relative slack so points on shared
    // facets count for both neighbours.
    const auto& el = elements[e];
    double vol = element_volume(e);
    if (vol <= 0.0) return false;
    double slack = -1e-9 * vol;
    if (dimension == 3) {
        for (int i = 0; i < 4; ++i) {
            // Replace vertex i by p; same-sign sub-volume keeps p inside.
            Eigen::Vector3d v[4];
            for (int j = 0; j < 4; ++j) v[j] = nodes[el[j]];
            v[i] = p;
            double sub = (v[1] - v[0]).cross(v[2] - v[0]).dot(v[3] - v[0]) / 6.0;
            if (sub < slack) return false;
        }
        return true;
    }
    for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d v[3];
        for (int j = 0; j < 3; ++j) v[j] = nodes[el[j]];
        v[i] = p;
        Eigen::Vector3d a = v[1] - v[0];
        Eigen::Vector3d b = v[2] - v[0];
        if (0.5 * (a.x() * b.y() - a.y() * b.x()) < slack) return false;
    }
    return true;
}

int Mesh::region_of_point(const Eigen::Vector3d& p) const {
    for (int e = 0; e < element_count(); ++e)
        if (element_contains(e, p)) return region_tags[e];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int e = 0; e < element_count(); ++e) {
        double d = (element_centroid(e) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = e;
        }
    }
    return best >= 0 ? region_tags[best] : 0;
}

void Mesh::finalize() {
    boundary_facets.clear();
    int faces_per_element = dimension + 1;
    std::map<std::array<int, 3>, int> face_count;
    auto face_key = [&](int e, int f) {
        std::array<int, 3> key{-1, -1, -1};
        if (dimension == 3) {
            for (int i = 0; i < 3; ++i) key[i] = elements[e][kTetFaces[f][i]];
        } else {
            key[0] = elements[e][kTriEdges[f][0]];
            key[1] = elements[e][kTriEdges[f][1]];
        }
        std::sort(key.begin(), key.end());
        return key;
    };
    for (int e = 0; e < element_count(); ++e)
        for (int f = 0; f < faces_per_element; ++f) ++face_count[face_key(e, f)];

    for (int e = 0; e < element_count(); ++e) {
        for (int f = 0; f < faces_per_element; ++f) {
            if (face_count[face_key(e, f)] != 1) continue;
            BoundaryFacet facet;
            facet.element = e;
            if (dimension == 3) {
                for (int i = 0; i < 3; ++i) facet.nodes[i] = elements[e][kTetFaces[f][i]];
                Eigen::Vector3d a = nodes[facet.nodes[1]] - nodes[facet.nodes[0]];
                Eigen::Vector3d b = nodes[facet.nodes[2]] - nodes[facet.nodes[0]];
                Eigen::Vector3d n = a.cross(b);
                facet.area = 0.5 * n.norm();
                if (facet.area <= 0.0) throw ValidationError("degenerate boundary facet");
                facet.normal = n.normalized();
                Eigen::Vector3d fc =
                    (nodes[facet.nodes[0]] + nodes[facet.nodes[1]] + nodes[facet.nodes[2]]) / 3.0;
                if (facet.normal.dot(fc - element_centroid(e)) < 0.0) {
                    std::swap(facet.nodes[1], facet.nodes[2]);
                    facet.normal = -facet.normal;
                }
            } else {
                facet.nodes[0] = elements[e][kTriEdges[f][0]];
                facet.nodes[1] = elements[e][kTriEdges[f][1]];
                Eigen::Vector3d d = nodes[facet.nodes[1]] - nodes[facet.nodes[0]];
                facet.area = d.norm();
                if (facet.area <= 0.0) throw ValidationError("degenerate boundary edge");
                facet.normal = Eigen::Vector3d(d.y(), -d.x(), 0.0).normalized();
                Eigen::Vector3d fc = (nodes[facet.nodes[0]] + nodes[facet.nodes[1]]) / 2.0;
                if (facet.normal.dot(fc - element_centroid(e)) < 0.0) {
                    std::swap(facet.nodes[0], facet.nodes[1]);
                    facet.normal = -facet.normal;
                }
            }
            boundary_facets.push_back(facet);
        }
    }
}

void Mesh::validate() const {
    if (dimension != 2 && dimension != 3)
        throw ValidationError("mesh dimension must be 2 or 3");
    if (nodes.empty()) throw ValidationError("mesh has no nodes");
    if (elements.empty()) throw ValidationError("mesh has no elements");
    if (region_tags.size() != elements.size())
        throw ValidationError("region tag count does not match element count");

    int k = nodes_per_element();
    for (int e = 0; e < element_count(); ++e) {
        for (int i = 0; i < k; ++i) {
            int n = elements[e][i];
            if (n < 0 || n >= node_count())
                throw ValidationError("element " + std::to_string(e) +
                                      " references missing node " + std::to_string(n));
        }
        if (dimension == 2 && elements[e][3] != -1)
            throw ValidationError("2D element " + std::to_string(e) + " has a fourth node");
        double vol = element_volume(e);
        if (!(vol > 0.0))
            throw ValidationError("element " + std::to_string(e) +
                                  " is degenerate or inverted (volume " + format_double(vol) +
                                  ")");
    }

    std::vector<int> facet_owner(boundary_facets.size(), 0);
    for (const ElectrodePatch& electrode : electrodes) {
        if (electrode.facets.empty())
            throw ValidationError("electrode " + std::to_string(electrode.id) +
                                  " has no boundary facets");
        if (electrode.contact_impedance < 0.0)
            throw ValidationError("electrode " + std::to_string(electrode.id) +
                                  " has negative contact impedance");
        for (int f : electrode.facets) {
            if (f < 0 || f >= static_cast<int>(boundary_facets.size()))
                throw ValidationError("electrode " + std::to_string(electrode.id) +
                                      " references missing boundary facet " + std::to_string(f));
            if (facet_owner[f] != 0)
                throw ValidationError("boundary facet " + std::to_string(f) +
                                      " belongs to electrodes " + std::to_string(facet_owner[f]) +
                                      " and " + std::to_string(electrode.id));
            facet_owner[f] = electrode.id;
        }
    }
    for (std::size_t i = 0; i < electrodes.size(); ++i)
        for (std::size_t j = i + 1; j < electrodes.size(); ++j)
            if (electrodes[i].id == electrodes[j].id)
                throw ValidationError("duplicate electrode id " +
                                      std::to_string(electrodes[i].id));

    if (!is_connected()) throw ValidationError("mesh is not connected");
}

bool Mesh::is_connected() const {
    if (nodes.empty()) return false;
    std::vector<std::vector<int>> adjacency(nodes.size());
    int k = nodes_per_element();
    for (const auto& el : elements)
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                adjacency[el[i]].push_back(el[j]);
                adjacency[el[j]].push_back(el[i]);
            }
    std::vector<char> seen(nodes.size(), 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!frontier.empty()) {
        int n = frontier.front();
        frontier.pop();
        for (int m : adjacency[n])
            if (!seen[m]) {
                seen[m] = 1;
                ++reached;
                frontier.push(m);
            }
    }
    return reached == node_count();
}

std::uint64_t Mesh::content_hash() const {
    Fnv1a h;
    h.update_i64(dimension);
    h.update_i64(node_count());
    for (const auto& p : nodes) {
        h.update_f64(p.x());
        h.update_f64(p.y());
        h.update_f64(p.z());
    }
    h.update_i64(element_count());
    for (int e = 0; e < element_count(); ++e) {
        for (int i = 0; i < nodes_per_element(); ++i) h.update_i64(elements[e][i]);
        h.update_i64(region_tags[e]);
    }
    h.update_i64(electrode_count());
    for (const ElectrodePatch& electrode : electrodes) {
        h.update_i64(electrode.id);
        h.update_f64(electrode.contact_impedance);
        h.update_i64(static_cast<std::int64_t>(electrode.facets.size()));
        for (int f : electrode.facets)
            for (int i = 0; i < nodes_per_facet(); ++i)
                h.update_i64(boundary_facets[f].nodes[i]);
    }
    return h.digest();
}

std::string region_name(int tag) {
    if (tag <= 0) return "untagged";
    if (tag % 2 == 1) return "chamber-" + std::to_string((tag + 1) / 2);
    return "hinge-" + std::to_string(tag / 2);
}

}  // namespace eitsense
