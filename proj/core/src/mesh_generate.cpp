#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "eitsense/errors.hpp"
#include "eitsense/mesh.hpp"

namespace eitsense {

namespace {

// The six tetrahedra of the Kuhn decomposition of a unit cube: vertex chains
// 0 -> e_p0 -> e_p0+e_p1 -> (1,1,1) over all axis permutations.
constexpr int kPermutations[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                     {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

void orient_positive(Mesh& mesh, std::array<int, 4>& el) {
    Eigen::Vector3d a = mesh.nodes[el[1]] - mesh.nodes[el[0]];
    Eigen::Vector3d b = mesh.nodes[el[2]] - mesh.nodes[el[0]];
    if (el[3] >= 0) {
        Eigen::Vector3d c = mesh.nodes[el[3]] - mesh.nodes[el[0]];
        if (a.cross(b).dot(c) < 0.0) std::swap(el[2], el[3]);
    } else {
        if (a.x() * b.y() - a.y() * b.x() < 0.0) std::swap(el[1], el[2]);
    }
}

// Grid line positions along one axis, built so that line i and line n-i are
// exact floating-point mirrors about the midpoint.
std::vector<double> mirrored_axis(double length, int n) {
    std::vector<double> x(n + 1);
    for (int i = 0; i <= n; ++i) {
        if (2 * i <= n)
            x[i] = length * i / n;
        else
            x[i] = length - x[n - i];
    }
    x[0] = 0.0;
    x[n] = length;
    return x;
}

// Sutherland-Hodgman clip of a convex polygon against one half-plane
// keep_side * (p[axis] - limit) <= 0.
void clip_halfplane(std::vector<Eigen::Vector2d>& poly, int axis, double limit, double keep_side) {
    std::vector<Eigen::Vector2d> out;
    out.reserve(poly.size() + 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
        double da = keep_side * (a[axis] - limit);
        double db = keep_side * (b[axis] - limit);
        if (da <= 0.0) out.push_back(a);
        if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
            double t = da / (da - db);
            out.push_back(a + t * (b - a));
        }
    }
    poly = std::move(out);
}

double clipped_area(std::vector<Eigen::Vector2d> poly, const Eigen::Vector2d& lo,
                    const Eigen::Vector2d& hi) {
    clip_halfplane(poly, 0, lo.x(), -1.0);
    if (poly.empty()) return 0.0;
    clip_halfplane(poly, 0, hi.x(), 1.0);
    if (poly.empty()) return 0.0;
    clip_halfplane(poly, 1, lo.y(), -1.0);
    if (poly.empty()) return 0.0;
    clip_halfplane(poly, 1, hi.y(), 1.0);
    if (poly.size() < 3) return 0.0;
    double area2 = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
        area2 += a.x() * b.y() - a.y() * b.x();
    }
    return 0.5 * std::abs(area2);
}

// Overlap length of a segment with an interval (the 2D analogue of the
// facet/patch intersection).
double clipped_length(double a, double b, double lo, double hi) {
    double left = std::max(std::min(a, b), lo);
    double right = std::min(std::max(a, b), hi);
    return std::max(0.0, right - left);
}

}  // namespace

Mesh generate_box_mesh(const std::vector<double>& lengths, double target_edge_length,
                       const BoxMeshOptions& options) {
    int dim = static_cast<int>(lengths.size());
    if (dim != 2 && dim != 3)
        throw ValidationError("box mesh needs 2 or 3 side lengths, got " + std::to_string(dim));
    for (double l : lengths)
        if (!(l > 0.0)) throw ValidationError("box side lengths must be positive");
    if (!(target_edge_length > 0.0))
        throw ValidationError("target edge length must be positive");
    if (target_edge_length > *std::min_element(lengths.begin(), lengths.end()))
        throw ValidationError("target edge length exceeds the smallest box dimension");

    std::array<int, 3> n{1, 1, 1};
    std::array<std::vector<double>, 3> axis;
    for (int a = 0; a < 3; ++a) {
        double len = a < dim ? lengths[a] : 0.0;
        n[a] = a < dim ? std::max(1, static_cast<int>(std::ceil(len / target_edge_length - 1e-9)))
                       : 1;
        axis[a] = a < dim ? mirrored_axis(len, n[a]) : std::vector<double>{0.0};
    }

    Mesh mesh;
    mesh.dimension = dim;
    auto node_id = [&](int i, int j, int k) {
        return (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    };
    int nz = dim == 3 ? n[2] : 0;
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= n[1]; ++j)
            for (int i = 0; i <= n[0]; ++i)
                mesh.nodes.emplace_back(axis[0][i], axis[1][j], dim == 3 ? axis[2][k] : 0.0);

    // Per-axis mirror bit: cells in the upper half use the reflected cell
    // decomposition. Faces between neighbouring cells only depend on the
    // bits of the in-face axes, which match, so the complex stays conforming
    // for any bit pattern.
    auto mirror_bit = [&](int a, int cell) {
        return options.symmetric && cell >= (n[a] + 1) / 2;
    };

    if (dim == 3) {
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    bool m[3] = {mirror_bit(0, i), mirror_bit(1, j), mirror_bit(2, k)};
                    int base[3] = {i, j, k};
                    auto corner = [&](int u, int v, int w) {
                        int local[3] = {u, v, w};
                        int g[3];
                        for (int a = 0; a < 3; ++a)
                            g[a] = base[a] + (m[a] ? 1 - local[a] : local[a]);
                        return node_id(g[0], g[1], g[2]);
                    };
                    for (const auto& perm : kPermutations) {
                        int c[3] = {0, 0, 0};
                        std::array<int, 4> el;
                        el[0] = corner(c[0], c[1], c[2]);
                        for (int s = 0; s < 3; ++s) {
                            c[perm[s]] = 1;
                            el[s + 1] = corner(c[0], c[1], c[2]);
                        }
                        orient_positive(mesh, el);
                        mesh.elements.push_back(el);
                        mesh.region_tags.push_back(0);
                    }
                }
    } else {
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                bool m[2] = {mirror_bit(0, i), mirror_bit(1, j)};
                auto corner = [&](int u, int v) {
                    int gi = i + (m[0] ? 1 - u : u);
                    int gj = j + (m[1] ? 1 - v : v);
                    return node_id(gi, gj, 0);
                };
                std::array<int, 4> lower{corner(0, 0), corner(1, 0), corner(1, 1), -1};
                std::array<int, 4> upper{corner(0, 0), corner(1, 1), corner(0, 1), -1};
                orient_positive(mesh, lower);
                orient_positive(mesh, upper);
                mesh.elements.push_back(lower);
                mesh.elements.push_back(upper);
                mesh.region_tags.push_back(0);
                mesh.region_tags.push_back(0);
            }
    }

    mesh.finalize();
    return mesh;
}

void attach_electrode_on_face(Mesh& mesh, int axis, bool side, double contact_impedance) {
    if (axis < 0 || axis >= mesh.dimension)
        throw ValidationError("electrode face axis out of range");
    double plane = side ? mesh.bbox_max()[axis] : mesh.bbox_min()[axis];
    double tol = 1e-9 * (1.0 + std::abs(plane));
    ElectrodePatch electrode;
    electrode.id = mesh.electrode_count() + 1;
    electrode.contact_impedance = contact_impedance;
    for (int f = 0; f < static_cast<int>(mesh.boundary_facets.size()); ++f) {
        const BoundaryFacet& facet = mesh.boundary_facets[f];
        bool on_plane = true;
        for (int i = 0; i < mesh.nodes_per_facet(); ++i)
            on_plane = on_plane && std::abs(mesh.nodes[facet.nodes[i]][axis] - plane) <= tol;
        if (on_plane) electrode.facets.push_back(f);
    }
    if (electrode.facets.empty())
        throw ValidationError("no boundary facets found on the requested face");
    mesh.electrodes.push_back(std::move(electrode));
}

void attach_electrode_patch(Mesh& mesh, int axis, bool side, const Eigen::Vector3d& center,
                            double size, double contact_impedance) {
    if (axis < 0 || axis >= mesh.dimension)
        throw ValidationError("electrode face axis out of range");
    if (!(size > 0.0)) throw ValidationError("electrode patch size must be positive");
    double plane = side ? mesh.bbox_max()[axis] : mesh.bbox_min()[axis];
    double tol = 1e-9 * (1.0 + std::abs(plane));
    // In-plane axes, in coordinate order.
    int u = axis == 0 ? 1 : 0;
    int v = axis == 2 ? 1 : 2;

    ElectrodePatch electrode;
    electrode.id = mesh.electrode_count() + 1;
    electrode.contact_impedance = contact_impedance;
    double half = size / 2.0;
    // Anything overlapping the square by a meaningful area counts; facets
    // merely touching the patch border do not.
    double area_floor = 1e-9 * size * size;
    for (int f = 0; f < static_cast<int>(mesh.boundary_facets.size()); ++f) {
        const BoundaryFacet& facet = mesh.boundary_facets[f];
        bool on_plane = true;
        for (int i = 0; i < mesh.nodes_per_facet(); ++i)
            on_plane = on_plane && std::abs(mesh.nodes[facet.nodes[i]][axis] - plane) <= tol;
        if (!on_plane) continue;
        if (mesh.dimension == 3) {
            std::vector<Eigen::Vector2d> tri;
            for (int i = 0; i < 3; ++i) {
                const Eigen::Vector3d& p = mesh.nodes[facet.nodes[i]];
                tri.emplace_back(p[u], p[v]);
            }
            double overlap =
                clipped_area(tri, {center[u] - half, center[v] - half},
                             {center[u] + half, center[v] + half});
            if (overlap > area_floor) electrode.facets.push_back(f);
        } else {
            double a = mesh.nodes[facet.nodes[0]][u];
            double b = mesh.nodes[facet.nodes[1]][u];
            if (clipped_length(a, b, center[u] - half, center[u] + half) > 1e-9 * size)
                electrode.facets.push_back(f);
        }
    }
    if (electrode.facets.empty())
        throw ValidationError("electrode patch does not overlap any boundary facet");
    mesh.electrodes.push_back(std::move(electrode));
}

Mesh generate_hinged_actuator_mesh(const HingedActuatorParams& params) {
    if (!(params.length > 0.0 && params.width > 0.0 && params.thickness > 0.0))
        throw ValidationError("actuator dimensions must be positive");
    if (!(params.hinge_depth > 0.0) || params.hinge_depth >= params.length / 3.0)
        throw ValidationError("hinge depth must lie in (0, length/3)");
    if (!(params.hinge_span > 0.0) || params.hinge_span >= params.width)
        throw ValidationError("hinge span must lie in (0, width)");

    Mesh box = generate_box_mesh({params.length, params.width, params.thickness},
                                 params.target_edge_length);

    double L = params.length;
    double yc = params.width / 2.0;
    double hinge1_x = L / 3.0;
    double a = params.hinge_depth / 2.0;  // rhombus half-diagonal along x
    double b = params.hinge_span / 2.0;   // along y

    // Evaluated through the folded coordinate min(x, L-x) so mirrored
    // elements decide identically.
    auto in_diamond = [&](const Eigen::Vector3d& c) {
        double xf = std::min(c.x(), L - c.x());
        return std::abs(xf - hinge1_x) / a + std::abs(c.y() - yc) / b <= 1.0;
    };

    Mesh mesh;
    mesh.dimension = 3;
    std::vector<int> node_map(box.nodes.size(), -1);
    for (int e = 0; e < box.element_count(); ++e) {
        Eigen::Vector3d c = box.element_centroid(e);
        if (in_diamond(c)) continue;  // carve the weld
        std::array<int, 4> el;
        for (int i = 0; i < 4; ++i) {
            int n = box.elements[e][i];
            if (node_map[n] < 0) {
                node_map[n] = mesh.node_count();
                mesh.nodes.push_back(box.nodes[n]);
            }
            el[i] = node_map[n];
        }
        mesh.elements.push_back(el);

        double xf = std::min(c.x(), L - c.x());
        int half_tag;
        if (xf < hinge1_x - a)
            half_tag = chamber_tag(1);
        else if (xf <= hinge1_x + a)
            half_tag = hinge_tag(1);
        else
            half_tag = chamber_tag(2);
        // Unfold: tags mirror chamber-1 <-> chamber-3, hinge-1 <-> hinge-2.
        if (c.x() > L / 2.0 && half_tag != chamber_tag(2)) {
            half_tag = half_tag == chamber_tag(1) ? chamber_tag(3) : hinge_tag(2);
        }
        mesh.region_tags.push_back(half_tag);
    }
    mesh.finalize();

    // Electrode centres over the three chambers; the right-hand pair is
    // built as an exact mirror of the left-hand pair.
    double c1 = L / 6.0;
    std::array<double, 3> cx{c1, L / 2.0, L - c1};
    for (double x : cx) {
        attach_electrode_patch(mesh, 2, true, Eigen::Vector3d(x, yc, 0.0),
                               params.electrode_size, params.contact_impedance);
        attach_electrode_patch(mesh, 2, false, Eigen::Vector3d(x, yc, 0.0),
                               params.electrode_size, params.contact_impedance);
    }

    mesh.validate();
    return mesh;
}

Mesh generate_finger_chamber_mesh(const FingerChamberParams& params) {
    if (!(params.length > 0.0 && params.width > 0.0 && params.thickness > 0.0))
        throw ValidationError("chamber dimensions must be positive");
    Mesh mesh = generate_box_mesh({params.length, params.width, params.thickness},
                                  params.target_edge_length);
    for (int& tag : mesh.region_tags) tag = params.region_tag;
    Eigen::Vector3d center(params.length / 2.0, params.width / 2.0, 0.0);
    attach_electrode_patch(mesh, 2, true, center, params.electrode_size,
                           params.contact_impedance);
    attach_electrode_patch(mesh, 2, false, center, params.electrode_size,
                           params.contact_impedance);
    mesh.validate();
    return mesh;
}

}  // namespace eitsense
