#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "eitsense/errors.hpp"
#include "eitsense/mesh.hpp"

namespace eitsense {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::array<int, 3> sorted_tuple(std::array<int, 3> t) {
    std::sort(t.begin(), t.end());
    return t;
}

void orient_positive(const std::vector<Eigen::Vector3d>& nodes, std::array<int, 4>& el) {
    Eigen::Vector3d a = nodes[el[1]] - nodes[el[0]];
    Eigen::Vector3d b = nodes[el[2]] - nodes[el[0]];
    if (el[3] >= 0) {
        Eigen::Vector3d c = nodes[el[3]] - nodes[el[0]];
        if (a.cross(b).dot(c) < 0.0) std::swap(el[2], el[3]);
    } else {
        if (a.x() * b.y() - a.y() * b.x() < 0.0) std::swap(el[1], el[2]);
    }
}

// Looks up the boundary-facet index of every electrode facet tuple after a
// refinement pass rebuilt the facet list.
void rebind_electrodes(Mesh& mesh,
                       const std::vector<std::vector<std::array<int, 3>>>& electrode_tuples,
                       const std::vector<ElectrodePatch>& old_electrodes) {
    std::map<std::array<int, 3>, int> facet_index;
    for (int f = 0; f < static_cast<int>(mesh.boundary_facets.size()); ++f) {
        std::array<int, 3> key = mesh.boundary_facets[f].nodes;
        if (mesh.dimension == 2) key[2] = -1;
        facet_index[sorted_tuple(key)] = f;
    }
    for (std::size_t l = 0; l < electrode_tuples.size(); ++l) {
        ElectrodePatch electrode;
        electrode.id = old_electrodes[l].id;
        electrode.contact_impedance = old_electrodes[l].contact_impedance;
        for (const auto& tuple : electrode_tuples[l]) {
            auto it = facet_index.find(sorted_tuple(tuple));
            if (it == facet_index.end())
                throw NumericalError("refinement lost an electrode facet");
            electrode.facets.push_back(it->second);
        }
        std::sort(electrode.facets.begin(), electrode.facets.end());
        mesh.electrodes.push_back(std::move(electrode));
    }
}

std::vector<std::vector<std::array<int, 3>>> electrode_node_tuples(const Mesh& mesh) {
    std::vector<std::vector<std::array<int, 3>>> tuples(mesh.electrodes.size());
    for (std::size_t l = 0; l < mesh.electrodes.size(); ++l)
        for (int f : mesh.electrodes[l].facets) {
            std::array<int, 3> t = mesh.boundary_facets[f].nodes;
            if (mesh.dimension == 2) t[2] = -1;
            tuples[l].push_back(t);
        }
    return tuples;
}

}  // namespace

Mesh refine_uniform(const Mesh& mesh) {
    Mesh fine;
    fine.dimension = mesh.dimension;
    fine.nodes = mesh.nodes;

    std::map<Edge, int> midpoint;
    auto mid = [&](int a, int b) {
        Edge key = make_edge(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        int id = fine.node_count();
        fine.nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
        midpoint[key] = id;
        return id;
    };
    auto emit = [&](std::array<int, 4> el, int tag) {
        orient_positive(fine.nodes, el);
        fine.elements.push_back(el);
        fine.region_tags.push_back(tag);
    };

    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        int tag = mesh.region_tags[e];
        if (mesh.dimension == 3) {
            int m01 = mid(el[0], el[1]), m02 = mid(el[0], el[2]), m03 = mid(el[0], el[3]);
            int m12 = mid(el[1], el[2]), m13 = mid(el[1], el[3]), m23 = mid(el[2], el[3]);
            emit({el[0], m01, m02, m03}, tag);
            emit({el[1], m01, m12, m13}, tag);
            emit({el[2], m02, m12, m23}, tag);
            emit({el[3], m03, m13, m23}, tag);
            // The interior octahedron splits along its shortest diagonal
            // (first in listing order on exact ties).
            struct Diagonal {
                int p, q;
                std::array<int, 4> cycle;
            };
            Diagonal candidates[3] = {
                {m01, m23, {m02, m03, m13, m12}},
                {m02, m13, {m01, m03, m23, m12}},
                {m03, m12, {m01, m02, m23, m13}},
            };
            int best = 0;
            double best_len = (fine.nodes[m01] - fine.nodes[m23]).squaredNorm();
            for (int d = 1; d < 3; ++d) {
                double len =
                    (fine.nodes[candidates[d].p] - fine.nodes[candidates[d].q]).squaredNorm();
                if (len < best_len) {
                    best_len = len;
                    best = d;
                }
            }
            const Diagonal& diag = candidates[best];
            for (int i = 0; i < 4; ++i)
                emit({diag.p, diag.q, diag.cycle[i], diag.cycle[(i + 1) % 4]}, tag);
        } else {
            int m01 = mid(el[0], el[1]), m12 = mid(el[1], el[2]), m02 = mid(el[0], el[2]);
            emit({el[0], m01, m02, -1}, tag);
            emit({m01, el[1], m12, -1}, tag);
            emit({m02, m12, el[2], -1}, tag);
            emit({m01, m12, m02, -1}, tag);
        }
    }

    // Children of the electrode facets, before rebinding to facet indices.
    std::vector<std::vector<std::array<int, 3>>> tuples(mesh.electrodes.size());
    for (std::size_t l = 0; l < mesh.electrodes.size(); ++l) {
        for (int f : mesh.electrodes[l].facets) {
            const auto& fn = mesh.boundary_facets[f].nodes;
            if (mesh.dimension == 3) {
                int mab = mid(fn[0], fn[1]), mbc = mid(fn[1], fn[2]), mac = mid(fn[0], fn[2]);
                tuples[l].push_back({fn[0], mab, mac});
                tuples[l].push_back({mab, fn[1], mbc});
                tuples[l].push_back({mac, mbc, fn[2]});
                tuples[l].push_back({mab, mbc, mac});
            } else {
                int mab = mid(fn[0], fn[1]);
                tuples[l].push_back({fn[0], mab, -1});
                tuples[l].push_back({mab, fn[1], -1});
            }
        }
    }

    fine.finalize();
    rebind_electrodes(fine, tuples, mesh.electrodes);
    return fine;
}

namespace {

// Mutable mesh state for longest-edge bisection with conforming closure.
struct Bisector {
    int dimension;
    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::array<int, 4>> elements;
    std::vector<int> tags;
    std::vector<char> alive;
    std::map<Edge, std::vector<int>> incidence;
    std::vector<std::vector<std::array<int, 3>>> electrode_tuples;
    long long splits = 0;

    int corners() const { return dimension + 1; }

    explicit Bisector(const Mesh& mesh)
        : dimension(mesh.dimension),
          nodes(mesh.nodes),
          tags(mesh.region_tags),
          electrode_tuples(electrode_node_tuples(mesh)) {
        elements = mesh.elements;
        alive.assign(elements.size(), 1);
        for (int e = 0; e < static_cast<int>(elements.size()); ++e) index_edges(e);
    }

    void index_edges(int e) {
        const auto& el = elements[e];
        for (int i = 0; i < corners(); ++i)
            for (int j = i + 1; j < corners(); ++j)
                incidence[make_edge(el[i], el[j])].push_back(e);
    }

    bool has_edge(int e, const Edge& edge) const {
        const auto& el = elements[e];
        bool a = false, b = false;
        for (int i = 0; i < corners(); ++i) {
            a = a || el[i] == edge.first;
            b = b || el[i] == edge.second;
        }
        return a && b;
    }

    // Unique longest edge: length first, (min, max) node pair on exact ties.
    Edge longest_edge(int e) const {
        const auto& el = elements[e];
        Edge best{-1, -1};
        double best_len = -1.0;
        for (int i = 0; i < corners(); ++i)
            for (int j = i + 1; j < corners(); ++j) {
                Edge cand = make_edge(el[i], el[j]);
                double len = (nodes[cand.first] - nodes[cand.second]).squaredNorm();
                if (len > best_len || (len == best_len && cand < best)) {
                    best_len = len;
                    best = cand;
                }
            }
        return best;
    }

    std::vector<int> sharers(const Edge& edge) {
        std::vector<int> live;
        auto it = incidence.find(edge);
        if (it == incidence.end()) return live;
        for (int e : it->second)
            if (alive[e] && has_edge(e, edge)) live.push_back(e);
        // Stale entries accumulate as elements die; prune on touch.
        it->second = live;
        return live;
    }

    void bisect(int e, const Edge& edge, int m) {
        std::array<int, 4> left = elements[e];
        std::array<int, 4> right = elements[e];
        for (int i = 0; i < corners(); ++i) {
            if (left[i] == edge.second) left[i] = m;
            if (right[i] == edge.first) right[i] = m;
        }
        alive[e] = 0;
        for (auto child : {left, right}) {
            Eigen::Vector3d a = nodes[child[1]] - nodes[child[0]];
            Eigen::Vector3d b = nodes[child[2]] - nodes[child[0]];
            double vol = child[3] >= 0 ? a.cross(b).dot(nodes[child[3]] - nodes[child[0]]) / 6.0
                                       : 0.5 * (a.x() * b.y() - a.y() * b.x());
            if (vol == 0.0 || !std::isfinite(vol))
                throw NumericalError("bisection produced a degenerate element");
            orient_positive(nodes, child);
            int id = static_cast<int>(elements.size());
            elements.push_back(child);
            tags.push_back(tags[e]);
            alive.push_back(1);
            index_edges(id);
        }
    }

    // Rivara refinement: neighbours whose longest edge differs are split
    // first, then every element sharing the edge is bisected at once, so the
    // complex stays conforming after every call.
    void split_edge(const Edge& edge, int depth = 0) {
        if (depth > 128 || ++splits > 20'000'000)
            throw NumericalError("longest-edge bisection did not terminate");
        for (;;) {
            std::vector<int> share = sharers(edge);
            if (share.empty()) return;  // already gone via a neighbour split
            bool conforming = true;
            for (int e : share) {
                Edge le = longest_edge(e);
                if (le != edge) {
                    conforming = false;
                    split_edge(le, depth + 1);
                    break;  // sharers changed; rescan
                }
            }
            if (!conforming) continue;
            int m = static_cast<int>(nodes.size());
            nodes.push_back(0.5 * (nodes[edge.first] + nodes[edge.second]));
            for (int e : share) bisect(e, edge, m);
            split_electrode_tuples(edge, m);
            return;
        }
    }

    void split_electrode_tuples(const Edge& edge, int m) {
        for (auto& patch : electrode_tuples) {
            std::vector<std::array<int, 3>> next;
            next.reserve(patch.size());
            for (const auto& t : patch) {
                bool has_a = t[0] == edge.first || t[1] == edge.first || t[2] == edge.first;
                bool has_b = t[0] == edge.second || t[1] == edge.second || t[2] == edge.second;
                if (has_a && has_b) {
                    std::array<int, 3> left = t, right = t;
                    for (int i = 0; i < 3; ++i) {
                        if (left[i] == edge.second) left[i] = m;
                        if (right[i] == edge.first) right[i] = m;
                    }
                    next.push_back(left);
                    next.push_back(right);
                } else {
                    next.push_back(t);
                }
            }
            patch = std::move(next);
        }
    }

    Mesh finish(const Mesh& original) const {
        Mesh out;
        out.dimension = dimension;
        out.nodes = nodes;
        for (int e = 0; e < static_cast<int>(elements.size()); ++e) {
            if (!alive[e]) continue;
            out.elements.push_back(elements[e]);
            out.region_tags.push_back(tags[e]);
        }
        out.finalize();
        rebind_electrodes(out, electrode_tuples, original.electrodes);
        return out;
    }
};

}  // namespace

Mesh refine_near_electrodes(const Mesh& mesh, double radius, double factor) {
    if (!(radius > 0.0)) throw ValidationError("refinement radius must be positive");
    if (!(factor >= 1.0)) throw ValidationError("refinement factor must be at least 1");
    if (mesh.electrodes.empty())
        throw ValidationError("mesh has no electrodes to refine around");
    int sweeps = static_cast<int>(std::ceil(std::log2(factor) - 1e-12));
    if (sweeps <= 0) return mesh;

    std::vector<Eigen::Vector3d> centers;
    for (int l = 0; l < mesh.electrode_count(); ++l) centers.push_back(mesh.electrode_centroid(l));

    Bisector state(mesh);
    double r2 = radius * radius;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        std::vector<int> marked;
        for (int e = 0; e < static_cast<int>(state.elements.size()); ++e) {
            if (!state.alive[e]) continue;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (int i = 0; i < state.corners(); ++i) c += state.nodes[state.elements[e][i]];
            c /= state.corners();
            for (const auto& ec : centers)
                if ((c - ec).squaredNorm() <= r2) {
                    marked.push_back(e);
                    break;
                }
        }
        for (int e : marked) {
            if (!state.alive[e]) continue;  // a closure split already took it
            state.split_edge(state.longest_edge(e));
        }
    }
    return state.finish(mesh);
}

}  // namespace eitsense
