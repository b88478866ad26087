#include "eitsense/fem.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "eitsense/errors.hpp"

namespace eitsense {

namespace {

constexpr double kMm = 1e-3;  // mesh coordinates are mm, assembly is SI

}  // namespace

CemSystem::CemSystem(const Mesh& mesh, const Conductivity& sigma, Grounding grounding)
    : mesh_(mesh), sigma_(sigma), grounding_(grounding) {
    mesh_.validate();
    sigma_.validate(mesh_);
    if (mesh_.electrode_count() < 2)
        throw ValidationError("forward model needs at least 2 electrodes, mesh has " +
                              std::to_string(mesh_.electrode_count()));
    for (const ElectrodePatch& e : mesh_.electrodes)
        if (e.contact_impedance < 0.0)
            throw ValidationError("electrode " + std::to_string(e.id) +
                                  " has negative contact impedance");
    n_ = mesh_.node_count();
    L_ = mesh_.electrode_count();
    build_geometry_factors();
    build_transfer();
    assemble();
}

void CemSystem::build_geometry_factors() {
    int count = mesh_.element_count();
    gradients_.assign(count, Eigen::Matrix<double, 4, 3>::Zero());
    si_volume_.assign(count, 0.0);
    element_stiffness_.assign(count, Eigen::Matrix4d::Zero());
    for (int e = 0; e < count; ++e) {
        const auto& el = mesh_.elements[e];
        Eigen::Matrix<double, 4, 3>& grad = gradients_[e];
        if (mesh_.dimension == 3) {
            Eigen::Vector3d p0 = mesh_.nodes[el[0]] * kMm;
            Eigen::Matrix3d edges;
            for (int i = 0; i < 3; ++i) edges.col(i) = mesh_.nodes[el[i + 1]] * kMm - p0;
            double vol = edges.determinant() / 6.0;
            if (!(vol > 0.0))
                throw ValidationError("element " + std::to_string(e) + " has non-positive volume");
            // Barycentric gradients: rows of the inverse edge matrix, with
            // the first summing the rest to zero.
            Eigen::Matrix3d inv = edges.inverse();
            for (int i = 0; i < 3; ++i) grad.row(i + 1) = inv.row(i);
            grad.row(0) = -(grad.row(1) + grad.row(2) + grad.row(3));
            si_volume_[e] = vol;
        } else {
            Eigen::Vector2d p0 = (mesh_.nodes[el[0]] * kMm).head<2>();
            Eigen::Matrix2d edges;
            for (int i = 0; i < 2; ++i)
                edges.col(i) = (mesh_.nodes[el[i + 1]] * kMm).head<2>() - p0;
            double area = edges.determinant() / 2.0;
            if (!(area > 0.0))
                throw ValidationError("element " + std::to_string(e) + " has non-positive area");
            Eigen::Matrix2d inv = edges.inverse();
            for (int i = 0; i < 2; ++i) grad.row(i + 1).head<2>() = inv.row(i);
            grad.row(0) = -(grad.row(1) + grad.row(2));
            si_volume_[e] = area;  // unit depth
        }
        element_stiffness_[e] = si_volume_[e] * grad * grad.transpose();
    }
}

Eigen::Vector3d CemSystem::element_gradient(int e, const Eigen::VectorXd& field) const {
    const auto& el = mesh_.elements[e];
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int i = 0; i < mesh_.nodes_per_element(); ++i)
        g += field[el[i]] * gradients_[e].row(i).transpose();
    return g;
}

void CemSystem::build_transfer() {
    tied_.assign(L_, false);
    // Node -> tying electrode (exact shunts only).
    std::vector<int> tied_to(n_, -1);
    for (int l = 0; l < L_; ++l) {
        if (mesh_.electrodes[l].contact_impedance != 0.0) continue;
        tied_[l] = true;
        for (int f : mesh_.electrodes[l].facets)
            for (int i = 0; i < mesh_.nodes_per_facet(); ++i) {
                int node = mesh_.boundary_facets[f].nodes[i];
                if (tied_to[node] >= 0 && tied_to[node] != l)
                    throw ValidationError(
                        "node " + std::to_string(node) + " is shunted by electrodes " +
                        std::to_string(mesh_.electrodes[tied_to[node]].id) + " and " +
                        std::to_string(mesh_.electrodes[l].id));
                tied_to[node] = l;
            }
    }

    // Reduced variables: free nodes first, then electrode voltages (minus
    // the gauge-dependent one).
    int ground_node = -1;
    if (grounding_ == Grounding::kSingleNode) {
        for (int i = 0; i < n_ && ground_node < 0; ++i)
            if (tied_to[i] < 0) ground_node = i;
        if (ground_node < 0)
            throw ValidationError("single-node grounding needs at least one free node");
    }
    std::vector<int> node_var(n_, -1);
    int next = 0;
    for (int i = 0; i < n_; ++i)
        if (tied_to[i] < 0 && i != ground_node) node_var[i] = next++;
    std::vector<int> electrode_var(L_, -1);
    int kept_electrodes = grounding_ == Grounding::kSumZero ? L_ - 1 : L_;
    for (int l = 0; l < kept_electrodes; ++l) electrode_var[l] = next++;
    int reduced = next;

    std::vector<Eigen::Triplet<double>> trip;
    auto electrode_combo = [&](int row, int l) {
        if (electrode_var[l] >= 0) {
            trip.emplace_back(row, electrode_var[l], 1.0);
        } else {
            // Sum-zero gauge eliminates the last electrode voltage.
            for (int k = 0; k < L_ - 1; ++k) trip.emplace_back(row, electrode_var[k], -1.0);
        }
    };
    for (int i = 0; i < n_; ++i) {
        if (tied_to[i] >= 0)
            electrode_combo(i, tied_to[i]);
        else if (node_var[i] >= 0)
            trip.emplace_back(i, node_var[i], 1.0);
    }
    for (int l = 0; l < L_; ++l) electrode_combo(n_ + l, l);

    transfer_.resize(n_ + L_, reduced);
    transfer_.setFromTriplets(trip.begin(), trip.end());
    transfer_.makeCompressed();

    // Fixed Robin coupling blocks for electrodes with real contact layers.
    std::vector<Eigen::Triplet<double>> imp;
    for (int l = 0; l < L_; ++l) {
        if (tied_[l]) continue;
        double z = mesh_.electrodes[l].contact_impedance;
        for (int f : mesh_.electrodes[l].facets) {
            const BoundaryFacet& facet = mesh_.boundary_facets[f];
            if (mesh_.dimension == 3) {
                double area = facet.area * kMm * kMm;
                double diag = area / 6.0 / z, off = area / 12.0 / z, lin = area / 3.0 / z;
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j)
                        imp.emplace_back(facet.nodes[i], facet.nodes[j], i == j ? diag : off);
                    imp.emplace_back(facet.nodes[i], n_ + l, -lin);
                    imp.emplace_back(n_ + l, facet.nodes[i], -lin);
                }
                imp.emplace_back(n_ + l, n_ + l, area / z);
            } else {
                double len = facet.area * kMm;
                double diag = len / 3.0 / z, off = len / 6.0 / z, lin = len / 2.0 / z;
                for (int i = 0; i < 2; ++i) {
                    for (int j = 0; j < 2; ++j)
                        imp.emplace_back(facet.nodes[i], facet.nodes[j], i == j ? diag : off);
                    imp.emplace_back(facet.nodes[i], n_ + l, -lin);
                    imp.emplace_back(n_ + l, facet.nodes[i], -lin);
                }
                imp.emplace_back(n_ + l, n_ + l, len / z);
            }
        }
    }
    impedance_.resize(n_ + L_, n_ + L_);
    impedance_.setFromTriplets(imp.begin(), imp.end());
    impedance_.makeCompressed();
}

void CemSystem::assemble() {
    std::vector<Eigen::Triplet<double>> trip;
    int k = mesh_.nodes_per_element();
    trip.reserve(static_cast<std::size_t>(mesh_.element_count()) * k * k);
    for (int e = 0; e < mesh_.element_count(); ++e) {
        const auto& el = mesh_.elements[e];
        const Eigen::Matrix4d& G = element_stiffness_[e];
        double s = sigma_[e];
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) trip.emplace_back(el[i], el[j], s * G(i, j));
    }
    volume_.resize(n_ + L_, n_ + L_);
    volume_.setFromTriplets(trip.begin(), trip.end());
    volume_.makeCompressed();
    factorize();
}

void CemSystem::factorize() {
    Eigen::SparseMatrix<double> full = volume_ + impedance_;
    reduced_ = transfer_.transpose() * full * transfer_;
    reduced_.makeCompressed();
    solver_.compute(reduced_);
    if (solver_.info() != Eigen::Success)
        throw NumericalError(
            std::string("CEM factorization failed: system is singular (grounding: ") +
            (grounding_ == Grounding::kSumZero ? "sum-zero electrode gauge"
                                               : "single-node ground") +
            ", check mesh connectivity and contact impedances)");
    factorized_ = true;
    pair_cache_.clear();
}

void CemSystem::update_conductivity(const Conductivity& sigma) {
    sigma.validate(mesh_);
    int k = mesh_.nodes_per_element();
    // Only entries of elements whose sigma changed are touched.
    for (int e = 0; e < mesh_.element_count(); ++e) {
        double delta = sigma[e] - sigma_[e];
        if (delta == 0.0) continue;
        const auto& el = mesh_.elements[e];
        const Eigen::Matrix4d& G = element_stiffness_[e];
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) volume_.coeffRef(el[i], el[j]) += delta * G(i, j);
    }
    sigma_ = sigma;
    factorize();
}

Eigen::VectorXd CemSystem::solve_unit(int source_id, int sink_id) {
    if (!factorized_) throw NumericalError("system not factorized");
    int src = -1, snk = -1;
    for (int l = 0; l < L_; ++l) {
        if (mesh_.electrodes[l].id == source_id) src = l;
        if (mesh_.electrodes[l].id == sink_id) snk = l;
    }
    if (src < 0 || snk < 0)
        throw ValidationError("injection references electrode " +
                              std::to_string(src < 0 ? source_id : sink_id) +
                              " which is not on the mesh");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ + L_);
    rhs[n_ + src] = 1.0;
    rhs[n_ + snk] = -1.0;
    Eigen::VectorXd reduced_rhs = transfer_.transpose() * rhs;
    Eigen::VectorXd x = solver_.solve(reduced_rhs);
    if (solver_.info() != Eigen::Success)
        throw NumericalError("CEM solve failed for injection " + std::to_string(source_id) +
                             "-" + std::to_string(sink_id));
    // One step of iterative refinement tightens the Kirchhoff residual to
    // solver precision regardless of conditioning.
    Eigen::VectorXd residual = reduced_rhs - reduced_ * x;
    x += solver_.solve(residual);
    Eigen::VectorXd field = transfer_ * x;
    if (!field.allFinite())
        throw NumericalError("CEM solution is not finite for injection " +
                             std::to_string(source_id) + "-" + std::to_string(sink_id));
    return field;
}

Eigen::VectorXd CemSystem::unit_pair_field(int source_id, int sink_id) {
    if (source_id == sink_id)
        throw ValidationError("injection source and sink are both electrode " +
                              std::to_string(source_id));
    std::pair<int, int> key{std::min(source_id, sink_id), std::max(source_id, sink_id)};
    auto it = pair_cache_.find(key);
    if (it == pair_cache_.end())
        it = pair_cache_.emplace(key, solve_unit(key.first, key.second)).first;
    return source_id == key.first ? it->second : -it->second;
}

ForwardSolution CemSystem::solve_injection(const Injection& injection) {
    if (injection.amplitude < 0.0)
        throw ValidationError("injection amplitude must be non-negative");
    Eigen::VectorXd field = unit_pair_field(injection.source, injection.sink);
    field *= injection.amplitude;  // exact zero for a zero-amplitude drive
    ForwardSolution sol;
    sol.node_potentials = field.head(n_);
    sol.electrode_voltages = field.tail(L_);
    return sol;
}

ForwardResult CemSystem::forward(const Protocol& protocol) {
    protocol.validate(mesh_);
    ForwardResult result;
    result.measurements.resize(protocol.measurement_count());
    std::vector<int> id_index(1, -1);
    for (int l = 0; l < L_; ++l) {
        int id = mesh_.electrodes[l].id;
        if (id >= static_cast<int>(id_index.size())) id_index.resize(id + 1, -1);
        id_index[id] = l;
    }
    int m = 0;
    for (const Injection& inj : protocol.injections) {
        ForwardSolution sol = solve_injection(inj);
        for (const auto& [pos, neg] : inj.measurements)
            result.measurements[m++] =
                sol.electrode_voltages[id_index[pos]] - sol.electrode_voltages[id_index[neg]];
        result.solutions.push_back(std::move(sol));
    }
    return result;
}

Eigen::VectorXd CemSystem::electrode_currents(const ForwardSolution& solution) const {
    Eigen::VectorXd full(n_ + L_);
    full.head(n_) = solution.node_potentials;
    full.tail(L_) = solution.electrode_voltages;
    Eigen::VectorXd flux = (volume_ + impedance_) * full;
    Eigen::VectorXd currents = Eigen::VectorXd::Zero(L_);
    for (int l = 0; l < L_; ++l) currents[l] = flux[n_ + l];
    // Shunted electrodes absorb current through their tied nodes.
    for (int l = 0; l < L_; ++l) {
        if (!tied_[l]) continue;
        std::vector<char> seen(n_, 0);
        for (int f : mesh_.electrodes[l].facets)
            for (int i = 0; i < mesh_.nodes_per_facet(); ++i) {
                int node = mesh_.boundary_facets[f].nodes[i];
                if (!seen[node]) {
                    seen[node] = 1;
                    currents[l] += flux[node];
                }
            }
    }
    return currents;
}

Eigen::VectorXd forward_measurements(const Mesh& mesh, const Conductivity& sigma,
                                     const Protocol& protocol) {
    CemSystem system(mesh, sigma);
    return system.forward(protocol).measurements;
}

}  // namespace eitsense
