#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <eitsense/errors.hpp>
#include <eitsense/jacobian.hpp>
#include <eitsense/mesh.hpp>
#include <eitsense/protocol.hpp>

#include "test_util.hpp"

using namespace eitsense;

namespace {

// Small four-electrode block, cheap enough for finite-difference sweeps.
Mesh make_block() {
    Mesh mesh = generate_box_mesh({20.0, 10.0, 4.0}, 2.0);
    for (int i = 0; i < 4; ++i)
        attach_electrode_patch(mesh, 2, true, {2.5 + 5.0 * i, 5.0, 0.0}, 2.0, 1e-3);
    mesh.finalize();
    mesh.validate();
    return mesh;
}

Protocol block_protocol() {
    Protocol protocol;
    Injection inj;
    inj.source = 1;
    inj.sink = 4;
    inj.amplitude = 165e-6;
    inj.frequency = 2e3;
    inj.measurements = {{2, 3}, {1, 4}};
    protocol.injections.push_back(inj);
    inj.source = 2;
    inj.sink = 3;
    inj.frequency = 4e3;
    inj.measurements = {{1, 4}, {2, 3}};
    protocol.injections.push_back(inj);
    return protocol;
}

}  // namespace

TEST(Jacobian, MatchesCentralFiniteDifferences) {
    Mesh mesh = make_block();
    Protocol protocol = block_protocol();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Eigen::MatrixXd J = compute_jacobian(system, protocol);
    ASSERT_EQ(J.rows(), 4);
    ASSERT_EQ(J.cols(), mesh.element_count());

    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> pick(0, mesh.element_count() - 1);
    const double step = 0.2 * 1e-3;  // 0.1% of the baseline
    double max_abs_fd = 0.0;
    std::vector<std::pair<int, Eigen::VectorXd>> columns;
    for (int trial = 0; trial < 20; ++trial) {
        int k = pick(rng);
        Conductivity plus = sigma, minus = sigma;
        plus[k] += step;
        minus[k] -= step;
        system.update_conductivity(plus);
        Eigen::VectorXd v_plus = system.forward(protocol).measurements;
        system.update_conductivity(minus);
        Eigen::VectorXd v_minus = system.forward(protocol).measurements;
        Eigen::VectorXd fd = (v_plus - v_minus) / (2.0 * step);
        max_abs_fd = std::max(max_abs_fd, fd.lpNorm<Eigen::Infinity>());
        columns.emplace_back(k, fd);
    }
    // Relative per-entry check with a floor so near-zero entries compare
    // against the scale of the column set rather than against themselves.
    for (const auto& [k, fd] : columns)
        for (int m = 0; m < J.rows(); ++m) {
            double denom = std::max(std::abs(fd[m]), 1e-6 * max_abs_fd);
            EXPECT_LT(std::abs(J(m, k) - fd[m]) / denom, 1e-2)
                << "measurement " << m << ", element " << k;
        }
}

TEST(Jacobian, DirectionalDerivativeMatchesRandomPerturbation) {
    Mesh mesh = make_block();
    Protocol protocol = block_protocol();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Eigen::MatrixXd J = compute_jacobian(system, protocol);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd direction(mesh.element_count());
    for (int e = 0; e < direction.size(); ++e) direction[e] = gauss(rng);
    direction *= 1e-3 * 0.2 / direction.lpNorm<Eigen::Infinity>();

    system.update_conductivity(Conductivity(sigma.values() + direction));
    Eigen::VectorXd v_plus = system.forward(protocol).measurements;
    system.update_conductivity(Conductivity(sigma.values() - direction));
    Eigen::VectorXd v_minus = system.forward(protocol).measurements;
    Eigen::VectorXd fd = (v_plus - v_minus) / 2.0;
    Eigen::VectorXd lin = J * direction;
    EXPECT_LT((lin - fd).norm() / fd.norm(), 1e-2);
}

TEST(Jacobian, ScalingIdentityRecoversMeasurements) {
    // v(sigma) is homogeneous of degree -1 in sigma when the electrodes are
    // ideal, so sum_k J[m,k] sigma_k = -v_m exactly in the continuum; the
    // discrete identity holds to solver precision.
    // Tied electrodes must not share nodes: one grid square per patch with a
    // spare square between neighbours.
    Mesh mesh = generate_box_mesh({20.0, 10.0, 4.0}, 2.0);
    for (double x : {3.0, 7.0, 13.0, 17.0})
        attach_electrode_patch(mesh, 2, true, {x, 5.0, 0.0}, 1.9, 0.0);
    mesh.finalize();
    mesh.validate();
    Protocol protocol = block_protocol();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Eigen::VectorXd v = system.forward(protocol).measurements;
    Eigen::MatrixXd J = compute_jacobian(system, protocol);
    Eigen::VectorXd predicted = J * sigma.values();
    EXPECT_LT((predicted + v).lpNorm<Eigen::Infinity>() / v.lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(Jacobian, SelfPairRowIsNonPositive) {
    // A measurement taken across the driving pair has derivative
    // -amp * vol * |grad u|^2 <= 0 in every element, with no cancellation.
    Mesh mesh = make_block();
    Protocol protocol;
    Injection inj;
    inj.source = 1;
    inj.sink = 4;
    inj.amplitude = 165e-6;
    inj.frequency = 2e3;
    inj.measurements = {{1, 4}};
    protocol.injections.push_back(inj);
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, protocol);
    for (int k = 0; k < J.cols(); ++k) EXPECT_LE(J(0, k), 0.0) << "element " << k;
}

TEST(Jacobian, ReciprocalRowsAreBitIdentical) {
    // Swapping the roles of drive and measurement pair reuses the same two
    // cached fields, so the rows agree bit for bit, not just numerically.
    Mesh mesh = make_block();
    Protocol protocol;
    Injection a, b;
    a.source = 1;
    a.sink = 4;
    a.amplitude = 165e-6;
    a.frequency = 2e3;
    a.measurements = {{2, 3}};
    b.source = 2;
    b.sink = 3;
    b.amplitude = 165e-6;
    b.frequency = 4e3;
    b.measurements = {{1, 4}};
    protocol.injections = {a, b};
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, protocol);
    for (int k = 0; k < J.cols(); ++k) EXPECT_EQ(J(0, k), J(1, k)) << "element " << k;
}

TEST(Jacobian, HingeRegionsDominateCrossHingeInjections) {
    // On the actuator the constrictions concentrate current density: the
    // symmetric tap of the long 1-6 injection peaks inside a hinge, and for
    // the two short injections the opposite chamber is electrically remote
    // (far column mass well under 1%).
    Mesh mesh = generate_hinged_actuator_mesh();
    Protocol protocol = make_hinged_protocol();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, protocol);

    int argmax = 0;
    J.row(0).cwiseAbs().maxCoeff(&argmax);  // inj 1-6, meas 2-5
    int peak_tag = mesh.region_tags[argmax];
    EXPECT_TRUE(peak_tag == hinge_tag(1) || peak_tag == hinge_tag(2))
        << "peak element " << argmax << " sits in region " << region_name(peak_tag);

    auto region_mass = [&](int row, int tag) {
        double mass = 0.0;
        for (int e = 0; e < J.cols(); ++e)
            if (mesh.region_tags[e] == tag) mass += std::abs(J(row, e));
        return mass;
    };
    auto total_mass = [&](int row) { return J.row(row).cwiseAbs().sum(); };
    // Injection 2-3 lives in chambers 1-2; chamber 3 is beyond hinge 2.
    for (int m = 3; m < 6; ++m)
        EXPECT_LT(region_mass(m, chamber_tag(3)), 0.01 * total_mass(m)) << "measurement " << m;
    // Injection 4-5 lives in chambers 2-3; chamber 1 is beyond hinge 1.
    for (int m = 6; m < 9; ++m)
        EXPECT_LT(region_mass(m, chamber_tag(1)), 0.01 * total_mass(m)) << "measurement " << m;
}

TEST(Jacobian, SensitivityMapSelectsRow) {
    Mesh mesh = make_block();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, block_protocol());
    Eigen::VectorXd map = sensitivity_map(J, 2);
    EXPECT_EQ(map.size(), J.cols());
    EXPECT_EQ((map - J.row(2).transpose()).lpNorm<Eigen::Infinity>(), 0.0);
    EXPECT_THROW(sensitivity_map(J, -1), ValidationError);
    EXPECT_THROW(sensitivity_map(J, 4), ValidationError);
}

TEST(HexAggregation, ConservesColumnMass) {
    Mesh mesh = make_block();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, block_protocol());

    HexAggregation hex = aggregate_to_hex(mesh, J, 5.0);
    EXPECT_GT(static_cast<int>(hex.centers.size()), 0);
    EXPECT_LT(static_cast<int>(hex.centers.size()), mesh.element_count());
    Eigen::VectorXd row_sums_fine = J.rowwise().sum();
    Eigen::VectorXd row_sums_hex = hex.jacobian.rowwise().sum();
    EXPECT_LT((row_sums_fine - row_sums_hex).lpNorm<Eigen::Infinity>(),
              1e-9 * row_sums_fine.lpNorm<Eigen::Infinity>());

    // Every element lands in exactly one voxel and volumes add up.
    double volume = 0.0;
    for (double v : hex.volumes) volume += v;
    EXPECT_NEAR(volume, mesh.total_volume(), 1e-9 * mesh.total_volume());
    std::vector<char> seen(mesh.element_count(), 0);
    for (const auto& members : hex.members)
        for (int e : members) {
            EXPECT_FALSE(seen[e]);
            seen[e] = 1;
        }
    for (char s : seen) EXPECT_TRUE(s);

    // Halving the voxel size still conserves mass.
    HexAggregation fine = aggregate_to_hex(mesh, J, 2.5);
    EXPECT_GT(fine.centers.size(), hex.centers.size());
    Eigen::VectorXd row_sums_fine_hex = fine.jacobian.rowwise().sum();
    EXPECT_LT((row_sums_fine - row_sums_fine_hex).lpNorm<Eigen::Infinity>(),
              1e-9 * row_sums_fine.lpNorm<Eigen::Infinity>());
}

TEST(HexAggregation, RejectsVoxelsBelowElementSize) {
    Mesh mesh = make_block();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Eigen::MatrixXd J = compute_jacobian(system, block_protocol());
    EXPECT_THROW(aggregate_to_hex(mesh, J, 0.5), ValidationError);
    EXPECT_THROW(aggregate_to_hex(mesh, J, 0.0), ValidationError);
}

TEST(JacobianIo, RoundTripPreservesPayloadAndProvenance) {
    TempDir dir;
    Mesh mesh = make_block();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    JacobianRecord record;
    record.jacobian = compute_jacobian(system, block_protocol());
    record.mesh_hash = mesh.content_hash();
    record.sigma_hash = conductivity_hash(sigma);
    record.protocol_hash = block_protocol().content_hash();

    std::string path = dir.file("block.jac");
    save_jacobian(record, path);
    JacobianRecord loaded = load_jacobian(path);
    EXPECT_EQ(loaded.mesh_hash, record.mesh_hash);
    EXPECT_EQ(loaded.sigma_hash, record.sigma_hash);
    EXPECT_EQ(loaded.protocol_hash, record.protocol_hash);
    ASSERT_EQ(loaded.jacobian.rows(), record.jacobian.rows());
    ASSERT_EQ(loaded.jacobian.cols(), record.jacobian.cols());
    // Byte-exact payload round trip.
    EXPECT_EQ((loaded.jacobian - record.jacobian).lpNorm<Eigen::Infinity>(), 0.0);

    EXPECT_THROW(load_jacobian(dir.file("missing.jac")), ValidationError);
    spit(dir.file("garbage.jac"), "EITJAC 999\n");
    EXPECT_THROW(load_jacobian(dir.file("garbage.jac")), ValidationError);
}
