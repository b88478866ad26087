#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include <eitsense/errors.hpp>
#include <eitsense/mesh.hpp>
#include <eitsense/mesh_io.hpp>

#include "test_util.hpp"

using namespace eitsense;

TEST(BoxMesh, TetrahedralizationCoversVolume) {
    Mesh mesh = generate_box_mesh({20.0, 10.0, 5.0}, 2.5);
    EXPECT_EQ(mesh.dimension, 3);
    // 8x4x2 cells, 6 tets each.
    EXPECT_EQ(mesh.element_count(), 8 * 4 * 2 * 6);
    EXPECT_EQ(mesh.node_count(), 9 * 5 * 3);
    EXPECT_NEAR(mesh.total_volume(), 20.0 * 10.0 * 5.0, 1e-9 * 1000.0);
    for (int e = 0; e < mesh.element_count(); ++e)
        EXPECT_GT(mesh.element_volume(e), 0.0) << "element " << e;
}

TEST(BoxMesh, BoundaryAreaMatchesBox) {
    Mesh mesh = generate_box_mesh({20.0, 10.0, 5.0}, 2.5);
    double area = 0.0;
    for (const auto& facet : mesh.boundary_facets) area += facet.area;
    double expected = 2.0 * (20.0 * 10.0 + 20.0 * 5.0 + 10.0 * 5.0);
    EXPECT_NEAR(area, expected, 1e-9 * expected);
}

TEST(BoxMesh, TwoDimensionalVariant) {
    Mesh mesh = generate_box_mesh({10.0, 6.0}, 2.0);
    EXPECT_EQ(mesh.dimension, 2);
    EXPECT_EQ(mesh.element_count(), 5 * 3 * 2);
    EXPECT_DOUBLE_EQ(mesh.total_volume(), 60.0);
    double perimeter = 0.0;
    for (const auto& facet : mesh.boundary_facets) perimeter += facet.area;
    EXPECT_NEAR(perimeter, 32.0, 1e-12);
    for (const auto& node : mesh.nodes) EXPECT_EQ(node.z(), 0.0);
}

TEST(BoxMesh, NodeCoordinatesAreExactlyMirrorSymmetric) {
    // The symmetric decomposition promises bit-exact reflection: for every
    // node at x there is one at exactly L - x (binary subtraction, not an
    // epsilon match), and likewise in y and z.
    Mesh mesh = generate_box_mesh({20.0, 10.0, 5.0}, 2.5);
    std::vector<double> lengths{20.0, 10.0, 5.0};
    for (int axis = 0; axis < 3; ++axis) {
        std::set<std::array<double, 3>> coords;
        for (const auto& n : mesh.nodes) coords.insert({n.x(), n.y(), n.z()});
        for (const auto& n : mesh.nodes) {
            std::array<double, 3> mirrored{n.x(), n.y(), n.z()};
            mirrored[axis] = lengths[axis] - mirrored[axis];
            EXPECT_TRUE(coords.count(mirrored)) << "axis " << axis;
        }
    }
}

TEST(BoxMesh, RejectsBadEdgeLengthAndDimensions) {
    EXPECT_THROW(generate_box_mesh({10.0, 4.0, 2.0}, 3.0), ValidationError);
    EXPECT_THROW(generate_box_mesh({10.0}, 1.0), ValidationError);
    EXPECT_THROW(generate_box_mesh({10.0, -4.0}, 1.0), ValidationError);
    EXPECT_THROW(generate_box_mesh({10.0, 4.0}, 0.0), ValidationError);
}

TEST(Mesh, ElementContainsAndRegionLookup) {
    Mesh mesh = generate_box_mesh({10.0, 10.0, 10.0}, 5.0);
    // Tag the x < 5 half as region 1, the rest as region 2.
    for (int e = 0; e < mesh.element_count(); ++e)
        mesh.region_tags[e] = mesh.element_centroid(e).x() < 5.0 ? 1 : 2;

    Eigen::Vector3d left(2.0, 3.0, 4.0), right(8.0, 3.0, 4.0);
    EXPECT_EQ(mesh.region_of_point(left), 1);
    EXPECT_EQ(mesh.region_of_point(right), 2);

    int hits = 0;
    for (int e = 0; e < mesh.element_count(); ++e)
        if (mesh.element_contains(e, left)) {
            ++hits;
            EXPECT_EQ(mesh.region_tags[e], 1);
        }
    EXPECT_GE(hits, 1);
}

TEST(Mesh, ValidateCatchesBrokenInputs) {
    Mesh mesh = generate_box_mesh({10.0, 5.0, 5.0}, 2.5);
    EXPECT_NO_THROW(mesh.validate());

    Mesh inverted = mesh;
    std::swap(inverted.elements[0][0], inverted.elements[0][1]);
    EXPECT_THROW(inverted.validate(), ValidationError);

    Mesh bad_impedance = mesh;
    attach_electrode_on_face(bad_impedance, 0, false, 1e-3);
    bad_impedance.electrodes[0].contact_impedance = -1.0;
    EXPECT_THROW(bad_impedance.validate(), ValidationError);

    Mesh overlapping = mesh;
    attach_electrode_on_face(overlapping, 0, false, 1e-3);
    attach_electrode_on_face(overlapping, 0, false, 1e-3);  // same facets again
    EXPECT_THROW(overlapping.validate(), ValidationError);
}

TEST(HingedActuator, MeshStructure) {
    Mesh mesh = generate_hinged_actuator_mesh();
    EXPECT_EQ(mesh.dimension, 3);
    EXPECT_EQ(mesh.electrode_count(), 6);
    EXPECT_NO_THROW(mesh.validate());

    // The two diamond carve-outs remove material from the 200x50x8 slab.
    double slab = 200.0 * 50.0 * 8.0;
    EXPECT_LT(mesh.total_volume(), slab);
    EXPECT_GT(mesh.total_volume(), 0.9 * slab);

    // Region tags: chamber-1, hinge-1, chamber-2, hinge-2, chamber-3.
    std::set<int> tags(mesh.region_tags.begin(), mesh.region_tags.end());
    EXPECT_EQ(tags, (std::set<int>{chamber_tag(1), hinge_tag(1), chamber_tag(2), hinge_tag(2),
                                   chamber_tag(3)}));

    // Chambers and hinges partition the length axis in the expected order.
    auto region_x = [&](int tag) {
        double lo = 1e9, hi = -1e9;
        for (int e = 0; e < mesh.element_count(); ++e)
            if (mesh.region_tags[e] == tag) {
                lo = std::min(lo, mesh.element_centroid(e).x());
                hi = std::max(hi, mesh.element_centroid(e).x());
            }
        return std::pair<double, double>(lo, hi);
    };
    EXPECT_LT(region_x(chamber_tag(1)).second, region_x(chamber_tag(2)).first);
    EXPECT_LT(region_x(chamber_tag(2)).second, region_x(chamber_tag(3)).first);
    // Hinge bands are centred on L/3 and 2L/3.
    auto h1 = region_x(hinge_tag(1)), h2 = region_x(hinge_tag(2));
    EXPECT_NEAR(0.5 * (h1.first + h1.second), 200.0 / 3.0, 2.5);
    EXPECT_NEAR(0.5 * (h2.first + h2.second), 400.0 / 3.0, 2.5);
}

TEST(HingedActuator, DiamondCarveNarrowsHinges) {
    Mesh mesh = generate_hinged_actuator_mesh();
    // Each hinge is a diamond-shaped slot through the thickness, centred on
    // the midline at x = L/3 and 2L/3: no element centroid may survive
    // inside either rhombus, while material outside it must remain.
    const double L = 200.0, a = 10.0 / 2.0, b = 20.0 / 2.0;
    int beside_slot = 0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Vector3d c = mesh.element_centroid(e);
        double xf = std::min(c.x(), L - c.x());  // hinge 2 mirrors hinge 1
        double rhombus = std::abs(xf - L / 3.0) / a + std::abs(c.y() - 25.0) / b;
        EXPECT_GT(rhombus, 1.0) << "element " << e << " sits inside the slot";
        if (std::abs(xf - L / 3.0) < 1.0 && rhombus > 1.0) ++beside_slot;
    }
    EXPECT_GT(beside_slot, 0) << "the web beside the slot should survive";
}

TEST(HingedActuator, ElectrodePlacementMatchesProtocolNumbering) {
    Mesh mesh = generate_hinged_actuator_mesh();
    ASSERT_EQ(mesh.electrode_count(), 6);
    // Odd ids on the top face (z = 8), even on the bottom (z = 0); pairs at
    // x = L/6, L/2, 5L/6.
    const double L = 200.0;
    const double x_expect[7] = {0, L / 6, L / 6, L / 2, L / 2, 5 * L / 6, 5 * L / 6};
    for (const auto& patch : mesh.electrodes) {
        int i = static_cast<int>(&patch - mesh.electrodes.data());
        Eigen::Vector3d c = mesh.electrode_centroid(i);
        // Patches are unions of whole boundary facets, so the centroid is
        // quantized to the 2.5 mm grid: at worst half a pitch off centre.
        EXPECT_NEAR(c.x(), x_expect[patch.id], 1.3) << "electrode " << patch.id;
        EXPECT_NEAR(c.y(), 25.0, 1.3);
        EXPECT_DOUBLE_EQ(c.z(), patch.id % 2 == 1 ? 8.0 : 0.0);
        // 2 mm square patches on a 2.5 mm grid snap to at least one facet.
        EXPECT_GT(mesh.electrode_area(i), 0.0);
        EXPECT_LT(mesh.electrode_area(i), 6.0 * 6.0);
    }
}

TEST(HingedActuator, DefaultResolutionMatchesContract) {
    Mesh mesh = generate_hinged_actuator_mesh();
    EXPECT_EQ(mesh.node_count(), 8427);
    EXPECT_EQ(mesh.element_count(), 37632);
}

TEST(FingerChamber, MeshStructure) {
    Mesh mesh = generate_finger_chamber_mesh();
    EXPECT_EQ(mesh.electrode_count(), 2);
    EXPECT_NO_THROW(mesh.validate());
    EXPECT_NEAR(mesh.total_volume(), 25.0 * 10.0 * 4.0, 1e-9 * 1000.0);
    EXPECT_EQ(mesh.region_tags.front(), chamber_tag(1));
    // Electrode 1 on top, 2 on bottom, both over the chamber centre.
    EXPECT_DOUBLE_EQ(mesh.electrode_centroid(0).z(), 4.0);
    EXPECT_DOUBLE_EQ(mesh.electrode_centroid(1).z(), 0.0);
    EXPECT_NEAR(mesh.electrode_centroid(0).x(), 12.5, 1e-9);
}

TEST(Refinement, UniformSplitsEachTetIntoEight) {
    Mesh coarse = generate_box_mesh({10.0, 5.0, 5.0}, 2.5);
    attach_electrode_on_face(coarse, 0, false, 1e-3);
    attach_electrode_on_face(coarse, 0, true, 2e-3);
    Mesh fine = refine_uniform(coarse);
    fine.validate();

    EXPECT_EQ(fine.element_count(), 8 * coarse.element_count());
    EXPECT_NEAR(fine.total_volume(), coarse.total_volume(), 1e-9 * coarse.total_volume());

    // Electrodes survive with identical ids, impedances and areas.
    ASSERT_EQ(fine.electrode_count(), 2);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(fine.electrodes[i].id, coarse.electrodes[i].id);
        EXPECT_EQ(fine.electrodes[i].contact_impedance, coarse.electrodes[i].contact_impedance);
        EXPECT_NEAR(fine.electrode_area(i), coarse.electrode_area(i), 1e-9);
    }

    // Region tags are inherited by all eight children.
    Mesh tagged = coarse;
    for (int e = 0; e < tagged.element_count(); ++e)
        tagged.region_tags[e] = e % 3;
    Mesh tagged_fine = refine_uniform(tagged);
    for (int e = 0; e < tagged_fine.element_count(); ++e)
        EXPECT_EQ(tagged_fine.region_tags[e], tagged.region_tags[e / 8]);
}

TEST(Refinement, NearElectrodesFactorOneIsIdentity) {
    Mesh mesh = generate_box_mesh({10.0, 5.0, 5.0}, 2.5);
    attach_electrode_on_face(mesh, 0, false, 1e-3);
    Mesh copy = refine_near_electrodes(mesh, 3.0, 1.0);
    EXPECT_EQ(copy.content_hash(), mesh.content_hash());
}

TEST(Refinement, NearElectrodesRefinesOnlyNearby) {
    Mesh mesh = generate_box_mesh({20.0, 5.0, 5.0}, 2.5);
    attach_electrode_on_face(mesh, 0, false, 1e-3);
    Mesh refined = refine_near_electrodes(mesh, 4.0, 2.0);
    refined.validate();
    EXPECT_GT(refined.element_count(), mesh.element_count());
    EXPECT_NEAR(refined.total_volume(), mesh.total_volume(), 1e-9);

    // Far from the electrode the elements keep their coarse size.
    double far_max = 0.0;
    for (int e = 0; e < refined.element_count(); ++e)
        if (refined.element_centroid(e).x() > 15.0)
            far_max = std::max(far_max, refined.element_volume(e));
    double coarse_max = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e)
        coarse_max = std::max(coarse_max, mesh.element_volume(e));
    EXPECT_DOUBLE_EQ(far_max, coarse_max);
}

TEST(MeshIo, RoundTripIsByteStable) {
    TempDir dir;
    Mesh mesh = generate_hinged_actuator_mesh();
    std::string first = dir.file("m1.mesh"), second = dir.file("m2.mesh");
    save_mesh(mesh, first);
    Mesh loaded = load_mesh(first);
    EXPECT_EQ(loaded.content_hash(), mesh.content_hash());
    EXPECT_EQ(loaded.node_count(), mesh.node_count());
    EXPECT_EQ(loaded.element_count(), mesh.element_count());
    EXPECT_EQ(loaded.region_tags, mesh.region_tags);
    save_mesh(loaded, second);
    EXPECT_EQ(slurp(first), slurp(second));
}

TEST(MeshIo, LoaderRejectsBadFiles) {
    TempDir dir;
    EXPECT_THROW(load_mesh(dir.file("missing.mesh")), ValidationError);

    std::string path = dir.file("bad.mesh");
    spit(path, "NOTAMESH 1\n");
    EXPECT_THROW(load_mesh(path), ValidationError);

    // Zero contact impedance is representable on disk but rejected on load:
    // shunt electrodes are a solver-side limit, not a mesh property.
    Mesh mesh = generate_box_mesh({10.0, 5.0, 5.0}, 2.5);
    attach_electrode_on_face(mesh, 0, false, 1e-3);
    save_mesh(mesh, path);
    std::string text = slurp(path);
    auto pos = text.find("0.001");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 5, "0.000");
    spit(path, text);
    EXPECT_THROW(load_mesh(path), ValidationError);
}

TEST(MeshIo, VtkExportWritesCellData) {
    TempDir dir;
    Mesh mesh = generate_box_mesh({10.0, 5.0, 5.0}, 5.0);
    Eigen::VectorXd values = Eigen::VectorXd::LinSpaced(mesh.element_count(), 0.0, 1.0);
    std::string path = dir.file("box.vtk");
    export_vtk(mesh, path, values, "sigma");
    std::string text = slurp(path);
    EXPECT_NE(text.find("DATASET UNSTRUCTURED_GRID"), std::string::npos);
    EXPECT_NE(text.find("CELL_DATA"), std::string::npos);
    EXPECT_NE(text.find("sigma"), std::string::npos);
}
