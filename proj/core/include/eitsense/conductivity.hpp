// Piecewise-constant conductivity fields over a mesh, in S/m. Kept as a
// thin wrapper over a per-element vector so the solver, Jacobian and
// reconstruction all agree on the parameterization.

#ifndef EITSENSE_CONDUCTIVITY_HPP
#define EITSENSE_CONDUCTIVITY_HPP

#include <Eigen/Dense>

#include "eitsense/errors.hpp"
#include "eitsense/mesh.hpp"

namespace eitsense {

class Conductivity {
public:
    Conductivity() = default;
    explicit Conductivity(Eigen::VectorXd values) : values_(std::move(values)) {}
    Conductivity(const Mesh& mesh, double uniform)
        : values_(Eigen::VectorXd::Constant(mesh.element_count(), uniform)) {}

    int size() const { return static_cast<int>(values_.size()); }
    double operator[](int e) const { return values_[e]; }
    double& operator[](int e) { return values_[e]; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    // All entries strictly positive and sized to the mesh.
    void validate(const Mesh& mesh) const {
        if (size() != mesh.element_count())
            throw ValidationError("conductivity has " + std::to_string(size()) +
                                  " entries for " + std::to_string(mesh.element_count()) +
                                  " elements");
        for (int e = 0; e < size(); ++e)
            if (!(values_[e] > 0.0))
                throw ValidationError("conductivity must be positive everywhere (element " +
                                      std::to_string(e) + " has " + std::to_string(values_[e]) +
                                      ")");
    }

    // Multiplies every element carrying `tag` by `factor`.
    void scale_region(const Mesh& mesh, int tag, double factor) {
        for (int e = 0; e < size(); ++e)
            if (mesh.region_tags[e] == tag) values_[e] *= factor;
    }

private:
    Eigen::VectorXd values_;
};

}  // namespace eitsense

#endif
