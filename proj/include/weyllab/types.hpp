#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>

namespace weyllab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Coordinates of a phase point never exceed four components (S^3 in R^4),
// so the storage is inline and copying a state never allocates.
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A point of an energy level. The meaning of the components is fixed by the
// model that produced it:
//   flat torus      position x in R^n (reduced mod lattice), momentum unit xi
//   cat suspension  position (u, v, s), u,v in [0,1), s in [0, roof); no momentum
//   round S^3       position x in R^4, momentum v in R^4, |x| = |v| = 1, x.v = 0
//   surface         position (z, phi), momentum (xi_z, xi_phi)
struct PhaseState {
    SmallVec position;
    SmallVec momentum;
    double energy = 1.0;
};

} // namespace weyllab
