#ifndef CFSPLIT_TEST_ORACLES_HPP_
#define CFSPLIT_TEST_ORACLES_HPP_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cfsplit/matrix.hpp"

// Independent oracles for the test suites.  These deliberately avoid the
// library's solver paths: dense active-set enumeration, golden-section
// scalar minimization, central finite differences, and brute-force vertex
// enumeration, all at desk scale.

namespace cfsplit::oracle {

// min 0.5 y'P y + q'y  s.t.  G y <= h, by enumerating active sets (KKT solve
// per subset + feasibility / multiplier checks).  P must be positive definite.
std::vector<double> enumerative_qp(const DenseMatrix& p,
                                   std::span<const double> q,
                                   const DenseMatrix& g,
                                   std::span<const double> h);

// projection of x onto {y : G y <= h} via enumerative_qp with P = I
std::vector<double> project_polyhedron(std::span<const double> x,
                                       const DenseMatrix& g,
                                       std::span<const double> h);

// min c'y  s.t.  Aeq y = beq, G y <= h, by vertex enumeration
std::vector<double> brute_lp(std::span<const double> c, const DenseMatrix& aeq,
                             std::span<const double> beq, const DenseMatrix& g,
                             std::span<const double> h);

// scalar minimizer of f over [lo, hi] by coarse grid + golden section
double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  int grid = 200, int iters = 120);

// central finite differences of f at x
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h = 1e-5);

}  // namespace cfsplit::oracle

#endif  // CFSPLIT_TEST_ORACLES_HPP_
