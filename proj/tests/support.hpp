#ifndef VCNN_TESTS_SUPPORT_HPP
#define VCNN_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "vcnn/coupling.hpp"
#include "vcnn/geometry.hpp"
#include "vcnn/rng.hpp"

namespace vcnn::testing {

inline Halfspace hs1(double n, double b) {
  Eigen::VectorXd v(1);
  v << n;
  return Halfspace{v, b};
}

inline Halfspace hs2(double nx, double ny, double b) {
  Eigen::VectorXd v(2);
  v << nx, ny;
  return Halfspace{v, b};
}

inline Box box1(double lo, double hi) {
  Eigen::VectorXd l(1), h(1);
  l << lo;
  h << hi;
  return Box(l, h);
}

inline Box box2(double x0, double y0, double x1, double y1) {
  Eigen::VectorXd l(2), h(2);
  l << x0, y0;
  h << x1, y1;
  return Box(l, h);
}

inline ConvexPolytope interval(double lo, double hi) {
  return intersect_halfspaces({hs1(-1, -lo), hs1(1, hi)}, 1);
}

inline ConvexPolytope rect(double x0, double y0, double x1, double y1) {
  return intersect_halfspaces(
      {hs2(-1, 0, -x0), hs2(1, 0, x1), hs2(0, -1, -y0), hs2(0, 1, y1)}, 2);
}

inline Eigen::VectorXd point(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (const double x : xs) v[i++] = x;
  return v;
}

/// H-representation of the simplex spanned by d+1 affinely independent
/// points in R^d (d >= 2): one facet per omitted point, normal from the
/// nullspace of the facet's edge matrix, oriented to keep the omitted
/// point inside.
inline std::vector<Halfspace> simplex_hrep(
    const std::vector<Eigen::VectorXd>& pts) {
  const int d = static_cast<int>(pts[0].size());
  std::vector<Halfspace> out;
  for (int skip = 0; skip <= d; ++skip) {
    std::vector<int> f;
    for (int i = 0; i <= d; ++i)
      if (i != skip) f.push_back(i);
    Eigen::MatrixXd edges(d - 1, d);
    for (int j = 1; j < d; ++j)
      edges.row(j - 1) = (pts[f[j]] - pts[f[0]]).transpose();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
    Eigen::VectorXd n = lu.kernel().col(0);
    n /= n.norm();
    double b = n.dot(pts[f[0]]);
    if (n.dot(pts[skip]) > b) {
      n = -n;
      b = -b;
    }
    out.emplace_back(n, b);
  }
  return out;
}

/// |det([p1-p0, ..., pd-p0])| / d!  — the simplex volume.
inline double simplex_det_volume(const std::vector<Eigen::VectorXd>& pts) {
  const int d = static_cast<int>(pts[0].size());
  Eigen::MatrixXd m(d, d);
  for (int j = 1; j <= d; ++j) m.col(j - 1) = pts[j] - pts[0];
  double fact = 1.0;
  for (int i = 2; i <= d; ++i) fact *= i;
  return std::abs(m.determinant()) / fact;
}

/// Seeded random simplex in [0, scale]^d with a conditioning floor on the
/// edge determinant (regenerates until well-shaped).
inline std::vector<Eigen::VectorXd> random_simplex(Rng& rng, int d,
                                                   double scale = 1.0) {
  while (true) {
    std::vector<Eigen::VectorXd> pts(d + 1, Eigen::VectorXd(d));
    for (auto& p : pts)
      for (int i = 0; i < d; ++i) p[i] = rng.uniform(0.0, scale);
    Eigen::MatrixXd m(d, d);
    for (int j = 1; j <= d; ++j) m.col(j - 1) = pts[j] - pts[0];
    if (std::abs(m.determinant()) >
        0.02 * std::pow(scale, d))
      return pts;
  }
}

/// Analytic 1D coupling volume for intervals U=[u0,u1], V=[v0,v1],
/// W=[w0,w1]: the integral over x in V of |U ∩ (W - x)|. The integrand is
/// piecewise linear with kinks only at the four alignment points, so the
/// trapezoid rule on the breakpoint mesh is exact.
inline double interval_coupling(double u0, double u1, double v0, double v1,
                                double w0, double w1) {
  const auto overlap = [&](double x) {
    return std::max(0.0, std::min(u1, w1 - x) - std::max(u0, w0 - x));
  };
  std::vector<double> bp = {v0, v1, w1 - u1, w0 - u0, w0 - u1, w1 - u0};
  std::sort(bp.begin(), bp.end());
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double a = std::clamp(bp[i], v0, v1);
    const double b = std::clamp(bp[i + 1], v0, v1);
    if (b > a) sum += 0.5 * (overlap(a) + overlap(b)) * (b - a);
  }
  return sum;
}

/// Analytic coupling volume for axis-aligned boxes (the integrals
/// factorize per axis).
inline double box_coupling(const Box& u, const Box& v, const Box& w) {
  double prod = 1.0;
  for (int d = 0; d < u.dim(); ++d)
    prod *= interval_coupling(u.lo[d], u.hi[d], v.lo[d], v.hi[d], w.lo[d],
                              w.hi[d]);
  return prod;
}

/// Seeded random box in [-scale, 2*scale]^d with edges at least 0.1*scale.
inline Box rng_box(Rng& rng, int d, double scale = 1.0) {
  Eigen::VectorXd lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = rng.uniform(-scale, scale);
    hi[i] = lo[i] + rng.uniform(0.1 * scale, scale);
  }
  return Box(lo, hi);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols,
                                     double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

}  // namespace vcnn::testing

#endif  // VCNN_TESTS_SUPPORT_HPP
