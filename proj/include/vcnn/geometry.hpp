#ifndef VCNN_GEOMETRY_HPP
#define VCNN_GEOMETRY_HPP

#include <Eigen/Dense>
#include <vector>

#include "vcnn/error.hpp"

namespace vcnn {

/// Global geometric tolerance used for feasibility, tightness and vertex
/// deduplication. All comparisons scale this by max(1, |coordinate|) so the
/// engine behaves the same for domains of size 1e-2 and 1e2.
inline constexpr double kGeomTol = 1e-9;

/// Dimension limit of the exact volume engine. Lifted coupling polytopes
/// live in R^{2a}, so a <= 2 everywhere upstream.
inline constexpr int kMaxDim = 4;

/// Closed halfspace {x : normal . x <= offset}.
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;

  Halfspace() = default;
  Halfspace(Eigen::VectorXd n, double b) : normal(std::move(n)), offset(b) {}
};

/// Axis-aligned box, lo[i] < hi[i].
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Box() = default;
  Box(Eigen::VectorXd l, Eigen::VectorXd h);

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  bool contains(const Eigen::VectorXd& x, double tol = kGeomTol) const;
  /// The 2d halfspaces bounding the box.
  std::vector<Halfspace> halfspaces() const;
  /// Componentwise interval sum [lo+o.lo, hi+o.hi].
  Box minkowski_sum(const Box& o) const;
  bool intersects(const Box& o, double tol = kGeomTol) const;
};

/// Convex polytope in H-representation. Instances produced by
/// intersect_halfspaces (and clip / coupling_polytope) carry enumerated
/// vertices and a resolved empty flag; degenerate (volume-zero) feasible
/// sets are normalized to empty(). A polytope may also be constructed as a
/// raw H-representation, in which case volume / bounding_box enumerate on
/// demand and report UnboundedRegion where applicable.
class ConvexPolytope {
 public:
  ConvexPolytope() = default;

  /// Raw H-representation; vertices not yet enumerated.
  ConvexPolytope(std::vector<Halfspace> halfspaces, int dim);

  int dim() const { return dim_; }
  bool enumerated() const { return enumerated_; }
  bool empty() const { return empty_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  const std::vector<Eigen::VectorXd>& vertices() const { return vertices_; }

  /// True iff every halfspace constraint holds within +kGeomTol
  /// (closed-set convention at boundaries).
  bool contains(const Eigen::VectorXd& x) const;

  /// Translate by t (vertices and offsets shift consistently).
  ConvexPolytope translated(const Eigen::VectorXd& t) const;
  /// Scale about the origin by s > 0.
  ConvexPolytope scaled(double s) const;

  friend ConvexPolytope intersect_halfspaces(const std::vector<Halfspace>&, int);
  friend class PolytopeBuilder;

 private:
  int dim_ = 0;
  bool empty_ = true;
  bool enumerated_ = false;
  std::vector<Halfspace> halfspaces_;  // unit normals, facets only (enumerated)
  std::vector<Eigen::VectorXd> vertices_;
};

/// Intersect halfspaces in dimension dim (1..4) and enumerate the vertices.
/// Redundant halfspaces are dropped from the stored H-representation.
/// Throws UnboundedRegion if the feasible set is unbounded and
/// DimensionTooHigh for dim > 4.
ConvexPolytope intersect_halfspaces(const std::vector<Halfspace>& halfspaces,
                                    int dim);

/// d-dimensional Lebesgue volume; 0 for empty or lower-dimensional sets.
double volume(const ConvexPolytope& p);

/// Intersection of p with the box halfspaces; vertices re-enumerated.
ConvexPolytope clip(const ConvexPolytope& p, const Box& b);

/// Componentwise vertex min/max. Throws EmptyPolytope for empty inputs.
Box bounding_box(const ConvexPolytope& p);

bool contains(const ConvexPolytope& p, const Eigen::VectorXd& x);

/// The polytope in R^{2a} over block coordinates (x, y) whose volume equals
///   K^V_{U,W} = integral of chi_V(x) chi_U(y) chi_W(x+y) dx dy:
/// V's halfspaces act on x, U's on y, and each W halfspace (n, b) lifts to
/// normal (n, n) with offset b.
ConvexPolytope coupling_polytope(const ConvexPolytope& U,
                                 const ConvexPolytope& V,
                                 const ConvexPolytope& W);

}  // namespace vcnn

#endif  // VCNN_GEOMETRY_HPP
