#include "vcnn/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace vcnn {
namespace {

// Sentinel bound used to detect unbounded regions: the enumeration runs with
// a huge box appended, and any surviving vertex near it means the original
// intersection escapes to infinity (or is far outside any supported domain).
constexpr double kSentinelBound = 1e7;

double scale_tol(const double* x, int d) {
  double m = 1.0;
  for (int i = 0; i < d; ++i) m = std::max(m, std::fabs(x[i]));
  return kGeomTol * m;
}

// Solve the d x d system rows * x = rhs by Gaussian elimination with partial
// pivoting. Returns false when |det| < detTol (near-parallel subset).
bool solve_subset(const double* a, const double* b, const int* idx, int d,
                  int stride, double* x) {
  double m[kMaxDim][kMaxDim + 1];
  for (int r = 0; r < d; ++r) {
    const double* row = a + static_cast<std::ptrdiff_t>(idx[r]) * stride;
    for (int c = 0; c < d; ++c) m[r][c] = row[c];
    m[r][d] = b[idx[r]];
  }
  double det = 1.0;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    double best = std::fabs(m[col][col]);
    for (int r = col + 1; r < d; ++r) {
      double v = std::fabs(m[r][col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < 1e-12) return false;
    if (piv != col)
      for (int c = col; c <= d; ++c) std::swap(m[piv][c], m[col][c]);
    det *= m[col][col];
    for (int r = col + 1; r < d; ++r) {
      double f = m[r][col] / m[col][col];
      if (f == 0.0) continue;
      for (int c = col + 1; c <= d; ++c) m[r][c] -= f * m[col][c];
    }
  }
  // Unit-norm rows, so |det| is the subset's angular conditioning.
  if (std::fabs(det) < 1e-9) return false;
  for (int r = d - 1; r >= 0; --r) {
    double s = m[r][d];
    for (int c = r + 1; c < d; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return true;
}

struct FlatHalfspaces {
  std::vector<double> a;  // n rows of d coefficients, unit norm
  std::vector<double> b;
  int d = 0;
  int count() const { return static_cast<int>(b.size()); }

  void push(const Eigen::VectorXd& n, double off) {
    for (int i = 0; i < d; ++i) a.push_back(n[i]);
    b.push_back(off);
  }

  bool feasible(const double* x, double tol) const {
    const int n = count();
    for (int i = 0; i < n; ++i) {
      const double* row = a.data() + static_cast<std::ptrdiff_t>(i) * d;
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += row[c] * x[c];
      if (s > b[i] + tol) return false;
    }
    return true;
  }
};

// Normalize to unit normals and merge parallel constraints (keep the tight
// offset). Preserves first-seen order.
std::vector<Halfspace> canonicalize(const std::vector<Halfspace>& hs, int dim) {
  std::vector<Halfspace> out;
  out.reserve(hs.size());
  for (const auto& h : hs) {
    if (h.normal.size() != dim)
      raise(ErrorKind::DimensionMismatch,
            "halfspace normal has wrong dimension");
    double norm = h.normal.norm();
    if (norm <= 1e-12)
      raise(ErrorKind::InvalidHalfspace, "halfspace normal is (near) zero");
    Eigen::VectorXd n = h.normal / norm;
    double b = h.offset / norm;
    bool merged = false;
    for (auto& k : out) {
      if ((k.normal - n).lpNorm<Eigen::Infinity>() <= 1e-12) {
        k.offset = std::min(k.offset, b);
        merged = true;
        break;
      }
    }
    if (!merged) out.emplace_back(std::move(n), b);
  }
  return out;
}

// Greedy pivoted Gram-Schmidt over the vectors (points - mean). Fills up to
// maxrank orthonormal directions and returns the affine rank at tolerance
// kGeomTol relative to the largest initial extent.
int affine_basis(const std::vector<Eigen::VectorXd>& pts,
                 const std::vector<int>& index, int dim, int maxrank,
                 Eigen::VectorXd* mean_out, Eigen::VectorXd* basis_out) {
  const int n = static_cast<int>(index.size());
  if (n == 0) return -1;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int i : index) mean += pts[i];
  mean /= static_cast<double>(n);
  if (mean_out) *mean_out = mean;

  std::vector<Eigen::VectorXd> dirs(n);
  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    dirs[i] = pts[index[i]] - mean;
    scale = std::max(scale, dirs[i].norm());
  }
  const double tol = kGeomTol * std::max(1.0, scale);
  int rank = 0;
  while (rank < maxrank) {
    int best = -1;
    double bestn = tol;
    for (int i = 0; i < n; ++i) {
      double v = dirs[i].norm();
      if (v > bestn) {
        bestn = v;
        best = i;
      }
    }
    if (best < 0) break;
    Eigen::VectorXd e = dirs[best] / dirs[best].norm();
    for (int i = 0; i < n; ++i) dirs[i] -= e.dot(dirs[i]) * e;
    if (basis_out) basis_out[rank] = e;
    ++rank;
  }
  return rank;
}

std::vector<int> all_indices(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Vertices within tolerance of the hyperplane n.x = b.
std::vector<int> tight_vertices(const std::vector<Eigen::VectorXd>& verts,
                                const Halfspace& h) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(verts.size()); ++i) {
    double tol = kGeomTol * std::max(1.0, verts[i].lpNorm<Eigen::Infinity>());
    if (std::fabs(h.normal.dot(verts[i]) - h.offset) <= tol) out.push_back(i);
  }
  return out;
}

// Indices of `subset` ordered counterclockwise (in an arbitrary but fixed
// frame) around the subset centroid within its 2-flat.
std::vector<int> order_polygon(const std::vector<Eigen::VectorXd>& pts,
                               const std::vector<int>& subset, int dim) {
  Eigen::VectorXd mean;
  Eigen::VectorXd basis[2] = {Eigen::VectorXd::Zero(dim),
                              Eigen::VectorXd::Zero(dim)};
  if (affine_basis(pts, subset, dim, 2, &mean, basis) < 2)
    return subset;  // flat ring, contributes nothing
  std::vector<std::pair<double, int>> ang;
  ang.reserve(subset.size());
  for (int i : subset) {
    Eigen::VectorXd r = pts[i] - mean;
    ang.emplace_back(std::atan2(basis[1].dot(r), basis[0].dot(r)), i);
  }
  std::sort(ang.begin(), ang.end());
  std::vector<int> out;
  out.reserve(ang.size());
  for (auto& [a, i] : ang) out.push_back(i);
  return out;
}

double det_cols(const Eigen::MatrixXd& m) {
  switch (m.cols()) {
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    default: return m.determinant();
  }
}

}  // namespace

Box::Box(Eigen::VectorXd l, Eigen::VectorXd h) : lo(std::move(l)), hi(std::move(h)) {
  if (lo.size() != hi.size())
    raise(ErrorKind::DimensionMismatch, "box lo/hi dimension mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]))
      raise(ErrorKind::InvalidHalfspace, "box requires lo < hi per coordinate");
}

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
  return v;
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  return true;
}

std::vector<Halfspace> Box::halfspaces() const {
  std::vector<Halfspace> hs;
  const int d = dim();
  hs.reserve(2 * d);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd n = Eigen::VectorXd::Zero(d);
    n[i] = 1.0;
    hs.emplace_back(n, hi[i]);
    hs.emplace_back(-n, -lo[i]);
  }
  return hs;
}

Box Box::minkowski_sum(const Box& o) const {
  return Box(lo + o.lo, hi + o.hi);
}

bool Box::intersects(const Box& o, double tol) const {
  for (int i = 0; i < lo.size(); ++i)
    if (lo[i] > o.hi[i] + tol || o.lo[i] > hi[i] + tol) return false;
  return true;
}

ConvexPolytope::ConvexPolytope(std::vector<Halfspace> halfspaces, int dim)
    : dim_(dim), empty_(false), enumerated_(false) {
  if (dim < 1 || dim > kMaxDim)
    raise(ErrorKind::DimensionTooHigh, "polytope dimension must be 1..4");
  halfspaces_ = canonicalize(halfspaces, dim);
}

bool ConvexPolytope::contains(const Eigen::VectorXd& x) const {
  if (halfspaces_.empty()) return false;
  if (x.size() != dim_)
    raise(ErrorKind::DimensionMismatch, "point dimension mismatch");
  const double tol = kGeomTol * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  for (const auto& h : halfspaces_)
    if (h.normal.dot(x) > h.offset + tol) return false;
  return true;
}

ConvexPolytope ConvexPolytope::translated(const Eigen::VectorXd& t) const {
  if (t.size() != dim_)
    raise(ErrorKind::DimensionMismatch, "translation dimension mismatch");
  ConvexPolytope q(*this);
  for (auto& h : q.halfspaces_) h.offset += h.normal.dot(t);
  for (auto& v : q.vertices_) v += t;
  return q;
}

ConvexPolytope ConvexPolytope::scaled(double s) const {
  if (!(s > 0.0))
    raise(ErrorKind::InvalidHalfspace, "scale factor must be positive");
  ConvexPolytope q(*this);
  for (auto& h : q.halfspaces_) h.offset *= s;
  for (auto& v : q.vertices_) v *= s;
  return q;
}

class PolytopeBuilder {
 public:
  // Enumerate vertices of the canonicalized halfspace list by solving every
  // d-subset of boundary hyperplanes and keeping feasible solutions. When
  // assume_bounded is false, sentinel box constraints detect unboundedness.
  static ConvexPolytope build(std::vector<Halfspace> hs, int dim,
                              bool assume_bounded) {
    ConvexPolytope p;
    p.dim_ = dim;
    p.enumerated_ = true;
    const int original = static_cast<int>(hs.size());

    FlatHalfspaces flat;
    flat.d = dim;
    for (const auto& h : hs) flat.push(h.normal, h.offset);
    if (!assume_bounded) {
      for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd n = Eigen::VectorXd::Zero(dim);
        n[i] = 1.0;
        flat.push(n, kSentinelBound);
        flat.push(-n, kSentinelBound);
      }
    }

    const int n = flat.count();
    std::vector<std::array<double, kMaxDim>> found;
    std::vector<int> comb(dim);
    for (int i = 0; i < dim; ++i) comb[i] = i;
    if (n >= dim) {
      while (true) {
        double x[kMaxDim];
        if (solve_subset(flat.a.data(), flat.b.data(), comb.data(), dim, dim,
                         x)) {
          const double tol = scale_tol(x, dim);
          if (flat.feasible(x, tol)) {
            bool dup = false;
            for (const auto& v : found) {
              double dist = 0.0;
              for (int c = 0; c < dim; ++c)
                dist = std::max(dist, std::fabs(v[c] - x[c]));
              if (dist <= tol) {
                dup = true;
                break;
              }
            }
            if (!dup) {
              std::array<double, kMaxDim> v{};
              for (int c = 0; c < dim; ++c) v[c] = x[c];
              found.push_back(v);
            }
          }
        }
        // next lexicographic combination
        int k = dim - 1;
        while (k >= 0 && comb[k] == n - dim + k) --k;
        if (k < 0) break;
        ++comb[k];
        for (int j = k + 1; j < dim; ++j) comb[j] = comb[j - 1] + 1;
      }
    }

    if (!assume_bounded) {
      for (const auto& v : found)
        for (int c = 0; c < dim; ++c)
          if (std::fabs(v[c]) >= 0.5 * kSentinelBound)
            raise(ErrorKind::UnboundedRegion,
                  "halfspace intersection is unbounded");
    }

    p.halfspaces_ = std::move(hs);
    if (found.empty()) {
      p.empty_ = true;
      return p;
    }
    p.vertices_.reserve(found.size());
    for (const auto& v : found) {
      Eigen::VectorXd w(dim);
      for (int c = 0; c < dim; ++c) w[c] = v[c];
      p.vertices_.push_back(std::move(w));
    }

    // Volume-zero feasible sets are normalized to empty.
    int rank = affine_basis(p.vertices_, all_indices(static_cast<int>(
                                p.vertices_.size())),
                            dim, dim, nullptr, nullptr);
    if (rank < dim) {
      p.empty_ = true;
      return p;
    }
    p.empty_ = false;

    // Keep only facet-defining halfspaces (tight vertex set spans d-1 dims).
    std::vector<Halfspace> facets;
    facets.reserve(original);
    for (int i = 0; i < original; ++i) {
      std::vector<int> tight = tight_vertices(p.vertices_, p.halfspaces_[i]);
      if (static_cast<int>(tight.size()) < dim) continue;
      if (affine_basis(p.vertices_, tight, dim, dim, nullptr, nullptr) ==
          dim - 1)
        facets.push_back(p.halfspaces_[i]);
    }
    p.halfspaces_ = std::move(facets);
    return p;
  }
};

ConvexPolytope intersect_halfspaces(const std::vector<Halfspace>& halfspaces,
                                    int dim) {
  if (dim > kMaxDim)
    raise(ErrorKind::DimensionTooHigh,
          "volume engine supports dimensions 1..4");
  if (dim < 1) raise(ErrorKind::DimensionMismatch, "dimension must be >= 1");
  if (halfspaces.empty())
    raise(ErrorKind::UnboundedRegion, "no halfspaces given");
  return PolytopeBuilder::build(canonicalize(halfspaces, dim), dim, false);
}

ConvexPolytope clip(const ConvexPolytope& p, const Box& b) {
  if (p.dim() != b.dim())
    raise(ErrorKind::DimensionMismatch, "clip box dimension mismatch");
  std::vector<Halfspace> hs = p.halfspaces();
  for (auto& h : b.halfspaces()) hs.push_back(h);
  return PolytopeBuilder::build(canonicalize(hs, p.dim()), p.dim(), true);
}

Box bounding_box(const ConvexPolytope& p) {
  if (!p.enumerated())
    return bounding_box(intersect_halfspaces(p.halfspaces(), p.dim()));
  if (p.vertices().empty())
    raise(ErrorKind::EmptyPolytope, "bounding box of an empty polytope");
  const int d = p.dim();
  Eigen::VectorXd lo = p.vertices()[0];
  Eigen::VectorXd hi = p.vertices()[0];
  for (const auto& v : p.vertices())
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  // Guard zero-width coordinates so Box invariants hold for flat sets.
  for (int i = 0; i < d; ++i)
    if (!(lo[i] < hi[i])) hi[i] = lo[i] + 1e-15 * std::max(1.0, std::fabs(lo[i]));
  return Box(lo, hi);
}

bool contains(const ConvexPolytope& p, const Eigen::VectorXd& x) {
  return p.contains(x);
}

ConvexPolytope coupling_polytope(const ConvexPolytope& U,
                                 const ConvexPolytope& V,
                                 const ConvexPolytope& W) {
  const int a = U.dim();
  if (V.dim() != a || W.dim() != a)
    raise(ErrorKind::DimensionMismatch, "coupling cells must share a dimension");
  if (2 * a > kMaxDim)
    raise(ErrorKind::DimensionTooHigh, "coupling polytope needs dim <= 2");
  // Raw H-representations are enumerated first so boundedness is validated.
  if (!U.enumerated())
    return coupling_polytope(intersect_halfspaces(U.halfspaces(), a), V, W);
  if (!V.enumerated())
    return coupling_polytope(U, intersect_halfspaces(V.halfspaces(), a), W);
  if (!W.enumerated())
    return coupling_polytope(U, V, intersect_halfspaces(W.halfspaces(), a));
  ConvexPolytope out;
  if (U.empty() || V.empty() || W.empty()) {
    return out;  // default-constructed empty in R^{2a}
  }
  std::vector<Halfspace> lifted;
  lifted.reserve(U.halfspaces().size() + V.halfspaces().size() +
                 W.halfspaces().size());
  // x block carries V, y block carries U, W acts on x + y.
  for (const auto& h : V.halfspaces()) {
    Eigen::VectorXd n = Eigen::VectorXd::Zero(2 * a);
    n.head(a) = h.normal;
    lifted.emplace_back(std::move(n), h.offset);
  }
  for (const auto& h : U.halfspaces()) {
    Eigen::VectorXd n = Eigen::VectorXd::Zero(2 * a);
    n.tail(a) = h.normal;
    lifted.emplace_back(std::move(n), h.offset);
  }
  for (const auto& h : W.halfspaces()) {
    Eigen::VectorXd n(2 * a);
    n.head(a) = h.normal;
    n.tail(a) = h.normal;
    lifted.emplace_back(std::move(n), h.offset);
  }
  return PolytopeBuilder::build(canonicalize(lifted, 2 * a), 2 * a, true);
}

double volume(const ConvexPolytope& p) {
  if (!p.enumerated()) {
    // Raw H-representation: enumerate first (raises UnboundedRegion if open).
    if (p.halfspaces().empty()) return 0.0;
    return volume(intersect_halfspaces(p.halfspaces(), p.dim()));
  }
  if (p.empty() || p.vertices().empty()) return 0.0;
  const int d = p.dim();
  const auto& verts = p.vertices();
  const int nv = static_cast<int>(verts.size());
  if (nv < d + 1) return 0.0;

  if (d == 1) {
    double lo = verts[0][0], hi = verts[0][0];
    for (const auto& v : verts) {
      lo = std::min(lo, v[0]);
      hi = std::max(hi, v[0]);
    }
    return hi - lo;
  }

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
  for (const auto& v : verts) centroid += v;
  centroid /= static_cast<double>(nv);

  if (d == 2) {
    std::vector<int> ring = order_polygon(verts, all_indices(nv), 2);
    double area = 0.0;
    Eigen::MatrixXd m(2, 2);
    for (size_t i = 0; i < ring.size(); ++i) {
      const auto& a = verts[ring[i]];
      const auto& b = verts[ring[(i + 1) % ring.size()]];
      m.col(0) = a - centroid;
      m.col(1) = b - centroid;
      area += std::fabs(det_cols(m));
    }
    return area / 2.0;
  }

  // d == 3, 4: cone from the centroid over each facet; facets decompose into
  // fans around their own centroids, recursing one level for 4D cells.
  double vol = 0.0;
  for (const auto& h : p.halfspaces()) {
    std::vector<int> facet = tight_vertices(verts, h);
    if (static_cast<int>(facet.size()) < d) continue;
    Eigen::VectorXd fmean = Eigen::VectorXd::Zero(d);
    for (int i : facet) fmean += verts[i];
    fmean /= static_cast<double>(facet.size());

    if (d == 3) {
      std::vector<int> ring = order_polygon(verts, facet, 3);
      Eigen::MatrixXd m(3, 3);
      for (size_t i = 0; i < ring.size(); ++i) {
        const auto& a = verts[ring[i]];
        const auto& b = verts[ring[(i + 1) % ring.size()]];
        m.col(0) = fmean - centroid;
        m.col(1) = a - centroid;
        m.col(2) = b - centroid;
        vol += std::fabs(m.determinant()) / 6.0;
      }
    } else {
      // 2-faces of the facet: vertices tight on this and one more halfspace.
      std::vector<std::vector<int>> seen;
      for (const auto& g : p.halfspaces()) {
        if (&g == &h) continue;
        std::vector<int> face;
        for (int i : facet) {
          double tol =
              kGeomTol * std::max(1.0, verts[i].lpNorm<Eigen::Infinity>());
          if (std::fabs(g.normal.dot(verts[i]) - g.offset) <= tol)
            face.push_back(i);
        }
        if (static_cast<int>(face.size()) < 3) continue;
        if (affine_basis(verts, face, 4, 4, nullptr, nullptr) != 2) continue;
        std::vector<int> key = face;
        std::sort(key.begin(), key.end());
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);

        Eigen::VectorXd gmean = Eigen::VectorXd::Zero(4);
        for (int i : face) gmean += verts[i];
        gmean /= static_cast<double>(face.size());
        std::vector<int> ring = order_polygon(verts, face, 4);
        Eigen::MatrixXd m(4, 4);
        for (size_t i = 0; i < ring.size(); ++i) {
          const auto& a = verts[ring[i]];
          const auto& b = verts[ring[(i + 1) % ring.size()]];
          m.col(0) = fmean - centroid;
          m.col(1) = gmean - centroid;
          m.col(2) = a - centroid;
          m.col(3) = b - centroid;
          vol += std::fabs(m.determinant()) / 24.0;
        }
      }
    }
  }
  return vol;
}

}  // namespace vcnn
