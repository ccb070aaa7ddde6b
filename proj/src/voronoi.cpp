#include "vcnn/voronoi.hpp"

#include <cmath>
#include <string>

namespace vcnn {

namespace {

// A bisector against a site farther than the domain diameter from p cannot
// cut the domain box (every domain point is strictly closer to p), so it is
// redundant and can be skipped before vertex enumeration.
double domain_diameter(const Box& domain) {
  return (domain.hi - domain.lo).norm();
}

}  // namespace

Partition voronoi_partition(const std::vector<Eigen::VectorXd>& sites,
                            const Box& domain) {
  const int a = domain.dim();
  if (a < 1 || a > 2)
    raise(ErrorKind::DimensionUnsupported,
          "voronoi_partition supports dimensions 1 and 2, got " +
              std::to_string(a));
  if (sites.empty())
    raise(ErrorKind::ShapeMismatch, "voronoi_partition needs at least 1 site");

  const int k = static_cast<int>(sites.size());
  for (int i = 0; i < k; ++i) {
    if (sites[i].size() != a)
      raise(ErrorKind::DimensionMismatch,
            "site " + std::to_string(i) + " has dimension " +
                std::to_string(sites[i].size()) + ", domain has " +
                std::to_string(a));
    if (!domain.contains(sites[i]))
      raise(ErrorKind::SiteOutsideDomain,
            "site " + std::to_string(i) + " lies outside the domain");
    for (int j = 0; j < i; ++j)
      if ((sites[i] - sites[j]).norm() < kGeomTol)
        raise(ErrorKind::DuplicateSites,
              "sites " + std::to_string(j) + " and " + std::to_string(i) +
                  " coincide");
  }

  const double reach = 2.0 * domain_diameter(domain);
  const std::vector<Halfspace> box_hs = domain.halfspaces();

  Partition part;
  part.dim = a;
  part.kind = PartitionKind::Voronoi;
  part.domain = domain;
  part.sites = sites;
  part.cells.reserve(k);
  part.volumes.reserve(k);
  for (int i = 0; i < k; ++i) {
    std::vector<Halfspace> hs = box_hs;
    const Eigen::VectorXd& p = sites[i];
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const Eigen::VectorXd& q = sites[j];
      if ((q - p).norm() > reach) continue;
      // {x : d(x,p) <= d(x,q)}  <=>  2(q-p).x <= |q|^2 - |p|^2
      hs.emplace_back(2.0 * (q - p), q.squaredNorm() - p.squaredNorm());
    }
    part.cells.push_back(intersect_halfspaces(hs, a));
    part.volumes.push_back(volume(part.cells.back()));
  }
  return part;
}

Partition grid_partition(const std::vector<int>& counts, const Box& domain) {
  const int a = domain.dim();
  if (static_cast<int>(counts.size()) != a)
    raise(ErrorKind::DimensionMismatch,
          "grid counts have length " + std::to_string(counts.size()) +
              ", domain has dimension " + std::to_string(a));
  for (int d = 0; d < a; ++d)
    if (counts[d] < 1)
      raise(ErrorKind::ShapeMismatch, "grid counts must be >= 1");

  Eigen::VectorXd side(a);
  for (int d = 0; d < a; ++d)
    side[d] = (domain.hi[d] - domain.lo[d]) / counts[d];

  Partition part;
  part.dim = a;
  part.kind = PartitionKind::Grid;
  part.domain = domain;
  part.grid_counts = counts;

  // Row-major order, last axis fastest: index = (..(i_0 c_1 + i_1) c_2 ..).
  std::vector<int> idx(a, 0);
  while (true) {
    std::vector<Halfspace> hs;
    Eigen::VectorXd center(a);
    for (int d = 0; d < a; ++d) {
      const double lo = domain.lo[d] + idx[d] * side[d];
      const double hi =
          idx[d] + 1 == counts[d] ? domain.hi[d]
                                  : domain.lo[d] + (idx[d] + 1) * side[d];
      Eigen::VectorXd n = Eigen::VectorXd::Zero(a);
      n[d] = -1.0;
      hs.emplace_back(n, -lo);
      n[d] = 1.0;
      hs.emplace_back(n, hi);
      center[d] = 0.5 * (lo + hi);
    }
    part.cells.push_back(intersect_halfspaces(hs, a));
    part.volumes.push_back(volume(part.cells.back()));
    part.sites.push_back(center);

    int d = a - 1;
    while (d >= 0 && ++idx[d] == counts[d]) idx[d--] = 0;
    if (d < 0) break;
  }
  return part;
}

int locate(const Partition& partition, const Eigen::VectorXd& x) {
  if (x.size() != partition.dim)
    raise(ErrorKind::DimensionMismatch,
          "point has dimension " + std::to_string(x.size()) +
              ", partition has " + std::to_string(partition.dim));
  if (!partition.domain.contains(x))
    raise(ErrorKind::PointOutsideDomain, "point lies outside the domain");

  if (partition.kind == PartitionKind::Grid) {
    const int a = partition.dim;
    int index = 0;
    for (int d = 0; d < a; ++d) {
      const int c = partition.grid_counts[d];
      const double side = (partition.domain.hi[d] - partition.domain.lo[d]) / c;
      int i = static_cast<int>(
          std::floor((x[d] - partition.domain.lo[d]) / side));
      i = std::min(std::max(i, 0), c - 1);
      index = index * c + i;
    }
    return index;
  }

  if (partition.kind == PartitionKind::Voronoi) {
    int best = 0;
    double best_d2 = (x - partition.sites[0]).squaredNorm();
    for (int i = 1; i < partition.cell_count(); ++i) {
      const double d2 = (x - partition.sites[i]).squaredNorm();
      if (d2 < best_d2) {  // strict: ties go to the lowest index
        best_d2 = d2;
        best = i;
      }
    }
    return best;
  }

  for (int i = 0; i < partition.cell_count(); ++i)
    if (partition.cells[i].contains(x)) return i;
  raise(ErrorKind::PointOutsideDomain, "point not covered by any cell");
}

}  // namespace vcnn
