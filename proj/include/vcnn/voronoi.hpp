#ifndef VCNN_VORONOI_HPP
#define VCNN_VORONOI_HPP

#include <vector>

#include "vcnn/geometry.hpp"

namespace vcnn {

enum class PartitionKind { Voronoi, Grid, Generic };

/// A finite list of bounded convex cells tiling a domain box with pairwise
/// disjoint interiors. Voronoi partitions keep their sites (sites[i] lies in
/// cells[i]); grid partitions additionally keep the per-axis counts and use
/// cell centers as sites. Cell volumes are computed once at construction.
struct Partition {
  int dim = 0;
  PartitionKind kind = PartitionKind::Generic;
  Box domain;
  std::vector<ConvexPolytope> cells;
  std::vector<Eigen::VectorXd> sites;  // empty for Generic
  std::vector<int> grid_counts;        // empty unless kind == Grid
  std::vector<double> volumes;         // volumes[i] = volume(cells[i])

  int cell_count() const { return static_cast<int>(cells.size()); }
};

/// Voronoi partition of the domain box: cells[i] is the intersection of the
/// box halfspaces with the bisector halfspaces 2(q-p).x <= |q|^2 - |p|^2
/// against every other site q; redundant bisectors are removed. Cells are
/// ordered as the sites. dim must be 1 or 2.
/// Throws DuplicateSites if two sites are closer than kGeomTol and
/// SiteOutsideDomain if a site lies outside the domain.
Partition voronoi_partition(const std::vector<Eigen::VectorXd>& sites,
                            const Box& domain);

/// Axis-aligned grid of counts[0] x ... x counts[a-1] boxes in row-major
/// cell order (last axis fastest); sites are the cell centers.
Partition grid_partition(const std::vector<int>& counts, const Box& domain);

/// Index of the cell containing x: nearest site for Voronoi partitions
/// (ties to the lowest index), direct index arithmetic for grids, and a
/// containment scan for generic partitions. Throws PointOutsideDomain.
int locate(const Partition& partition, const Eigen::VectorXd& x);

}  // namespace vcnn

#endif  // VCNN_VORONOI_HPP
