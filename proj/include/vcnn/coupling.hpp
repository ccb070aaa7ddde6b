#ifndef VCNN_COUPLING_HPP
#define VCNN_COUPLING_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "vcnn/voronoi.hpp"

namespace vcnn {

struct CouplingEntry {
  std::uint32_t u = 0;  // input cell
  std::uint32_t v = 0;  // kernel cell
  std::uint32_t w = 0;  // output cell
  double value = 0.0;   // K^V_{U,W} > 0
};

/// Sparse coupling tensor (u,v,w) -> K^V_{U,W}; exact zeros are not stored.
/// Entries are kept in coordinate format sorted by (w, v, u) because the
/// forward pass iterates per output cell.
struct CouplingTensor {
  int dim = 0;
  int u_count = 0;
  int v_count = 0;
  int w_count = 0;
  std::vector<CouplingEntry> entries;

  /// Entry index range [first, last) for output cell w.
  std::pair<std::size_t, std::size_t> w_slice(int w) const;
  /// Stored value or 0 if the triple is absent.
  double value(int u, int v, int w) const;
};

struct OverlapEntry {
  std::uint32_t v = 0;  // input cell
  std::uint32_t w = 0;  // output cell
  double value = 0.0;   // |V ∩ W| > 0
};

/// Sparse pooling overlap volumes |V ∩ W|, sorted by (w, v).
struct OverlapMatrix {
  int rows = 0;  // input cell count
  int cols = 0;  // output cell count
  std::vector<OverlapEntry> entries;

  std::pair<std::size_t, std::size_t> w_slice(int w) const;
  double value(int v, int w) const;
};

/// True unless K^V_{U,W} is provably zero: the componentwise interval sum of
/// u_box and v_box misses w_box. Sound (never false for a nonzero entry) but
/// incomplete.
bool prefilter(const Box& u_box, const Box& v_box, const Box& w_box);

/// Assemble the coupling tensor: entries(u,v,w) =
/// volume(coupling_polytope(U_u, V_v, W_w)) for every triple passing the
/// bounding-box prefilter; values below 1e-14 are dropped as sliver noise.
/// Deterministic for any thread count (threads = 0 picks the hardware
/// concurrency); workers fill disjoint w-ranges merged in order.
CouplingTensor compute_coupling(const Partition& input,
                                const std::vector<ConvexPolytope>& kernel_cells,
                                const Partition& output, int threads = 0);

/// Pooling overlaps entries(v,w) = volume(V_v ∩ W_w), bounding-box
/// prefiltered.
OverlapMatrix compute_overlaps(const Partition& input, const Partition& output);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo oracle for one coupling volume: samples x uniformly in
/// bounding_box(V) and y uniformly in bounding_box(U); estimate =
/// box-volume product x hit fraction of (x in V, y in U, x+y in W).
/// Reproducible for a fixed seed.
McEstimate monte_carlo_coupling(const ConvexPolytope& U,
                                const ConvexPolytope& V,
                                const ConvexPolytope& W, std::int64_t samples,
                                std::uint64_t seed);

}  // namespace vcnn

#endif  // VCNN_COUPLING_HPP
