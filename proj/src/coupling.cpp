#include "vcnn/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "vcnn/rng.hpp"

namespace vcnn {

namespace {

// Entries below this absolute volume (in domain units^{2a}) are sliver noise
// from vertex enumeration and are dropped; stored values are always > 0.
constexpr double kDropThreshold = 1e-14;

ConvexPolytope intersection(const ConvexPolytope& a, const ConvexPolytope& b) {
  std::vector<Halfspace> hs = a.halfspaces();
  hs.insert(hs.end(), b.halfspaces().begin(), b.halfspaces().end());
  return intersect_halfspaces(hs, a.dim());
}

}  // namespace

std::pair<std::size_t, std::size_t> CouplingTensor::w_slice(int w) const {
  const auto lo = std::lower_bound(
      entries.begin(), entries.end(), w,
      [](const CouplingEntry& e, int key) { return static_cast<int>(e.w) < key; });
  const auto hi = std::upper_bound(
      entries.begin(), entries.end(), w,
      [](int key, const CouplingEntry& e) { return key < static_cast<int>(e.w); });
  return {static_cast<std::size_t>(lo - entries.begin()),
          static_cast<std::size_t>(hi - entries.begin())};
}

double CouplingTensor::value(int u, int v, int w) const {
  const auto [first, last] = w_slice(w);
  for (std::size_t i = first; i < last; ++i)
    if (static_cast<int>(entries[i].v) == v &&
        static_cast<int>(entries[i].u) == u)
      return entries[i].value;
  return 0.0;
}

std::pair<std::size_t, std::size_t> OverlapMatrix::w_slice(int w) const {
  const auto lo = std::lower_bound(
      entries.begin(), entries.end(), w,
      [](const OverlapEntry& e, int key) { return static_cast<int>(e.w) < key; });
  const auto hi = std::upper_bound(
      entries.begin(), entries.end(), w,
      [](int key, const OverlapEntry& e) { return key < static_cast<int>(e.w); });
  return {static_cast<std::size_t>(lo - entries.begin()),
          static_cast<std::size_t>(hi - entries.begin())};
}

double OverlapMatrix::value(int v, int w) const {
  const auto [first, last] = w_slice(w);
  for (std::size_t i = first; i < last; ++i)
    if (static_cast<int>(entries[i].v) == v) return entries[i].value;
  return 0.0;
}

bool prefilter(const Box& u_box, const Box& v_box, const Box& w_box) {
  return u_box.minkowski_sum(v_box).intersects(w_box);
}

CouplingTensor compute_coupling(const Partition& input,
                                const std::vector<ConvexPolytope>& kernel_cells,
                                const Partition& output, int threads) {
  const int a = input.dim;
  if (output.dim != a)
    raise(ErrorKind::DimensionMismatch,
          "input partition has dimension " + std::to_string(a) +
              ", output has " + std::to_string(output.dim));
  for (std::size_t v = 0; v < kernel_cells.size(); ++v)
    if (kernel_cells[v].dim() != a)
      raise(ErrorKind::DimensionMismatch,
            "kernel cell " + std::to_string(v) + " has dimension " +
                std::to_string(kernel_cells[v].dim()));

  const int nu = input.cell_count();
  const int nv = static_cast<int>(kernel_cells.size());
  const int nw = output.cell_count();

  // Bounding boxes for the prefilter; empty cells contribute nothing.
  // bounding_box enumerates raw kernel cells, so unbounded ones raise here.
  std::vector<Box> u_box(nu), v_box(nv), w_box(nw);
  std::vector<bool> u_ok(nu, false), v_ok(nv, false), w_ok(nw, false);
  for (int u = 0; u < nu; ++u)
    if (!input.cells[u].empty())
      u_box[u] = bounding_box(input.cells[u]), u_ok[u] = true;
  for (int v = 0; v < nv; ++v)
    if (!(kernel_cells[v].enumerated() && kernel_cells[v].empty()))
      v_box[v] = bounding_box(kernel_cells[v]), v_ok[v] = true;
  for (int w = 0; w < nw; ++w)
    if (!output.cells[w].empty())
      w_box[w] = bounding_box(output.cells[w]), w_ok[w] = true;

  auto fill_range = [&](int w_begin, int w_end,
                        std::vector<CouplingEntry>& out) {
    for (int w = w_begin; w < w_end; ++w) {
      if (!w_ok[w]) continue;
      for (int v = 0; v < nv; ++v) {
        if (!v_ok[v]) continue;
        for (int u = 0; u < nu; ++u) {
          if (!u_ok[u]) continue;
          if (!prefilter(u_box[u], v_box[v], w_box[w])) continue;
          const double vol = volume(coupling_polytope(
              input.cells[u], kernel_cells[v], output.cells[w]));
          if (vol > kDropThreshold)
            out.push_back({static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v),
                           static_cast<std::uint32_t>(w), vol});
        }
      }
    }
  };

  CouplingTensor tensor;
  tensor.dim = a;
  tensor.u_count = nu;
  tensor.v_count = nv;
  tensor.w_count = nw;

  int n_threads = threads > 0
                      ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, nw));
  if (n_threads == 1) {
    fill_range(0, nw, tensor.entries);
    return tensor;
  }

  // Disjoint w-ranges per worker, concatenated in order: the result is
  // identical to the sequential pass for any thread count.
  std::vector<std::vector<CouplingEntry>> chunks(n_threads);
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    const int w_begin = static_cast<int>(static_cast<long long>(nw) * t / n_threads);
    const int w_end =
        static_cast<int>(static_cast<long long>(nw) * (t + 1) / n_threads);
    workers.emplace_back(fill_range, w_begin, w_end, std::ref(chunks[t]));
  }
  for (auto& th : workers) th.join();
  for (auto& chunk : chunks)
    tensor.entries.insert(tensor.entries.end(), chunk.begin(), chunk.end());
  return tensor;
}

OverlapMatrix compute_overlaps(const Partition& input,
                               const Partition& output) {
  const int a = input.dim;
  if (output.dim != a)
    raise(ErrorKind::DimensionMismatch,
          "input partition has dimension " + std::to_string(a) +
              ", output has " + std::to_string(output.dim));

  const int nv = input.cell_count();
  const int nw = output.cell_count();
  std::vector<Box> v_box(nv), w_box(nw);
  std::vector<bool> v_ok(nv, false), w_ok(nw, false);
  for (int v = 0; v < nv; ++v)
    if (!input.cells[v].empty())
      v_box[v] = bounding_box(input.cells[v]), v_ok[v] = true;
  for (int w = 0; w < nw; ++w)
    if (!output.cells[w].empty())
      w_box[w] = bounding_box(output.cells[w]), w_ok[w] = true;

  OverlapMatrix overlaps;
  overlaps.rows = nv;
  overlaps.cols = nw;
  for (int w = 0; w < nw; ++w) {
    if (!w_ok[w]) continue;
    for (int v = 0; v < nv; ++v) {
      if (!v_ok[v] || !v_box[v].intersects(w_box[w])) continue;
      const double vol = volume(intersection(input.cells[v], output.cells[w]));
      if (vol > kDropThreshold)
        overlaps.entries.push_back({static_cast<std::uint32_t>(v),
                                    static_cast<std::uint32_t>(w), vol});
    }
  }
  return overlaps;
}

McEstimate monte_carlo_coupling(const ConvexPolytope& U,
                                const ConvexPolytope& V,
                                const ConvexPolytope& W, std::int64_t samples,
                                std::uint64_t seed) {
  if (samples < 1000)
    raise(ErrorKind::ShapeMismatch, "monte_carlo_coupling needs >= 1000 samples");
  if ((U.enumerated() && U.empty()) || (V.enumerated() && V.empty()) ||
      (W.enumerated() && W.empty()))
    return {0.0, 0.0};

  const int a = U.dim();
  const Box vb = bounding_box(V);
  const Box ub = bounding_box(U);
  const double box_vol = vb.volume() * ub.volume();

  // Flatten the halfspaces once; the sample loop then runs on raw doubles.
  struct Flat {
    std::vector<double> coeffs;  // per halfspace: a normals then the offset
    int count = 0;
  };
  auto flatten = [a](const ConvexPolytope& p) {
    Flat f;
    f.count = static_cast<int>(p.halfspaces().size());
    f.coeffs.reserve(static_cast<std::size_t>(f.count) * (a + 1));
    for (const Halfspace& h : p.halfspaces()) {
      for (int d = 0; d < a; ++d) f.coeffs.push_back(h.normal[d]);
      f.coeffs.push_back(h.offset);
    }
    return f;
  };
  const Flat fv = flatten(V), fu = flatten(U), fw = flatten(W);
  auto inside = [a](const Flat& f, const double* pt) {
    const double* c = f.coeffs.data();
    for (int i = 0; i < f.count; ++i, c += a + 1) {
      double dot = 0.0;
      for (int d = 0; d < a; ++d) dot += c[d] * pt[d];
      if (dot > c[a] + kGeomTol) return false;
    }
    return true;
  };

  Rng rng(seed);
  double x[kMaxDim], y[kMaxDim], s[kMaxDim];
  std::int64_t hits = 0;
  for (std::int64_t n = 0; n < samples; ++n) {
    for (int d = 0; d < a; ++d) x[d] = rng.uniform(vb.lo[d], vb.hi[d]);
    for (int d = 0; d < a; ++d) y[d] = rng.uniform(ub.lo[d], ub.hi[d]);
    if (!inside(fv, x) || !inside(fu, y)) continue;
    for (int d = 0; d < a; ++d) s[d] = x[d] + y[d];
    if (inside(fw, s)) ++hits;
  }

  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  McEstimate r;
  r.estimate = box_vol * p;
  r.std_error =
      box_vol * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return r;
}

}  // namespace vcnn
