#ifndef VCNN_IO_HPP
#define VCNN_IO_HPP

#include <cstdint>
#include <string>

#include "vcnn/network.hpp"
#include "vcnn/raster.hpp"

namespace vcnn {

/// Dense little-endian f64 tensor with a shape header:
/// magic "VCNT", u32 rank, u32 dims[rank], then the row-major data.
struct TensorBlob {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

void write_tensor(const std::string& path, const TensorBlob& t);
TensorBlob read_tensor(const std::string& path);

/// Rank-2 blob helpers (cell-function values, mixup matrices).
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

/// Rank-3 (height, width, channels) blob helpers for lossless images.
void write_image_tensor(const std::string& path, const GridImage& img);
GridImage read_image_tensor(const std::string& path, const Box& domain);

/// FNV-1a over the cells' halfspace coefficients rounded to 1e-12 (each
/// cell's halfspaces sorted, cells in order): identifies partition geometry
/// for coupling-cache keying.
std::uint64_t cells_content_hash(const std::vector<ConvexPolytope>& cells,
                                 int dim);
std::uint64_t partition_content_hash(const Partition& p);

/// Binary coupling cache: magic "VCNK", u32 version, u32 dim, u32 u_count,
/// u32 v_count, u32 w_count, u64 entry count, u64 content hashes of the
/// input / kernel / output cells, then (u32 u, u32 v, u32 w, f64 value)
/// records sorted by (w, v, u).
struct CouplingCacheFile {
  CouplingTensor tensor;
  std::uint64_t hash_u = 0;
  std::uint64_t hash_v = 0;
  std::uint64_t hash_w = 0;
};

void write_coupling_cache(const std::string& path, const CouplingTensor& t,
                          std::uint64_t hash_u, std::uint64_t hash_v,
                          std::uint64_t hash_w);
CouplingCacheFile read_coupling_cache(const std::string& path);

/// Partition JSON: dim, kind, domain, sites / grid_counts where applicable,
/// per-cell halfspace lists and volumes, total volume. Reading re-enumerates
/// every cell from its halfspaces.
void write_partition_json(const std::string& path, const Partition& p);
Partition read_partition_json(const std::string& path);

/// Network JSON: domain, input partition (sites or grid), and the layer
/// list; weight tensors live in VCNT files resolved relative to the JSON
/// file. Parse or validation problems raise BadFile.
NetworkSpec read_network_json(const std::string& path);

/// PNG quantization sidecar: records the affine byte map of write_png.
void write_png_sidecar(const std::string& png_path, const GridImage& img,
                       const PngMap& map);

}  // namespace vcnn

#endif  // VCNN_IO_HPP
