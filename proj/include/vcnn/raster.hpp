#ifndef VCNN_RASTER_HPP
#define VCNN_RASTER_HPP

#include <string>

#include "vcnn/network.hpp"

namespace vcnn {

/// Row-major (height x width x channels) image spanning a domain box.
/// Row 0 is the top of the image (largest y).
struct GridImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;
  Box domain;

  double& at(int row, int col, int c) {
    return values[(static_cast<std::size_t>(row) * width + col) * channels + c];
  }
  const double& at(int row, int col, int c) const {
    return values[(static_cast<std::size_t>(row) * width + col) * channels + c];
  }
};

/// Exact cell averages of the image seen as a piecewise-constant function
/// (one constant per pixel): value of cell S is
/// sum_pixels area(pixel ∩ S) * pixel_value / sum_pixels area(pixel ∩ S),
/// with each area obtained by convex clipping. When every contributing
/// pixel holds the same value the cell takes that value directly, so
/// constant images (and pixel-aligned cells) reproduce exactly.
/// Throws DimensionUnsupported (partition dimension != 2) and
/// DomainMismatch.
CellFunction discretize(const GridImage& img,
                        std::shared_ptr<const Partition> partition);

/// Pixel-center sampling of a cell function (a visualization aid, not an
/// average): each pixel takes the value of locate(pixel center). The domain
/// is copied from the partition. Throws DimensionUnsupported.
GridImage rasterize(const CellFunction& f, int width, int height);

/// Affine map used for 8-bit quantization: byte = round((v - offset) * scale)
/// clamped to [0,255]. scale is 0 for constant images.
struct PngMap {
  double offset = 0.0;
  double scale = 0.0;
};

/// 8-bit PNG export; 1/2/3/4 channels map to gray / gray+alpha / RGB / RGBA.
/// All channels share one affine map (returned so callers can record it).
PngMap write_png(const GridImage& img, const std::string& path);

/// 8-bit PNG import; bytes map to [0,1]. The domain must be supplied by the
/// caller since PNG carries none.
GridImage read_png(const std::string& path, const Box& domain);

}  // namespace vcnn

#endif  // VCNN_RASTER_HPP
