#include "vcnn/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace vcnn {

namespace {

void check_image(const GridImage& img) {
  if (img.width < 1 || img.height < 1 || img.channels < 1)
    raise(ErrorKind::ShapeMismatch, "image must have width, height, channels >= 1");
  if (img.values.size() != static_cast<std::size_t>(img.width) * img.height *
                               img.channels)
    raise(ErrorKind::ShapeMismatch, "image value count does not match shape");
}

Box pixel_box(const GridImage& img, int row, int col) {
  const double sx = (img.domain.hi[0] - img.domain.lo[0]) / img.width;
  const double sy = (img.domain.hi[1] - img.domain.lo[1]) / img.height;
  Eigen::Vector2d lo(img.domain.lo[0] + col * sx,
                     img.domain.hi[1] - (row + 1) * sy);
  Eigen::Vector2d hi(img.domain.lo[0] + (col + 1) * sx,
                     img.domain.hi[1] - row * sy);
  return Box{lo, hi};
}

}  // namespace

CellFunction discretize(const GridImage& img,
                        std::shared_ptr<const Partition> partition) {
  check_image(img);
  if (partition->dim != 2)
    raise(ErrorKind::DimensionUnsupported,
          "discretize requires a 2-dimensional partition");
  if ((img.domain.lo - partition->domain.lo).lpNorm<Eigen::Infinity>() >
          kGeomTol ||
      (img.domain.hi - partition->domain.hi).lpNorm<Eigen::Infinity>() >
          kGeomTol)
    raise(ErrorKind::DomainMismatch,
          "image domain does not match the partition domain");

  const int k = partition->cell_count();
  const int m = img.channels;
  const double sx = (img.domain.hi[0] - img.domain.lo[0]) / img.width;
  const double sy = (img.domain.hi[1] - img.domain.lo[1]) / img.height;

  CellFunction f;
  f.values = Eigen::MatrixXd::Zero(k, m);

  std::vector<double> areas;
  std::vector<const double*> pix;  // pointer to the pixel's channel values
  for (int i = 0; i < k; ++i) {
    const ConvexPolytope& cell = partition->cells[i];
    if (cell.empty()) continue;
    const Box bb = bounding_box(cell);
    const int c_lo = std::clamp(
        static_cast<int>(std::floor((bb.lo[0] - img.domain.lo[0]) / sx)), 0,
        img.width - 1);
    const int c_hi = std::clamp(
        static_cast<int>(std::floor((bb.hi[0] - img.domain.lo[0]) / sx)), 0,
        img.width - 1);
    const int r_lo = std::clamp(
        static_cast<int>(std::floor((img.domain.hi[1] - bb.hi[1]) / sy)), 0,
        img.height - 1);
    const int r_hi = std::clamp(
        static_cast<int>(std::floor((img.domain.hi[1] - bb.lo[1]) / sy)), 0,
        img.height - 1);

    areas.clear();
    pix.clear();
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const double area = volume(clip(cell, pixel_box(img, r, c)));
        if (area > 0.0) {
          areas.push_back(area);
          pix.push_back(&img.at(r, c, 0));
        }
      }
    }
    if (areas.empty()) continue;

    for (int ch = 0; ch < m; ++ch) {
      // Constant contributions shortcut: the average of a constant is the
      // constant itself, exactly, with no quadrature noise.
      bool constant = true;
      for (std::size_t p = 1; p < pix.size() && constant; ++p)
        constant = pix[p][ch] == pix[0][ch];
      if (constant) {
        f.values(i, ch) = pix[0][ch];
        continue;
      }
      double num = 0.0, den = 0.0;
      for (std::size_t p = 0; p < pix.size(); ++p) {
        num += areas[p] * pix[p][ch];
        den += areas[p];
      }
      f.values(i, ch) = num / den;
    }
  }
  f.partition = std::move(partition);
  return f;
}

GridImage rasterize(const CellFunction& f, int width, int height) {
  if (f.partition->dim != 2)
    raise(ErrorKind::DimensionUnsupported,
          "rasterize requires a 2-dimensional partition");
  if (width < 1 || height < 1)
    raise(ErrorKind::ShapeMismatch, "rasterize needs width, height >= 1");

  GridImage img;
  img.width = width;
  img.height = height;
  img.channels = f.channels();
  img.domain = f.partition->domain;
  img.values.resize(static_cast<std::size_t>(width) * height * img.channels);

  const double sx = (img.domain.hi[0] - img.domain.lo[0]) / width;
  const double sy = (img.domain.hi[1] - img.domain.lo[1]) / height;
  Eigen::Vector2d center;
  for (int r = 0; r < height; ++r) {
    center[1] = img.domain.hi[1] - (r + 0.5) * sy;
    for (int c = 0; c < width; ++c) {
      center[0] = img.domain.lo[0] + (c + 0.5) * sx;
      const int cell = locate(*f.partition, center);
      for (int ch = 0; ch < img.channels; ++ch)
        img.at(r, c, ch) = f.values(cell, ch);
    }
  }
  return img;
}

PngMap write_png(const GridImage& img, const std::string& path) {
  check_image(img);
  if (img.channels > 4)
    raise(ErrorKind::ShapeMismatch,
          "PNG export supports at most 4 channels, got " +
              std::to_string(img.channels));

  double lo = img.values[0], hi = img.values[0];
  for (const double v : img.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  PngMap map;
  map.offset = lo;
  map.scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  std::vector<png_byte> bytes(img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const double q = std::round((img.values[i] - map.offset) * map.scale);
    bytes[i] = static_cast<png_byte>(std::clamp(q, 0.0, 255.0));
  }

  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) raise(ErrorKind::BadFile, "cannot open '" + path + "' for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorKind::BadFile, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorKind::BadFile, "libpng write failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  const int color_type = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : img.channels == 2 ? PNG_COLOR_TYPE_GRAY_ALPHA
                         : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                             : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(png, info, img.width, img.height, 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r)
    rows[r] = bytes.data() +
              static_cast<std::size_t>(r) * img.width * img.channels;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return map;
}

GridImage read_png(const std::string& path, const Box& domain) {
  if (domain.dim() != 2)
    raise(ErrorKind::DimensionUnsupported, "image domains are 2-dimensional");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) raise(ErrorKind::BadFile, "cannot open '" + path + "'");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorKind::BadFile, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorKind::BadFile, "libpng read failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  // Normalize to 8-bit channels.
  png_set_expand(png);
  png_set_strip_16(png);
  png_read_update_info(png, info);

  GridImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  img.domain = domain;
  img.values.resize(static_cast<std::size_t>(img.width) * img.height *
                    img.channels);

  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int r = 0; r < img.height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        img.at(r, c, ch) = row[c * img.channels + ch] / 255.0;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace vcnn
