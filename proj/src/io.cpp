#include "vcnn/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace vcnn {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- binary --

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    raise(ErrorKind::BadFile, "unexpected end of file in '" + path + "'");
  return v;
}

void check_magic(std::istream& is, const char expect[4],
                 const std::string& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, expect, 4) != 0)
    raise(ErrorKind::BadFile, "'" + path + "' is not a " +
                                  std::string(expect, 4) + " file");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    raise(ErrorKind::BadFile, "cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::BadFile, "cannot open '" + path + "'");
  return in;
}

// ------------------------------------------------------------------ json --

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

json box_to_json(const Box& b) {
  return json{{"lo", vec_to_json(b.lo)}, {"hi", vec_to_json(b.hi)}};
}

Box box_from_json(const json& j) {
  return Box(vec_from_json(j.at("lo")), vec_from_json(j.at("hi")));
}

std::vector<Eigen::VectorXd> sites_from_json(const json& a) {
  std::vector<Eigen::VectorXd> sites;
  sites.reserve(a.size());
  for (const json& s : a) sites.push_back(vec_from_json(s));
  return sites;
}

/// {"grid": [..counts..]} or {"sites": [[..], ..]} on the given domain.
std::shared_ptr<const Partition> partition_from_spec(const json& j,
                                                     const Box& domain) {
  if (j.contains("grid"))
    return std::make_shared<Partition>(
        grid_partition(j.at("grid").get<std::vector<int>>(), domain));
  if (j.contains("sites"))
    return std::make_shared<Partition>(
        voronoi_partition(sites_from_json(j.at("sites")), domain));
  raise(ErrorKind::BadFile, "partition spec needs 'grid' or 'sites'");
}

std::vector<Eigen::MatrixXd> kernel_weights_from_blob(const TensorBlob& t,
                                                      const std::string& path) {
  if (t.dims.size() != 3)
    raise(ErrorKind::BadFile,
          "kernel weights in '" + path + "' must have rank 3 (cells, m, n)");
  const int e = static_cast<int>(t.dims[0]);
  const int m = static_cast<int>(t.dims[1]);
  const int n = static_cast<int>(t.dims[2]);
  std::vector<Eigen::MatrixXd> weights(e, Eigen::MatrixXd(m, n));
  std::size_t idx = 0;
  for (int v = 0; v < e; ++v)
    for (int i = 0; i < m; ++i)
      for (int jj = 0; jj < n; ++jj) weights[v](i, jj) = t.data[idx++];
  return weights;
}

}  // namespace

// ------------------------------------------------------------ VCNT blobs --

void write_tensor(const std::string& path, const TensorBlob& t) {
  std::size_t count = 1;
  for (const std::uint32_t d : t.dims) count *= d;
  if (count != t.data.size())
    raise(ErrorKind::ShapeMismatch, "tensor data does not match its shape");
  std::ofstream out = open_out(path);
  out.write("VCNT", 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (const std::uint32_t d : t.dims) put<std::uint32_t>(out, d);
  for (const double v : t.data) put<double>(out, v);
  if (!out) raise(ErrorKind::BadFile, "write failed for '" + path + "'");
}

TensorBlob read_tensor(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, "VCNT", path);
  const std::uint32_t rank = get<std::uint32_t>(in, path);
  if (rank > 8) raise(ErrorKind::BadFile, "implausible tensor rank in '" + path + "'");
  TensorBlob t;
  t.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t& d : t.dims) {
    d = get<std::uint32_t>(in, path);
    count *= d;
  }
  if (count > (std::size_t{1} << 32))
    raise(ErrorKind::BadFile, "implausible tensor size in '" + path + "'");
  t.data.resize(count);
  for (double& v : t.data) v = get<double>(in, path);
  return t;
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  TensorBlob t;
  t.dims = {static_cast<std::uint32_t>(m.rows()),
            static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t.data.push_back(m(i, j));
  write_tensor(path, t);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  const TensorBlob t = read_tensor(path);
  if (t.dims.size() != 2)
    raise(ErrorKind::BadFile, "'" + path + "' does not hold a rank-2 tensor");
  Eigen::MatrixXd m(t.dims[0], t.dims[1]);
  std::size_t idx = 0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = t.data[idx++];
  return m;
}

void write_image_tensor(const std::string& path, const GridImage& img) {
  TensorBlob t;
  t.dims = {static_cast<std::uint32_t>(img.height),
            static_cast<std::uint32_t>(img.width),
            static_cast<std::uint32_t>(img.channels)};
  t.data = img.values;
  write_tensor(path, t);
}

GridImage read_image_tensor(const std::string& path, const Box& domain) {
  const TensorBlob t = read_tensor(path);
  if (t.dims.size() != 3)
    raise(ErrorKind::BadFile,
          "'" + path + "' does not hold a rank-3 (height, width, channels) tensor");
  GridImage img;
  img.height = static_cast<int>(t.dims[0]);
  img.width = static_cast<int>(t.dims[1]);
  img.channels = static_cast<int>(t.dims[2]);
  img.values = t.data;
  img.domain = domain;
  return img;
}

// ---------------------------------------------------------- content hash --

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::int64_t quantize(double v) {
  // 1e-12 resolution; canonical halfspaces have |normal| = 1 and desk-scale
  // offsets, so this stays far from int64 overflow.
  return std::llround(v * 1e12);
}

}  // namespace

std::uint64_t cells_content_hash(const std::vector<ConvexPolytope>& cells,
                                 int dim) {
  std::uint64_t h = 14695981039346656037ULL;
  const std::uint64_t d64 = static_cast<std::uint64_t>(dim);
  h = fnv1a(h, &d64, 8);
  const std::uint64_t count = cells.size();
  h = fnv1a(h, &count, 8);
  for (const ConvexPolytope& cell : cells) {
    std::vector<std::vector<std::int64_t>> rows;
    rows.reserve(cell.halfspaces().size());
    for (const Halfspace& hs : cell.halfspaces()) {
      std::vector<std::int64_t> row;
      row.reserve(dim + 1);
      for (int i = 0; i < dim; ++i) row.push_back(quantize(hs.normal[i]));
      row.push_back(quantize(hs.offset));
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end());
    const std::uint64_t nrows = rows.size();
    h = fnv1a(h, &nrows, 8);
    for (const auto& row : rows)
      h = fnv1a(h, row.data(), row.size() * sizeof(std::int64_t));
  }
  return h;
}

std::uint64_t partition_content_hash(const Partition& p) {
  return cells_content_hash(p.cells, p.dim);
}

// --------------------------------------------------------- coupling cache --

void write_coupling_cache(const std::string& path, const CouplingTensor& t,
                          std::uint64_t hash_u, std::uint64_t hash_v,
                          std::uint64_t hash_w) {
  std::ofstream out = open_out(path);
  out.write("VCNK", 4);
  put<std::uint32_t>(out, 1);  // version
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.u_count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.v_count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.w_count));
  put<std::uint64_t>(out, t.entries.size());
  put<std::uint64_t>(out, hash_u);
  put<std::uint64_t>(out, hash_v);
  put<std::uint64_t>(out, hash_w);
  for (const CouplingEntry& e : t.entries) {
    put<std::uint32_t>(out, e.u);
    put<std::uint32_t>(out, e.v);
    put<std::uint32_t>(out, e.w);
    put<double>(out, e.value);
  }
  if (!out) raise(ErrorKind::BadFile, "write failed for '" + path + "'");
}

CouplingCacheFile read_coupling_cache(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, "VCNK", path);
  const std::uint32_t version = get<std::uint32_t>(in, path);
  if (version != 1)
    raise(ErrorKind::BadFile, "unsupported coupling cache version in '" + path + "'");
  CouplingCacheFile f;
  f.tensor.dim = static_cast<int>(get<std::uint32_t>(in, path));
  f.tensor.u_count = static_cast<int>(get<std::uint32_t>(in, path));
  f.tensor.v_count = static_cast<int>(get<std::uint32_t>(in, path));
  f.tensor.w_count = static_cast<int>(get<std::uint32_t>(in, path));
  const std::uint64_t count = get<std::uint64_t>(in, path);
  f.hash_u = get<std::uint64_t>(in, path);
  f.hash_v = get<std::uint64_t>(in, path);
  f.hash_w = get<std::uint64_t>(in, path);
  if (count > (std::uint64_t{1} << 32))
    raise(ErrorKind::BadFile, "implausible entry count in '" + path + "'");
  f.tensor.entries.resize(count);
  for (CouplingEntry& e : f.tensor.entries) {
    e.u = get<std::uint32_t>(in, path);
    e.v = get<std::uint32_t>(in, path);
    e.w = get<std::uint32_t>(in, path);
    e.value = get<double>(in, path);
  }
  return f;
}

// --------------------------------------------------------- partition json --

void write_partition_json(const std::string& path, const Partition& p) {
  json j;
  j["dim"] = p.dim;
  j["kind"] = p.kind == PartitionKind::Voronoi ? "voronoi"
              : p.kind == PartitionKind::Grid  ? "grid"
                                               : "generic";
  j["domain"] = box_to_json(p.domain);
  if (!p.sites.empty()) {
    json sites = json::array();
    for (const auto& s : p.sites) sites.push_back(vec_to_json(s));
    j["sites"] = sites;
  }
  if (!p.grid_counts.empty()) j["grid_counts"] = p.grid_counts;
  json cells = json::array();
  double total = 0.0;
  for (int i = 0; i < p.cell_count(); ++i) {
    json halfspaces = json::array();
    for (const Halfspace& h : p.cells[i].halfspaces())
      halfspaces.push_back(
          json{{"normal", vec_to_json(h.normal)}, {"offset", h.offset}});
    cells.push_back(json{{"halfspaces", halfspaces}, {"volume", p.volumes[i]}});
    total += p.volumes[i];
  }
  j["cells"] = cells;
  j["total_volume"] = total;

  std::ofstream out(path);
  if (!out)
    raise(ErrorKind::BadFile, "cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) raise(ErrorKind::BadFile, "write failed for '" + path + "'");
}

Partition read_partition_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::BadFile, "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::BadFile, "parse error in '" + path + "': " + e.what());
  }
  try {
    Partition p;
    p.dim = j.at("dim").get<int>();
    const std::string kind = j.value("kind", "generic");
    p.kind = kind == "voronoi" ? PartitionKind::Voronoi
             : kind == "grid"  ? PartitionKind::Grid
                               : PartitionKind::Generic;
    p.domain = box_from_json(j.at("domain"));
    if (j.contains("sites")) p.sites = sites_from_json(j.at("sites"));
    if (j.contains("grid_counts"))
      p.grid_counts = j.at("grid_counts").get<std::vector<int>>();
    for (const json& cell : j.at("cells")) {
      std::vector<Halfspace> hs;
      for (const json& h : cell.at("halfspaces"))
        hs.emplace_back(vec_from_json(h.at("normal")),
                        h.at("offset").get<double>());
      p.cells.push_back(intersect_halfspaces(hs, p.dim));
      p.volumes.push_back(volume(p.cells.back()));
    }
    return p;
  } catch (const json::exception& e) {
    raise(ErrorKind::BadFile, "invalid partition file '" + path + "': " + e.what());
  }
}

// ----------------------------------------------------------- network json --

NetworkSpec read_network_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::BadFile, "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::BadFile, "parse error in '" + path + "': " + e.what());
  }
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  const auto resolve = [&dir](const std::string& file) {
    const std::filesystem::path p(file);
    return p.is_absolute() ? p.string() : (dir / p).string();
  };
  try {
    NetworkSpec net;
    net.domain = box_from_json(j.at("domain"));
    net.input_partition = partition_from_spec(j.at("input"), net.domain);
    int index = 0;
    for (const json& jl : j.at("layers")) {
      const std::string where = "layer " + std::to_string(index) + " in '" + path + "'";
      const std::string kind = jl.at("kind").get<std::string>();
      LayerSpec layer;
      if (kind == "conv") {
        layer.kind = LayerKind::Conv;
        const json& jk = jl.at("kernel");
        const Box kdomain = box_from_json(jk.at("domain"));
        layer.kernel.cells = partition_from_spec(jk, kdomain)->cells;
        layer.kernel.weights = kernel_weights_from_blob(
            read_tensor(resolve(jl.at("weights_file").get<std::string>())),
            jl.at("weights_file").get<std::string>());
        if (layer.kernel.weights.size() != layer.kernel.cells.size())
          raise(ErrorKind::BadFile,
                where + ": weight tensor has " +
                    std::to_string(layer.kernel.weights.size()) +
                    " matrices for " +
                    std::to_string(layer.kernel.cells.size()) +
                    " kernel cells");
        layer.normalize = jl.value("normalize", true);
        const json& jo = jl.at("output");
        if (!(jo.is_string() && jo.get<std::string>() == "same"))
          layer.output = partition_from_spec(jo, net.domain);
      } else if (kind == "pool") {
        layer.kind = LayerKind::Pool;
        layer.normalize = jl.value("normalize", true);
        const json& jo = jl.at("output");
        if (!(jo.is_string() && jo.get<std::string>() == "same"))
          layer.output = partition_from_spec(jo, net.domain);
      } else if (kind == "mixup") {
        layer.kind = LayerKind::Mixup;
        layer.mix =
            read_matrix(resolve(jl.at("weights_file").get<std::string>()));
      } else if (kind == "concat") {
        layer.kind = LayerKind::Concat;
        layer.partner = jl.at("partner").get<int>();
        if (layer.partner < -1 || layer.partner >= index)
          raise(ErrorKind::BadFile,
                where + ": concat partner must be an earlier layer index or -1");
      } else if (kind == "activation") {
        layer.kind = LayerKind::Activation;
        layer.sigma = jl.at("sigma").get<std::string>();
      } else {
        raise(ErrorKind::BadFile, where + ": unknown layer kind '" + kind + "'");
      }
      net.layers.push_back(std::move(layer));
      ++index;
    }
    return net;
  } catch (const json::exception& e) {
    raise(ErrorKind::BadFile, "invalid network file '" + path + "': " + e.what());
  }
}

void write_png_sidecar(const std::string& png_path, const GridImage& img,
                       const PngMap& map) {
  json j;
  j["png"] = std::filesystem::path(png_path).filename().string();
  j["map"] = "byte = clamp(round((value - offset) * scale), 0, 255)";
  j["offset"] = map.offset;
  j["scale"] = map.scale;
  j["width"] = img.width;
  j["height"] = img.height;
  j["channels"] = img.channels;
  j["domain"] = box_to_json(img.domain);
  const std::string path = png_path + ".json";
  std::ofstream out(path);
  if (!out)
    raise(ErrorKind::BadFile, "cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

}  // namespace vcnn
