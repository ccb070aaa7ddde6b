// vcnn command-line tool: build partitions, precompute coupling tensors,
// run inference, render outputs, verify volumes against Monte Carlo, and
// check gradients.
//
// Exit codes: 0 ok, 1 usage / bad file, 2 partition errors, 3 geometry
// errors, 4 shape errors, 5 verification failure, 6 gradient mismatch.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "vcnn/io.hpp"
#include "vcnn/rng.hpp"

namespace {

using namespace vcnn;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::DuplicateSites:
    case ErrorKind::SiteOutsideDomain:
    case ErrorKind::PointOutsideDomain:
      return 2;
    case ErrorKind::UnboundedRegion:
    case ErrorKind::DimensionTooHigh:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::EmptyPolytope:
    case ErrorKind::InvalidHalfspace:
    case ErrorKind::DimensionUnsupported:
      return 3;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::PartitionMismatch:
    case ErrorKind::MissingCouplingTensor:
    case ErrorKind::UnknownActivation:
    case ErrorKind::DomainMismatch:
      return 4;
    case ErrorKind::BadFile:
      return 1;
  }
  return 1;
}

Box parse_domain(const std::string& s) {
  std::vector<double> xs;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok =
        s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      xs.push_back(std::stod(tok));
    } catch (const std::exception&) {
      raise(ErrorKind::BadFile, "cannot parse --domain value '" + s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (xs.size() == 2) {
    Eigen::VectorXd lo(1), hi(1);
    lo << xs[0];
    hi << xs[1];
    return Box(lo, hi);
  }
  if (xs.size() == 4) {
    Eigen::VectorXd lo(2), hi(2);
    lo << xs[0], xs[1];
    hi << xs[2], xs[3];
    return Box(lo, hi);
  }
  raise(ErrorKind::BadFile,
        "--domain expects \"x0,x1\" (1D) or \"x0,y0,x1,y1\" (2D)");
}

std::pair<int, int> parse_resolution(const std::string& s) {
  int w = 0, h = 0;
  if (std::sscanf(s.c_str(), "%dx%d", &w, &h) != 2 || w < 1 || h < 1)
    raise(ErrorKind::BadFile, "--resolution expects WxH, got '" + s + "'");
  return {w, h};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<Eigen::VectorXd> read_sites_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::BadFile, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::BadFile, "parse error in '" + path + "': " + e.what());
  }
  if (!j.is_array() || j.empty())
    raise(ErrorKind::BadFile, "'" + path + "' must hold a non-empty JSON array of points");
  std::vector<Eigen::VectorXd> sites;
  for (const auto& s : j) {
    Eigen::VectorXd v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].get<double>();
    sites.push_back(std::move(v));
  }
  return sites;
}

std::string cache_file_path(const std::string& cache_dir, std::uint64_t hu,
                            std::uint64_t hv, std::uint64_t hw) {
  return (fs::path(cache_dir) /
          ("K_" + hex64(hu) + "_" + hex64(hv) + "_" + hex64(hw) + ".vcnk"))
      .string();
}

/// Load the coupling tensor for (input, kernel, output) from the cache
/// directory, or compute and store it. An empty cache_dir disables caching.
CouplingTensor load_or_compute_coupling(const Partition& input,
                                        const std::vector<ConvexPolytope>& kcells,
                                        const Partition& output,
                                        const std::string& cache_dir,
                                        bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  if (cache_dir.empty()) return compute_coupling(input, kcells, output);
  const std::uint64_t hu = partition_content_hash(input);
  const std::uint64_t hv = cells_content_hash(kcells, input.dim);
  const std::uint64_t hw = partition_content_hash(output);
  const std::string path = cache_file_path(cache_dir, hu, hv, hw);
  if (fs::exists(path)) {
    CouplingCacheFile f = read_coupling_cache(path);
    if (f.hash_u == hu && f.hash_v == hv && f.hash_w == hw &&
        f.tensor.u_count == input.cell_count() &&
        f.tensor.v_count == static_cast<int>(kcells.size()) &&
        f.tensor.w_count == output.cell_count()) {
      if (cache_hit) *cache_hit = true;
      return std::move(f.tensor);
    }
  }
  CouplingTensor t = compute_coupling(input, kcells, output);
  fs::create_directories(cache_dir);
  write_coupling_cache(path, t, hu, hv, hw);
  return t;
}

// ----------------------------------------------------------- subcommands --

int run_partition(const std::string& sites_file, const std::string& out_file,
                  const std::string& domain_str) {
  const Box domain = parse_domain(domain_str);
  const Partition p = voronoi_partition(read_sites_file(sites_file), domain);
  write_partition_json(out_file, p);
  const double total = std::accumulate(p.volumes.begin(), p.volumes.end(), 0.0);
  std::printf("wrote %s: %d cells, total volume %.12g (domain %.12g)\n",
              out_file.c_str(), p.cell_count(), total, domain.volume());
  return 0;
}

int run_ktensor(const std::string& input_file, const std::string& kernel_file,
                const std::string& output_file, const std::string& cache_dir) {
  const Partition input = read_partition_json(input_file);
  const Partition kernel = read_partition_json(kernel_file);
  const Partition output = read_partition_json(output_file);

  const auto t0 = std::chrono::steady_clock::now();
  bool hit = false;
  const CouplingTensor t =
      load_or_compute_coupling(input, kernel.cells, output, cache_dir, &hit);
  const double ms = elapsed_ms(t0);

  const std::uint64_t hu = partition_content_hash(input);
  const std::uint64_t hv = cells_content_hash(kernel.cells, input.dim);
  const std::uint64_t hw = partition_content_hash(output);
  const double dense = static_cast<double>(t.u_count) * t.v_count * t.w_count;
  std::printf("%s: %zu entries (%.4f%% of dense), %.1f ms\n",
              hit ? "cache hit" : "computed", t.entries.size(),
              dense > 0 ? 100.0 * static_cast<double>(t.entries.size()) / dense : 0.0,
              ms);
  if (t.entries.empty())
    std::printf("warning: coupling tensor is empty (kernel cells are unreachable "
                "from the input within the output domain)\n");
  std::printf("cache file: %s\n",
              cache_file_path(cache_dir, hu, hv, hw).c_str());
  return 0;
}

int run_infer(const std::string& network_file, const std::string& image_file,
              const std::string& cellfn_file, const std::string& out_prefix,
              const std::string& resolution, const std::string& cache_dir,
              bool dump_intermediates, int normalize_override) {
  NetworkSpec net = read_network_json(network_file);
  if (normalize_override >= 0)
    for (LayerSpec& layer : net.layers)
      if (layer.kind == LayerKind::Conv || layer.kind == LayerKind::Pool)
        layer.normalize = normalize_override != 0;

  CellFunction f;
  f.partition = net.input_partition;
  if (!image_file.empty()) {
    const GridImage img =
        fs::path(image_file).extension() == ".png"
            ? read_png(image_file, net.domain)
            : read_image_tensor(image_file, net.domain);
    f = discretize(img, net.input_partition);
  } else {
    f.values = read_matrix(cellfn_file);
    if (f.values.rows() != net.input_partition->cell_count())
      raise(ErrorKind::ShapeMismatch,
            "input has " + std::to_string(f.values.rows()) +
                " rows, input partition has " +
                std::to_string(net.input_partition->cell_count()) + " cells");
  }
  std::printf("input: %d cells x %d channels\n",
              static_cast<int>(f.values.rows()), f.channels());

  // Pre-populate conv tensors through the disk cache; pooling overlaps are
  // cheap and are computed in-process by forward().
  TensorCache cache;
  {
    std::shared_ptr<const Partition> cur = net.input_partition;
    for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
      const LayerSpec& layer = net.layers[i];
      if (layer.kind == LayerKind::Conv) {
        const auto out = layer.output ? layer.output : cur;
        bool hit = false;
        const auto t0 = std::chrono::steady_clock::now();
        cache.coupling[i] = load_or_compute_coupling(
            *cur, layer.kernel.cells, *out, cache_dir, &hit);
        std::printf("layer %d: coupling tensor %s (%zu entries, %.1f ms)\n", i,
                    hit ? "cache hit" : "computed",
                    cache.coupling[i].entries.size(), elapsed_ms(t0));
        cur = out;
      } else if (layer.kind == LayerKind::Pool && layer.output) {
        cur = layer.output;
      }
    }
  }

  std::vector<CellFunction> intermediates;
  const auto t0 = std::chrono::steady_clock::now();
  const CellFunction out = forward(net, f, cache, &intermediates);
  std::printf("forward pass: %.1f ms\n", elapsed_ms(t0));
  for (std::size_t i = 0; i < intermediates.size(); ++i)
    std::printf("layer %zu output: %d cells x %d channels\n", i,
                static_cast<int>(intermediates[i].values.rows()),
                intermediates[i].channels());

  write_matrix(out_prefix + ".vcnt", out.values);
  std::printf("wrote %s.vcnt\n", out_prefix.c_str());
  if (dump_intermediates)
    for (std::size_t i = 0; i < intermediates.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "_layer%02zu.vcnt", i);
      write_matrix(out_prefix + name, intermediates[i].values);
    }

  if (out.partition->dim == 2) {
    const auto [w, h] = parse_resolution(resolution);
    const GridImage render = rasterize(out, w, h);
    const PngMap map = write_png(render, out_prefix + ".png");
    write_png_sidecar(out_prefix + ".png", render, map);
    std::printf("wrote %s.png (+ .json sidecar)\n", out_prefix.c_str());
  }
  return 0;
}

int run_rasterize(const std::string& partition_file,
                  const std::string& values_file, const std::string& out_png,
                  const std::string& resolution) {
  auto partition =
      std::make_shared<const Partition>(read_partition_json(partition_file));
  CellFunction f;
  f.partition = partition;
  f.values = read_matrix(values_file);
  if (f.values.rows() != partition->cell_count())
    raise(ErrorKind::ShapeMismatch,
          "values have " + std::to_string(f.values.rows()) +
              " rows, partition has " +
              std::to_string(partition->cell_count()) + " cells");
  const auto [w, h] = parse_resolution(resolution);
  const GridImage img = rasterize(f, w, h);
  const PngMap map = write_png(img, out_png);
  write_png_sidecar(out_png, img, map);
  std::printf("wrote %s (+ .json sidecar)\n", out_png.c_str());
  return 0;
}

int run_verify(const std::string& input_file, const std::string& kernel_file,
               const std::string& output_file, const std::string& cache_dir,
               std::int64_t samples, std::uint64_t seed, int max_entries) {
  const Partition input = read_partition_json(input_file);
  const Partition kernel = read_partition_json(kernel_file);
  const Partition output = read_partition_json(output_file);
  const std::uint64_t hu = partition_content_hash(input);
  const std::uint64_t hv = cells_content_hash(kernel.cells, input.dim);
  const std::uint64_t hw = partition_content_hash(output);
  const std::string path = cache_file_path(cache_dir, hu, hv, hw);
  if (!fs::exists(path))
    raise(ErrorKind::BadFile,
          "no cached coupling tensor at '" + path + "'; run ktensor first");
  const CouplingCacheFile f = read_coupling_cache(path);
  if (f.hash_u != hu || f.hash_v != hv || f.hash_w != hw)
    raise(ErrorKind::BadFile, "cache file '" + path +
                                  "' does not match the given partitions");

  // Seeded subset when the tensor is large.
  std::vector<std::size_t> idx(f.tensor.entries.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_entries > 0 && idx.size() > static_cast<std::size_t>(max_entries)) {
    Rng rng(mix_seed(seed, 0x5eed));
    for (std::size_t i = 0; i < static_cast<std::size_t>(max_entries); ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform() * (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(max_entries);
  }

  double max_z = 0.0;
  std::size_t worst = 0;
  for (const std::size_t i : idx) {
    const CouplingEntry& e = f.tensor.entries[i];
    const std::uint64_t eseed =
        mix_seed(mix_seed(mix_seed(seed, e.u), e.v), e.w);
    const McEstimate mc =
        monte_carlo_coupling(input.cells[e.u], kernel.cells[e.v],
                             output.cells[e.w], samples, eseed);
    // Zero observed hits give a zero standard error; floor it at the
    // rule-of-three scale so true-but-tiny entries are not flagged.
    const Box vb = bounding_box(kernel.cells[e.v]);
    const Box ub = bounding_box(input.cells[e.u]);
    const double floor_se = vb.volume() * ub.volume() *
                            std::sqrt(3.0 / static_cast<double>(samples)) /
                            std::sqrt(static_cast<double>(samples));
    const double z = std::abs(e.value - mc.estimate) /
                     std::max(mc.std_error, floor_se);
    if (z > max_z) {
      max_z = z;
      worst = i;
    }
  }
  std::printf("verified %zu of %zu entries at %lld samples: max |exact-mc|/stderr = %.3f\n",
              idx.size(), f.tensor.entries.size(),
              static_cast<long long>(samples), max_z);
  if (max_z > 4.0) {
    const CouplingEntry& e = f.tensor.entries[worst];
    std::printf("FAIL at 4 sigma: entry (u=%u, v=%u, w=%u) value %.12g\n", e.u,
                e.v, e.w, e.value);
    return 5;
  }
  std::printf("pass at 4 sigma\n");
  return 0;
}

int run_gradcheck(const std::string& network_file, std::uint64_t seed,
                  int channels, const std::string& cache_dir) {
  NetworkSpec net = read_network_json(network_file);

  int m = channels;
  if (m <= 0) {
    m = 1;
    for (const LayerSpec& layer : net.layers) {
      if (layer.kind == LayerKind::Conv) {
        m = static_cast<int>(layer.kernel.weights[0].rows());
        break;
      }
      if (layer.kind == LayerKind::Mixup) {
        m = static_cast<int>(layer.mix.rows());
        break;
      }
    }
  }

  Rng rng(seed);
  CellFunction input;
  input.partition = net.input_partition;
  input.values =
      Eigen::MatrixXd::Zero(net.input_partition->cell_count(), m);
  for (int i = 0; i < input.values.rows(); ++i)
    for (int j = 0; j < m; ++j) input.values(i, j) = rng.uniform(-1.0, 1.0);

  TensorCache cache;
  if (!cache_dir.empty()) {
    std::shared_ptr<const Partition> cur = net.input_partition;
    for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
      const LayerSpec& layer = net.layers[i];
      if (layer.kind == LayerKind::Conv) {
        const auto out = layer.output ? layer.output : cur;
        cache.coupling[i] = load_or_compute_coupling(
            *cur, layer.kernel.cells, *out, cache_dir, nullptr);
        cur = out;
      } else if (layer.kind == LayerKind::Pool && layer.output) {
        cur = layer.output;
      }
    }
  }

  const CellFunction out0 = forward(net, input, cache);
  Eigen::MatrixXd upstream(out0.values.rows(), out0.values.cols());
  for (int i = 0; i < upstream.rows(); ++i)
    for (int j = 0; j < upstream.cols(); ++j)
      upstream(i, j) = rng.uniform(-1.0, 1.0);

  const Gradients grads = backward_params(net, input, upstream, cache);
  const auto loss = [&](const NetworkSpec& n) {
    return (upstream.array() * forward(n, input, cache).values.array()).sum();
  };

  const double h = 1e-5;
  double max_rel = 0.0;
  const auto check_entry = [&](double* param, double analytic) {
    const double saved = *param;
    *param = saved + h;
    const double lp = loss(net);
    *param = saved - h;
    const double lm = loss(net);
    *param = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - analytic) /
                       std::max({std::abs(fd), std::abs(analytic), 1e-3});
    max_rel = std::max(max_rel, rel);
  };

  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    LayerSpec& layer = net.layers[i];
    if (layer.kind == LayerKind::Conv) {
      for (std::size_t v = 0; v < layer.kernel.weights.size(); ++v) {
        Eigen::MatrixXd& W = layer.kernel.weights[v];
        for (int r = 0; r < W.rows(); ++r)
          for (int c = 0; c < W.cols(); ++c)
            check_entry(&W(r, c), grads.kernel[i][v](r, c));
      }
    } else if (layer.kind == LayerKind::Mixup) {
      for (int r = 0; r < layer.mix.rows(); ++r)
        for (int c = 0; c < layer.mix.cols(); ++c)
          check_entry(&layer.mix(r, c), grads.mix[i](r, c));
    }
  }

  std::printf("gradient check: max relative error %.3e (threshold 1e-5)\n",
              max_rel);
  if (max_rel > 1e-5) {
    std::printf("FAIL\n");
    return 6;
  }
  std::printf("pass\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-constant convolutional networks on Voronoi partitions"};
  app.require_subcommand(1);

  std::string sites_file, out_file, domain_str = "0,0,1,1";
  auto* cmd_partition =
      app.add_subcommand("partition", "Build a Voronoi partition from sites");
  cmd_partition->add_option("sites", sites_file, "JSON array of points")
      ->required();
  cmd_partition->add_option("output", out_file, "partition JSON to write")
      ->required();
  cmd_partition->add_option("--domain", domain_str,
                            "domain box \"x0,y0,x1,y1\" (1D: \"x0,x1\")");

  std::string in_part, kern_part, out_part, cache_dir = "vcnn-cache";
  auto* cmd_ktensor = app.add_subcommand(
      "ktensor", "Precompute the coupling tensor for (input, kernel, output)");
  cmd_ktensor->add_option("input", in_part, "input partition JSON")->required();
  cmd_ktensor->add_option("kernel", kern_part, "kernel partition JSON")
      ->required();
  cmd_ktensor->add_option("output", out_part, "output partition JSON")
      ->required();
  cmd_ktensor->add_option("--cache-dir", cache_dir, "coupling cache directory");

  std::string network_file, image_file, cellfn_file, out_prefix;
  std::string resolution = "256x256", infer_cache_dir = "vcnn-cache";
  bool dump_intermediates = false;
  bool norm_on = false, norm_off = false;
  auto* cmd_infer = app.add_subcommand("infer", "Run a network on an input");
  cmd_infer->add_option("network", network_file, "network spec JSON")
      ->required();
  cmd_infer->add_option("out_prefix", out_prefix, "output file prefix")
      ->required();
  auto* opt_image =
      cmd_infer->add_option("--image", image_file, "input image (.png or .vcnt)");
  cmd_infer->add_option("--cellfn", cellfn_file, "input cell values (.vcnt)")
      ->excludes(opt_image);
  cmd_infer->add_option("--resolution", resolution, "render resolution WxH");
  cmd_infer->add_option("--cache-dir", infer_cache_dir,
                        "coupling cache directory");
  cmd_infer->add_flag("--dump-intermediates", dump_intermediates,
                      "write every layer output");
  cmd_infer->add_flag("--normalize", norm_on,
                      "force the 1/|W| factor on conv/pool layers");
  cmd_infer->add_flag("--no-normalize", norm_off,
                      "suppress the 1/|W| factor on conv/pool layers");

  std::string ras_part, ras_values, ras_png, ras_resolution = "256x256";
  auto* cmd_rasterize =
      app.add_subcommand("rasterize", "Render cell values to a PNG");
  cmd_rasterize->add_option("partition", ras_part, "partition JSON")->required();
  cmd_rasterize->add_option("values", ras_values, "cell values (.vcnt)")
      ->required();
  cmd_rasterize->add_option("output", ras_png, "PNG to write")->required();
  cmd_rasterize->add_option("--resolution", ras_resolution,
                            "render resolution WxH");

  std::string ver_in, ver_kern, ver_out, ver_cache_dir = "vcnn-cache";
  std::int64_t samples = 1000000;
  std::uint64_t seed = 0;
  int max_entries = 500;
  auto* cmd_verify = app.add_subcommand(
      "verify", "Monte Carlo check of a cached coupling tensor");
  cmd_verify->add_option("input", ver_in, "input partition JSON")->required();
  cmd_verify->add_option("kernel", ver_kern, "kernel partition JSON")
      ->required();
  cmd_verify->add_option("output", ver_out, "output partition JSON")
      ->required();
  cmd_verify->add_option("--cache-dir", ver_cache_dir,
                         "coupling cache directory");
  cmd_verify->add_option("--samples", samples, "Monte Carlo samples per entry");
  cmd_verify->add_option("--seed", seed, "random seed");
  cmd_verify->add_option("--max-entries", max_entries,
                         "verify at most this many entries (0 = all)");

  std::string gc_network, gc_cache_dir;
  std::uint64_t gc_seed = 0;
  int gc_channels = 0;
  auto* cmd_gradcheck = app.add_subcommand(
      "grad-check", "Analytic vs finite-difference parameter gradients");
  cmd_gradcheck->add_option("network", gc_network, "network spec JSON")
      ->required();
  cmd_gradcheck->add_option("--seed", gc_seed, "random seed");
  cmd_gradcheck->add_option("--channels", gc_channels,
                            "input channel count (default: inferred)");
  cmd_gradcheck->add_option("--cache-dir", gc_cache_dir,
                            "coupling cache directory (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*cmd_partition)
      return run_partition(sites_file, out_file, domain_str);
    if (*cmd_ktensor)
      return run_ktensor(in_part, kern_part, out_part, cache_dir);
    if (*cmd_infer) {
      if (image_file.empty() == cellfn_file.empty()) {
        std::cerr << "infer needs exactly one of --image / --cellfn\n";
        return 1;
      }
      const int norm_override = norm_on ? 1 : norm_off ? 0 : -1;
      return run_infer(network_file, image_file, cellfn_file, out_prefix,
                       resolution, infer_cache_dir, dump_intermediates,
                       norm_override);
    }
    if (*cmd_rasterize)
      return run_rasterize(ras_part, ras_values, ras_png, ras_resolution);
    if (*cmd_verify) {
      if (samples < 1000) {
        std::cerr << "--samples must be at least 1000\n";
        return 1;
      }
      return run_verify(ver_in, ver_kern, ver_out, ver_cache_dir, samples,
                        seed, max_entries);
    }
    if (*cmd_gradcheck)
      return run_gradcheck(gc_network, gc_seed, gc_channels, gc_cache_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
