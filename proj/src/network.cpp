#include "vcnn/network.hpp"

#include <algorithm>
#include <cmath>

namespace vcnn {

namespace {

// A normalized pooling weight |V∩W|/|W| within this distance of 1 is snapped
// to 1: the overlap fills the whole output cell up to enumeration noise, and
// the snap makes identity pooling return its input bit for bit.
constexpr double kUnitWeightTol = 1e-12;

double relu_fn(double x) { return x > 0.0 ? x : 0.0; }
double relu_dfn(double x) { return x > 0.0 ? 1.0 : 0.0; }  // subgradient 0 at 0
double identity_fn(double x) { return x; }
double identity_dfn(double) { return 1.0; }
double tanh_fn(double x) { return std::tanh(x); }
double tanh_dfn(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

std::map<std::string, Activation>& activation_registry() {
  static std::map<std::string, Activation> reg = {
      {"relu", {relu_fn, relu_dfn}},
      {"identity", {identity_fn, identity_dfn}},
      {"tanh", {tanh_fn, tanh_dfn}},
  };
  return reg;
}

double pool_weight(const OverlapEntry& e, const Partition& output,
                   bool normalize) {
  if (!normalize) return e.value;
  const double vol = output.volumes[e.w];
  if (vol <= 0.0) return 0.0;
  double weight = e.value / vol;
  if (std::abs(weight - 1.0) <= kUnitWeightTol) weight = 1.0;
  return weight;
}

void check_kernel(const KernelSpec& kernel, int m, int& n) {
  if (kernel.cells.empty())
    raise(ErrorKind::ShapeMismatch, "kernel needs at least one cell");
  if (kernel.weights.size() != kernel.cells.size())
    raise(ErrorKind::ShapeMismatch,
          "kernel has " + std::to_string(kernel.cells.size()) + " cells but " +
              std::to_string(kernel.weights.size()) + " weight matrices");
  n = static_cast<int>(kernel.weights[0].cols());
  for (std::size_t v = 0; v < kernel.weights.size(); ++v)
    if (kernel.weights[v].rows() != m || kernel.weights[v].cols() != n)
      raise(ErrorKind::ShapeMismatch,
            "kernel matrix " + std::to_string(v) + " is " +
                std::to_string(kernel.weights[v].rows()) + "x" +
                std::to_string(kernel.weights[v].cols()) + ", expected " +
                std::to_string(m) + "x" + std::to_string(n));
}

}  // namespace

const Activation& find_activation(const std::string& name) {
  auto& reg = activation_registry();
  const auto it = reg.find(name);
  if (it == reg.end())
    raise(ErrorKind::UnknownActivation, "no activation named '" + name + "'");
  return it->second;
}

void register_activation(const std::string& name, const Activation& act) {
  activation_registry()[name] = act;
}

CellFunction conv_forward(const CellFunction& f, const KernelSpec& kernel,
                          const CouplingTensor& K,
                          std::shared_ptr<const Partition> output,
                          bool normalize) {
  const int m = f.channels();
  int n = 0;
  check_kernel(kernel, m, n);
  if (K.u_count != static_cast<int>(f.values.rows()) ||
      K.v_count != static_cast<int>(kernel.cells.size()) ||
      K.w_count != output->cell_count() || K.dim != f.partition->dim)
    raise(ErrorKind::MissingCouplingTensor,
          "coupling tensor shape (" + std::to_string(K.u_count) + "," +
              std::to_string(K.v_count) + "," + std::to_string(K.w_count) +
              ") does not match input/kernel/output cells (" +
              std::to_string(f.values.rows()) + "," +
              std::to_string(kernel.cells.size()) + "," +
              std::to_string(output->cell_count()) + ")");

  const int nw = output->cell_count();
  CellFunction g;
  g.partition = std::move(output);
  g.values = Eigen::MatrixXd::Zero(nw, n);

  // Contributions per output scalar are accumulated in ascending value
  // order: the sum over the (u,v) multiset then does not depend on cell
  // numbering, making permutation equivariance exact rather than
  // within-rounding.
  std::vector<std::vector<double>> terms(n);
  Eigen::VectorXd contrib(n);
  for (int w = 0; w < nw; ++w) {
    const auto [first, last] = K.w_slice(w);
    if (first == last) continue;
    for (int j = 0; j < n; ++j) terms[j].clear();
    for (std::size_t i = first; i < last; ++i) {
      const CouplingEntry& e = K.entries[i];
      contrib.noalias() = e.value * (kernel.weights[e.v].transpose() *
                                     f.values.row(e.u).transpose());
      for (int j = 0; j < n; ++j) terms[j].push_back(contrib[j]);
    }
    for (int j = 0; j < n; ++j) {
      std::sort(terms[j].begin(), terms[j].end());
      double sum = 0.0;
      for (const double t : terms[j]) sum += t;
      g.values(w, j) = sum;
    }
    if (normalize) {
      const double vol = g.partition->volumes[w];
      if (vol > 0.0)
        g.values.row(w) /= vol;
      else
        g.values.row(w).setZero();
    }
  }
  return g;
}

CellFunction activation(const CellFunction& f, const std::string& sigma) {
  const Activation& act = find_activation(sigma);
  CellFunction g;
  g.partition = f.partition;
  g.values = f.values.unaryExpr([&](double x) { return act.fn(x); });
  return g;
}

CellFunction pool_forward(const CellFunction& f, const OverlapMatrix& overlaps,
                          std::shared_ptr<const Partition> output,
                          bool normalize) {
  if (overlaps.rows != static_cast<int>(f.values.rows()) ||
      overlaps.cols != output->cell_count())
    raise(ErrorKind::ShapeMismatch,
          "overlap matrix is " + std::to_string(overlaps.rows) + "x" +
              std::to_string(overlaps.cols) + ", expected " +
              std::to_string(f.values.rows()) + "x" +
              std::to_string(output->cell_count()));

  CellFunction g;
  g.values = Eigen::MatrixXd::Zero(output->cell_count(), f.channels());
  for (const OverlapEntry& e : overlaps.entries)
    g.values.row(e.w) += pool_weight(e, *output, normalize) * f.values.row(e.v);
  g.partition = std::move(output);
  return g;
}

CellFunction mixup(const CellFunction& f, const Eigen::MatrixXd& M) {
  if (M.rows() != f.channels())
    raise(ErrorKind::ShapeMismatch,
          "mixup matrix has " + std::to_string(M.rows()) +
              " rows, function has " + std::to_string(f.channels()) +
              " channels");
  CellFunction g;
  g.partition = f.partition;
  g.values = f.values * M;  // row-wise M^T v
  return g;
}

CellFunction concat(const CellFunction& f, const CellFunction& g) {
  if (f.partition.get() != g.partition.get())
    raise(ErrorKind::PartitionMismatch,
          "concat requires both functions on the same partition object");
  CellFunction out;
  out.partition = f.partition;
  out.values.resize(f.values.rows(), f.values.cols() + g.values.cols());
  out.values.leftCols(f.values.cols()) = f.values;
  out.values.rightCols(g.values.cols()) = g.values;
  return out;
}

void ensure_tensors(const NetworkSpec& net, const CellFunction& input,
                    TensorCache& cache, int threads) {
  std::shared_ptr<const Partition> cur = input.partition;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    const LayerSpec& layer = net.layers[i];
    switch (layer.kind) {
      case LayerKind::Conv: {
        auto out = layer.output ? layer.output : cur;
        if (!cache.coupling.count(i))
          cache.coupling[i] =
              compute_coupling(*cur, layer.kernel.cells, *out, threads);
        cur = out;
        break;
      }
      case LayerKind::Pool: {
        auto out = layer.output ? layer.output : cur;
        if (!cache.overlaps.count(i))
          cache.overlaps[i] = compute_overlaps(*cur, *out);
        cur = out;
        break;
      }
      default:
        break;  // mixup / concat / activation keep the partition
    }
  }
}

CellFunction forward(const NetworkSpec& net, const CellFunction& input,
                     TensorCache& cache,
                     std::vector<CellFunction>* intermediates) {
  ensure_tensors(net, input, cache);
  std::vector<CellFunction> outs;
  outs.reserve(net.layers.size());
  CellFunction cur = input;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    const LayerSpec& layer = net.layers[i];
    try {
      switch (layer.kind) {
        case LayerKind::Conv:
          cur = conv_forward(cur, layer.kernel, cache.coupling.at(i),
                             layer.output ? layer.output : cur.partition,
                             layer.normalize);
          break;
        case LayerKind::Pool:
          cur = pool_forward(cur, cache.overlaps.at(i),
                             layer.output ? layer.output : cur.partition,
                             layer.normalize);
          break;
        case LayerKind::Mixup:
          cur = mixup(cur, layer.mix);
          break;
        case LayerKind::Concat: {
          if (layer.partner < -1 || layer.partner >= i)
            raise(ErrorKind::PartitionMismatch,
                  "concat partner must be an earlier layer or -1 (input)");
          cur = concat(cur, layer.partner < 0 ? input : outs[layer.partner]);
          break;
        }
        case LayerKind::Activation:
          cur = activation(cur, layer.sigma);
          break;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "layer " + std::to_string(i) + ": " + e.what());
    }
    outs.push_back(cur);
  }
  if (intermediates) *intermediates = outs;
  return cur;
}

Gradients backward_params(const NetworkSpec& net, const CellFunction& input,
                          const Eigen::MatrixXd& upstream, TensorCache& cache) {
  std::vector<CellFunction> outs;
  const CellFunction final_out = forward(net, input, cache, &outs);
  if (upstream.rows() != final_out.values.rows() ||
      upstream.cols() != final_out.values.cols())
    raise(ErrorKind::ShapeMismatch,
          "upstream gradient is " + std::to_string(upstream.rows()) + "x" +
              std::to_string(upstream.cols()) + ", output is " +
              std::to_string(final_out.values.rows()) + "x" +
              std::to_string(final_out.values.cols()));

  const int L = static_cast<int>(net.layers.size());
  Gradients result;
  result.kernel.resize(L);
  result.mix.resize(L);
  result.input = Eigen::MatrixXd::Zero(input.values.rows(), input.values.cols());
  if (L == 0) {
    result.input = upstream;
    return result;
  }

  // grad[i] accumulates d loss / d (output of layer i); node -1 is the input.
  std::vector<Eigen::MatrixXd> grad(L);
  grad[L - 1] = upstream;
  const auto node_values = [&](int idx) -> const CellFunction& {
    return idx < 0 ? input : outs[idx];
  };
  const auto add_to = [&](int idx, const Eigen::MatrixXd& g) {
    if (idx < 0)
      result.input += g;
    else if (grad[idx].size() == 0)
      grad[idx] = g;
    else
      grad[idx] += g;
  };

  for (int i = L - 1; i >= 0; --i) {
    if (grad[i].size() == 0)
      grad[i] = Eigen::MatrixXd::Zero(outs[i].values.rows(),
                                      outs[i].values.cols());
    const LayerSpec& layer = net.layers[i];
    const CellFunction& fin = node_values(i - 1);
    const Eigen::MatrixXd& gout = grad[i];
    switch (layer.kind) {
      case LayerKind::Conv: {
        const CouplingTensor& K = cache.coupling.at(i);
        const auto out_part = layer.output ? layer.output : fin.partition;
        const int e = static_cast<int>(layer.kernel.cells.size());
        const int m = fin.channels();
        const int n = static_cast<int>(layer.kernel.weights[0].cols());
        std::vector<Eigen::MatrixXd> kg(
            e, Eigen::MatrixXd::Zero(m, n));
        Eigen::MatrixXd fg =
            Eigen::MatrixXd::Zero(fin.values.rows(), fin.values.cols());
        for (const CouplingEntry& en : K.entries) {
          double scale = en.value;
          if (layer.normalize) {
            const double vol = out_part->volumes[en.w];
            scale = vol > 0.0 ? scale / vol : 0.0;
          }
          // g_w += scale * W_v^T f_u, so:
          kg[en.v].noalias() +=
              scale * fin.values.row(en.u).transpose() * gout.row(en.w);
          fg.row(en.u).noalias() +=
              scale * gout.row(en.w) * layer.kernel.weights[en.v].transpose();
        }
        result.kernel[i] = std::move(kg);
        add_to(i - 1, fg);
        break;
      }
      case LayerKind::Pool: {
        const OverlapMatrix& ov = cache.overlaps.at(i);
        const auto out_part = layer.output ? layer.output : fin.partition;
        Eigen::MatrixXd fg =
            Eigen::MatrixXd::Zero(fin.values.rows(), fin.values.cols());
        for (const OverlapEntry& en : ov.entries)
          fg.row(en.v) +=
              pool_weight(en, *out_part, layer.normalize) * gout.row(en.w);
        add_to(i - 1, fg);
        break;
      }
      case LayerKind::Mixup: {
        result.mix[i] = fin.values.transpose() * gout;
        add_to(i - 1, gout * layer.mix.transpose());
        break;
      }
      case LayerKind::Concat: {
        const CellFunction& partner = node_values(layer.partner);
        add_to(i - 1, gout.leftCols(fin.channels()));
        add_to(layer.partner, gout.rightCols(partner.channels()));
        break;
      }
      case LayerKind::Activation: {
        const Activation& act = find_activation(layer.sigma);
        const Eigen::MatrixXd deriv =
            fin.values.unaryExpr([&](double x) { return act.dfn(x); });
        add_to(i - 1, (gout.array() * deriv.array()).matrix());
        break;
      }
    }
  }
  return result;
}

}  // namespace vcnn
