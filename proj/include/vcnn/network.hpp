#ifndef VCNN_NETWORK_HPP
#define VCNN_NETWORK_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vcnn/coupling.hpp"

namespace vcnn {

/// Piecewise-constant function: one value row per partition cell.
struct CellFunction {
  std::shared_ptr<const Partition> partition;
  Eigen::MatrixXd values;  // cell_count x channels

  int channels() const { return static_cast<int>(values.cols()); }
};

/// Kernel partition cells plus one m x n weight matrix per cell.
struct KernelSpec {
  std::vector<ConvexPolytope> cells;
  std::vector<Eigen::MatrixXd> weights;  // weights[v] maps m -> n channels
};

enum class LayerKind { Conv, Pool, Mixup, Concat, Activation };

struct LayerSpec {
  LayerKind kind = LayerKind::Activation;
  // conv
  KernelSpec kernel;
  // conv / pool: target partition (null means same partition as the input)
  std::shared_ptr<const Partition> output;
  bool normalize = true;
  // mixup
  Eigen::MatrixXd mix;
  // concat: partner node; layer index, or -1 for the network input
  int partner = -1;
  // activation
  std::string sigma;
};

struct NetworkSpec {
  Box domain;
  std::shared_ptr<const Partition> input_partition;
  std::vector<LayerSpec> layers;
};

/// Coupling tensors / overlap matrices keyed by layer index.
struct TensorCache {
  std::map<int, CouplingTensor> coupling;
  std::map<int, OverlapMatrix> overlaps;
};

/// Pointwise activation with derivative (for the backward pass).
struct Activation {
  double (*fn)(double);
  double (*dfn)(double);
};

/// Look up an activation by name; {relu, identity, tanh} are built in and
/// further ones may be registered. Throws UnknownActivation.
const Activation& find_activation(const std::string& name);
void register_activation(const std::string& name, const Activation& act);

/// Discretized convolution g(W) = sum_{u,v} K(u,v,w) kappa(V_v)^T f(U_u),
/// divided by |W_w| when normalize is set. Channel counts chain m -> n.
/// Per output scalar the contributions are summed in ascending value order,
/// which makes the result independent of cell numbering (permuting U and
/// K's u-indices consistently changes nothing, bit for bit).
/// Throws ShapeMismatch (channel counts) and MissingCouplingTensor (K does
/// not match the partitions).
CellFunction conv_forward(const CellFunction& f, const KernelSpec& kernel,
                          const CouplingTensor& K,
                          std::shared_ptr<const Partition> output,
                          bool normalize);

/// Pointwise sigma per cell and channel.
CellFunction activation(const CellFunction& f, const std::string& sigma);

/// Average pooling g(W) = sum_v |V_v ∩ W_w| f(V_v), divided by |W_w| when
/// normalize is set. Normalized weights within 1e-12 of 1 are snapped to 1
/// so that pooling between identical partitions is exactly the identity.
CellFunction pool_forward(const CellFunction& f, const OverlapMatrix& overlaps,
                          std::shared_ptr<const Partition> output,
                          bool normalize);

/// Per-cell matrix application g = M^T f. Throws ShapeMismatch.
CellFunction mixup(const CellFunction& f, const Eigen::MatrixXd& M);

/// Channelwise concatenation; both arguments must reference the same
/// partition object. Throws PartitionMismatch.
CellFunction concat(const CellFunction& f, const CellFunction& g);

/// Compute any coupling tensors / overlap matrices the network needs that
/// are not in the cache yet (keyed by layer index).
void ensure_tensors(const NetworkSpec& net, const CellFunction& input,
                    TensorCache& cache, int threads = 0);

/// Sequential forward pass. Layer errors are rethrown with the layer index
/// prefixed. When intermediates is non-null it receives every layer output
/// (which concat partners and the backward pass reference by index).
CellFunction forward(const NetworkSpec& net, const CellFunction& input,
                     TensorCache& cache,
                     std::vector<CellFunction>* intermediates = nullptr);

/// Reverse-mode gradients for a scalar loss, treating all coupling and
/// overlap volumes as constants. kernel[i] is non-empty only for conv
/// layers (one matrix per kernel cell); mix[i] is non-empty only for mixup
/// layers.
struct Gradients {
  std::vector<std::vector<Eigen::MatrixXd>> kernel;  // per layer, per cell
  std::vector<Eigen::MatrixXd> mix;                  // per layer
  Eigen::MatrixXd input;                             // d loss / d input values
};

Gradients backward_params(const NetworkSpec& net, const CellFunction& input,
                          const Eigen::MatrixXd& upstream, TensorCache& cache);

}  // namespace vcnn

#endif  // VCNN_NETWORK_HPP
