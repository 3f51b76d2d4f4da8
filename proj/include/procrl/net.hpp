#ifndef PROCRL_NET_HPP_
#define PROCRL_NET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "procrl/rng.hpp"

namespace procrl {

// Fully connected network: tanh on hidden layers, identity on the output.
// Layer l maps dims[l] inputs to dims[l+1] outputs with y = x W + b, where
// W is stored row-major as W[input][output]. All parameters live in one
// flat buffer laid out layer by layer as (W, b).
class DenseNet {
 public:
  DenseNet() = default;
  // Zero-initialized parameters.
  explicit DenseNet(std::vector<int> dims);
  // Uniform Glorot initialization, zero biases.
  static DenseNet glorot(std::vector<int> dims, Rng& rng);

  const std::vector<int>& dims() const { return dims_; }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> bias(int layer);
  std::span<const double> bias(int layer) const;

  // Offset of layer l's weights inside params().
  std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const;

  bool all_finite() const;

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    return a.dims_ == b.dims_ && a.params_ == b.params_;
  }

 private:
  std::vector<int> dims_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

// acts[0] is the input, acts[l + 1] the output of layer l after its
// activation; acts.back() is the network output.
struct ForwardCache {
  std::vector<std::vector<double>> acts;

  std::span<const double> output() const { return acts.back(); }
};

// Throws ShapeMismatch when |x| != input_dim().
void forward(const DenseNet& net, std::span<const double> x, ForwardCache& cache);
std::vector<double> forward(const DenseNet& net, std::span<const double> x);

// Reverse pass of output . grad_out. Parameter gradients are added into
// param_grads (size = params().size()). When input_grad is nonempty it
// receives d(output . grad_out)/dx.
void backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                         std::span<const double> grad_out,
                         std::span<double> param_grads,
                         std::span<double> input_grad = {});

struct BackwardResult {
  std::vector<double> param_grads;
  std::vector<double> input_grad;
};
BackwardResult backward(const DenseNet& net, const ForwardCache& cache,
                        std::span<const double> grad_out);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const DenseNet& net, AdamConfig cfg)
      : config(cfg), m(net.params().size(), 0.0), v(net.params().size(), 0.0) {}
};

void adam_step(DenseNet& net, std::span<const double> grads, AdamState& state);

// Scales grads in place so that their L2 norm is at most max_norm. Returns
// the norm before scaling.
double clip_grad_norm(std::span<double> grads, double max_norm);

// Maximum relative error between analytic and central-difference gradients
// of the test loss 0.5 * |output|^2 over every parameter. The relative error
// of one parameter is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;
double grad_check(const DenseNet& net, std::span<const double> x, double h);

// Checkpoint format: "PRCL" magic, u32 version, 8-byte role tag, u32 layer
// count + 1, u32 dims, then little-endian f64 parameters in layer order
// (weights row-major, then biases).
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const DenseNet& net, const std::string& role);
DenseNet deserialize_checkpoint(const std::string& bytes, std::string* role = nullptr);
void save_checkpoint(const std::filesystem::path& path, const DenseNet& net,
                     const std::string& role);
// When expected_role is nonempty the stored tag must match it.
DenseNet load_checkpoint(const std::filesystem::path& path,
                         const std::string& expected_role = {});

}  // namespace procrl

#endif  // PROCRL_NET_HPP_
