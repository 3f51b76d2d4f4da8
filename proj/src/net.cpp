#include "procrl/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"

namespace procrl {
namespace {

constexpr char kMagic[4] = {'P', 'R', 'C', 'L'};
constexpr std::size_t kRoleBytes = 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t take(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) {
      throw FormatError("truncated checkpoint");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::string take_bytes(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

DenseNet::DenseNet(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ShapeMismatch("a network needs at least one layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] <= 0 || dims_[l + 1] <= 0) {
      throw ShapeMismatch("layer dimensions must be positive");
    }
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l + 1]) +
              static_cast<std::size_t>(dims_[l + 1]);
  }
  params_.assign(offset, 0.0);
}

DenseNet DenseNet::glorot(std::vector<int> dims, Rng& rng) {
  DenseNet net(std::move(dims));
  for (int l = 0; l < net.num_layers(); ++l) {
    const double fan = net.dims_[static_cast<std::size_t>(l)] + net.dims_[static_cast<std::size_t>(l) + 1];
    const double limit = std::sqrt(6.0 / fan);
    for (double& w : net.weights(l)) w = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  return net;
}

std::size_t DenseNet::bias_offset(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return offsets_[l] + static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l + 1]);
}

std::span<double> DenseNet::weights(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return std::span(params_).subspan(offsets_[l], static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l + 1]));
}

std::span<const double> DenseNet::weights(int layer) const {
  return const_cast<DenseNet*>(this)->weights(layer);
}

std::span<double> DenseNet::bias(int layer) {
  return std::span(params_).subspan(bias_offset(layer), static_cast<std::size_t>(dims_[static_cast<std::size_t>(layer) + 1]));
}

std::span<const double> DenseNet::bias(int layer) const {
  return const_cast<DenseNet*>(this)->bias(layer);
}

bool DenseNet::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
}

void forward(const DenseNet& net, std::span<const double> x, ForwardCache& cache) {
  if (static_cast<int>(x.size()) != net.input_dim()) {
    throw ShapeMismatch("input has " + std::to_string(x.size()) + " features, network expects " +
                        std::to_string(net.input_dim()));
  }
  const int layers = net.num_layers();
  cache.acts.resize(static_cast<std::size_t>(layers) + 1);
  cache.acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < layers; ++l) {
    const auto& in = cache.acts[static_cast<std::size_t>(l)];
    auto& out = cache.acts[static_cast<std::size_t>(l) + 1];
    const auto n_out = static_cast<std::size_t>(net.dims()[static_cast<std::size_t>(l) + 1]);
    const auto bias = net.bias(l);
    const double* w = net.weights(l).data();
    out.assign(bias.begin(), bias.end());
    double* y = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* row = w + i * n_out;
      for (std::size_t o = 0; o < n_out; ++o) y[o] += xi * row[o];
    }
    if (l + 1 < layers) {
      for (double& v : out) v = std::tanh(v);
    }
  }
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
  ForwardCache cache;
  forward(net, x, cache);
  return std::move(cache.acts.back());
}

void backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                         std::span<const double> grad_out,
                         std::span<double> param_grads,
                         std::span<double> input_grad) {
  const int layers = net.num_layers();
  if (cache.acts.size() != static_cast<std::size_t>(layers) + 1 ||
      static_cast<int>(grad_out.size()) != net.output_dim() ||
      param_grads.size() != net.params().size() ||
      (!input_grad.empty() && static_cast<int>(input_grad.size()) != net.input_dim())) {
    throw ShapeMismatch("backward arguments do not match the network");
  }
  std::vector<double> g(grad_out.begin(), grad_out.end());
  std::vector<double> g_in;
  for (int l = layers - 1; l >= 0; --l) {
    const auto& in = cache.acts[static_cast<std::size_t>(l)];
    const auto n_out = g.size();
    const double* w = net.weights(l).data();
    double* dw = param_grads.data() + net.weight_offset(l);
    double* db = param_grads.data() + net.bias_offset(l);
    for (std::size_t o = 0; o < n_out; ++o) db[o] += g[o];
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      double* row = dw + i * n_out;
      for (std::size_t o = 0; o < n_out; ++o) row[o] += xi * g[o];
    }
    const bool need_input = l > 0 || !input_grad.empty();
    if (!need_input) break;
    g_in.assign(in.size(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double* row = w + i * n_out;
      double s = 0.0;
      for (std::size_t o = 0; o < n_out; ++o) s += row[o] * g[o];
      g_in[i] = s;
    }
    if (l == 0) {
      std::copy(g_in.begin(), g_in.end(), input_grad.begin());
      break;
    }
    // Input of layer l is tanh output of layer l - 1.
    for (std::size_t i = 0; i < in.size(); ++i) g_in[i] *= 1.0 - in[i] * in[i];
    g.swap(g_in);
  }
}

BackwardResult backward(const DenseNet& net, const ForwardCache& cache,
                        std::span<const double> grad_out) {
  BackwardResult r;
  r.param_grads.assign(net.params().size(), 0.0);
  r.input_grad.assign(static_cast<std::size_t>(net.input_dim()), 0.0);
  backward_accumulate(net, cache, grad_out, r.param_grads, r.input_grad);
  return r;
}

void adam_step(DenseNet& net, std::span<const double> grads, AdamState& state) {
  auto params = net.params();
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeMismatch("Adam state and gradients must match the parameters");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

double grad_check(const DenseNet& net, std::span<const double> x, double h) {
  ForwardCache cache;
  forward(net, x, cache);
  const std::vector<double> out(cache.output().begin(), cache.output().end());
  const BackwardResult analytic = backward(net, cache, out);

  auto loss = [&](const DenseNet& n) {
    const auto y = forward(n, x);
    double s = 0.0;
    for (double v : y) s += v * v;
    return 0.5 * s;
  };

  DenseNet probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.params().size(); ++i) {
    const double saved = probe.params()[i];
    probe.params()[i] = saved + h;
    const double up = loss(probe);
    probe.params()[i] = saved - h;
    const double down = loss(probe);
    probe.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.param_grads[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

std::string serialize_checkpoint(const DenseNet& net, const std::string& role) {
  if (role.size() > kRoleBytes) throw FormatError("role tag longer than 8 bytes");
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  std::string tag = role;
  tag.resize(kRoleBytes, '\0');
  out += tag;
  put_u32(out, static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double p : net.params()) put_f64(out, p);
  return out;
}

DenseNet deserialize_checkpoint(const std::string& bytes, std::string* role) {
  Reader r(bytes);
  if (r.take_bytes(4) != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto version = r.take(4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string tag = r.take_bytes(kRoleBytes);
  tag.erase(std::find(tag.begin(), tag.end(), '\0'), tag.end());
  const auto n_dims = r.take(4);
  if (n_dims < 2 || n_dims > 64) throw FormatError("implausible layer count");
  std::vector<int> dims;
  for (std::uint64_t i = 0; i < n_dims; ++i) dims.push_back(static_cast<int>(r.take(4)));
  DenseNet net(dims);
  for (double& p : net.params()) p = std::bit_cast<double>(r.take(8));
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  if (role != nullptr) *role = tag;
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const DenseNet& net,
                     const std::string& role) {
  write_file(path, serialize_checkpoint(net, role));
}

DenseNet load_checkpoint(const std::filesystem::path& path,
                         const std::string& expected_role) {
  std::string role;
  DenseNet net = deserialize_checkpoint(read_file(path), &role);
  if (!expected_role.empty() && role != expected_role) {
    throw FormatError(path.string() + " holds a '" + role + "' checkpoint, expected '" +
                      expected_role + "'");
  }
  return net;
}

}  // namespace procrl
