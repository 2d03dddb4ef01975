#include "ftp/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ftp/errors.hpp"

namespace ftp::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// sign(x) (1 - e) / (1 + e) with e = exp(-2|x|); absolute error within 1 ulp of 1.
template <typename M>
void tanh_inplace(M& z) {
  auto x = z.array();
  const auto e = (-2.0 * x.abs()).exp().eval();
  x = ((1.0 - e) / (1.0 + e)) * x.sign();
}

}  // namespace

MatrixXd init_orthogonal(int rows, int cols, double gain, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const bool wide = rows < cols;
  const int r = wide ? cols : rows, c = wide ? rows : cols;
  MatrixXd g(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) g(i, j) = n(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(r, c);
  const MatrixXd R = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (R(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return gain * (wide ? MatrixXd(q.transpose()) : q);
}

Mlp::Mlp(std::vector<int> sizes, std::vector<Activation> activations)
    : sizes_(std::move(sizes)), activations_(std::move(activations)) {
  if (sizes_.size() < 2 || activations_.size() != sizes_.size() - 1) {
    throw ShapeMismatch("network needs one activation per layer");
  }
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw ShapeMismatch("layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  params_ = VectorXd::Zero(total);
}

Mlp Mlp::three_hidden(int in, int out, int hidden, bool tanh_third) {
  return Mlp({in, hidden, hidden, hidden, out},
             {Activation::Tanh, Activation::Tanh, tanh_third ? Activation::Tanh : Activation::Linear,
              Activation::Linear});
}

Eigen::Map<RowMatrix> Mlp::weight(int l) {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const RowMatrix> Mlp::weight(int l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<VectorXd> Mlp::bias(int l) {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<const VectorXd> Mlp::bias(int l) const {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

void Mlp::init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
  for (int l = 0; l < layer_count(); ++l) {
    const double gain = l + 1 == layer_count() ? output_gain : hidden_gain;
    weight(l) = nn::init_orthogonal(sizes_[l + 1], sizes_[l], gain, rng);
    bias(l).setZero();
  }
}

VectorXd Mlp::forward(const VectorXd& x) const {
  if (x.size() != input_dim()) throw ShapeMismatch("network input has the wrong length");
  VectorXd a = x;
  for (int l = 0; l < layer_count(); ++l) {
    VectorXd z = weight(l) * a + bias(l);
    if (activations_[l] == Activation::Tanh) tanh_inplace(z);
    a = std::move(z);
  }
  return a;
}

MatrixXd Mlp::forward_batch(const MatrixXd& X, ForwardCache* cache) const {
  if (X.rows() != input_dim()) throw ShapeMismatch("network input has the wrong length");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(X);
  }
  MatrixXd a = X;
  for (int l = 0; l < layer_count(); ++l) {
    MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (activations_[l] == Activation::Tanh) tanh_inplace(z);
    if (cache) cache->activations.push_back(z);
    a = std::move(z);
  }
  return a;
}

MatrixXd Mlp::backward(const ForwardCache& cache, const MatrixXd& dY, VectorXd& grad) const {
  if (grad.size() != parameter_count()) throw ShapeMismatch("gradient buffer has the wrong length");
  if (static_cast<int>(cache.activations.size()) != layer_count() + 1) {
    throw ShapeMismatch("forward cache does not match the network");
  }
  MatrixXd delta = dY;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const MatrixXd& out = cache.activations[l + 1];
    if (activations_[l] == Activation::Tanh) delta.array() *= 1.0 - out.array().square();
    const MatrixXd& in = cache.activations[l];
    Eigen::Map<RowMatrix> gW(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<VectorXd> gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l],
                            sizes_[l + 1]);
    gW.noalias() += delta * in.transpose();
    gb += delta.rowwise().sum();
    delta = weight(l).transpose() * delta;
  }
  return delta;
}

double log_prob(const VectorXd& mean, const VectorXd& log_std, const VectorXd& a, VectorXd* per_dim) {
  if (mean.size() != a.size() || log_std.size() != a.size()) throw ShapeMismatch("log_prob dimensions differ");
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  const VectorXd z = ((a - mean).array() / log_std.array().exp()).matrix();
  const VectorXd terms = (-0.5 * z.array().square() - log_std.array() - kHalfLog2Pi).matrix();
  if (per_dim) *per_dim = terms;
  return terms.sum();
}

GaussianPolicy GaussianPolicy::make(int state_dim, int action_dim, Rng& rng, int hidden, bool tanh_third,
                                    double initial_log_std) {
  GaussianPolicy p;
  p.mean = Mlp::three_hidden(state_dim, action_dim, hidden, tanh_third);
  p.mean.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  p.log_std = VectorXd::Constant(action_dim, initial_log_std);
  return p;
}

VectorXd GaussianPolicy::sample(const VectorXd& state, Rng& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXd a = mean.forward(state);
  for (Eigen::Index d = 0; d < a.size(); ++d) a[d] += std::exp(log_std[d]) * n(rng);
  return a;
}

double GaussianPolicy::log_prob(const VectorXd& state, const VectorXd& a) const {
  return nn::log_prob(mean.forward(state), log_std, a);
}

ValueNet ValueNet::make(int state_dim, Rng& rng, int hidden, bool tanh_third) {
  ValueNet v;
  v.net = Mlp::three_hidden(state_dim, 1, hidden, tanh_third);
  v.net.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  return v;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(VectorXd::Zero(size)), v_(VectorXd::Zero(size)) {}

void Adam::step(Eigen::Ref<VectorXd> params, const VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeMismatch("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

// --- checkpoints ---------------------------------------------------------

std::vector<NamedTensor> to_tensors(const Mlp& net, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (int l = 0; l < net.layer_count(); ++l) {
    out.push_back({prefix + "." + std::to_string(l) + ".weight", net.weight(l)});
    out.push_back({prefix + "." + std::to_string(l) + ".bias", RowMatrix(net.bias(l))});
  }
  return out;
}

void from_tensors(Mlp& net, const std::string& prefix, const std::vector<NamedTensor>& tensors) {
  auto find = [&](const std::string& name) -> const RowMatrix& {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw ShapeMismatch("checkpoint lacks tensor " + name);
  };
  for (int l = 0; l < net.layer_count(); ++l) {
    const RowMatrix& w = find(prefix + "." + std::to_string(l) + ".weight");
    const RowMatrix& b = find(prefix + "." + std::to_string(l) + ".bias");
    if (w.rows() != net.weight(l).rows() || w.cols() != net.weight(l).cols() || b.size() != net.bias(l).size()) {
      throw ShapeMismatch("checkpoint tensor shape differs for layer " + std::to_string(l));
    }
    net.weight(l) = w;
    net.bias(l) = Eigen::Map<const VectorXd>(b.data(), b.size());
  }
}

namespace {

constexpr char kMagic[8] = {'F', 'T', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.cols()));
  }
  for (const auto& t : tensors) {
    os.write(reinterpret_cast<const char*>(t.value.data()),
             static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is);
  std::vector<NamedTensor> out(count);
  for (auto& t : out) {
    const auto len = get<std::uint32_t>(is);
    t.name.resize(len);
    is.read(t.name.data(), len);
    const auto rows = get<std::uint32_t>(is);
    const auto cols = get<std::uint32_t>(is);
    t.value.resize(rows, cols);
  }
  for (auto& t : out) {
    is.read(reinterpret_cast<char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint " + path.string());
  }
  return out;
}

}  // namespace ftp::nn
