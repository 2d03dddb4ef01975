#pragma once
/**
 * Small fully connected networks with hand-written reverse mode, enough for
 * a Gaussian actor and a scalar critic.
 *
 * Parameters of a network live in one flat vector; layer l occupies its
 * weight matrix (out x in, row-major) followed by its bias. Batches are
 * matrices with one sample per column.
 */

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ftp::nn {

using Rng = std::mt19937_64;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Tanh, Linear };

/// Orthogonal matrix (rows x cols) scaled by gain, from the QR factors of a
/// Gaussian matrix with the signs of R's diagonal folded into Q.
Eigen::MatrixXd init_orthogonal(int rows, int cols, double gain, Rng& rng);

/// Activations kept by a batched forward pass for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // input, then every layer output
};

class Mlp {
 public:
  Mlp() = default;
  /// sizes = {in, h1, ..., out}; one activation per layer.
  Mlp(std::vector<int> sizes, std::vector<Activation> activations);

  /// in -> hidden -> hidden -> hidden -> out; the third hidden layer is tanh
  /// or linear by `tanh_third`; the output layer is linear.
  static Mlp three_hidden(int in, int out, int hidden = 256, bool tanh_third = true);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  Eigen::Map<RowMatrix> weight(int layer);
  Eigen::Map<const RowMatrix> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  /// Orthogonal weights (hidden_gain for hidden layers, output_gain for the
  /// last), zero biases.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain);

  /// Throws ShapeMismatch when x has the wrong length.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Batched; columns are samples. Fills `cache` when non-null.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X, ForwardCache* cache = nullptr) const;

  /// Adds dLoss/dparams to `grad` (sized parameter_count()) given dLoss/dY
  /// for the batch recorded in `cache`. Returns dLoss/dX.
  Eigen::MatrixXd backward(const ForwardCache& cache, const Eigen::MatrixXd& dY, Eigen::VectorXd& grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's weights
  Eigen::VectorXd params_;
};

/// Diagonal Gaussian log density, summed over dimensions. `per_dim` (when
/// non-null) receives the individual terms.
double log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, const Eigen::VectorXd& a,
                Eigen::VectorXd* per_dim = nullptr);

/// Gaussian policy with a state-independent, learnable log standard
/// deviation.
struct GaussianPolicy {
  Mlp mean;
  Eigen::VectorXd log_std;

  static GaussianPolicy make(int state_dim, int action_dim, Rng& rng, int hidden = 256, bool tanh_third = true,
                             double initial_log_std = 0.0);

  Eigen::VectorXd sample(const Eigen::VectorXd& state, Rng& rng) const;
  double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& a) const;
};

struct ValueNet {
  Mlp net;

  static ValueNet make(int state_dim, Rng& rng, int hidden = 256, bool tanh_third = true);
  double value(const Eigen::VectorXd& state) const { return net.forward(state)[0]; }
};

/// Adaptive-moment optimiser with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// params -= lr * mhat / (sqrt(vhat) + eps). Throws ShapeMismatch.
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

// --- checkpoints ---------------------------------------------------------

struct NamedTensor {
  std::string name;
  RowMatrix value;
};

/// Weights and biases of every layer, named "<prefix>.<layer>.weight|bias".
std::vector<NamedTensor> to_tensors(const Mlp& net, const std::string& prefix);
/// Inverse of to_tensors into a network of the same shape; throws
/// ShapeMismatch.
void from_tensors(Mlp& net, const std::string& prefix, const std::vector<NamedTensor>& tensors);

/// Binary layout: "FTPCKPT\0", uint32 version, uint32 tensor count, then per
/// tensor uint32 name length, name bytes, uint32 rows, uint32 cols; then the
/// values of every tensor in order as row-major float64.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

}  // namespace ftp::nn
