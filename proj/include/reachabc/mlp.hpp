#pragma once

// Fully connected ReLU network with a linear output layer, templated on the
// scalar so the same layer code runs in float for inference and in double for
// gradient checking.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace reachabc {

template <class Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct Layer {
    Matrix weight;  // fan_in x fan_out, row-major
    RowVector bias;
  };

  Mlp() = default;

  explicit Mlp(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      layers_.push_back({Matrix::Zero(sizes[i], sizes[i + 1]), RowVector::Zero(sizes[i + 1])});
    }
  }

  std::size_t depth() const { return layers_.size(); }
  int inputs() const { return static_cast<int>(layers_.front().weight.rows()); }
  int outputs() const { return static_cast<int>(layers_.back().weight.cols()); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const Layer& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  // He-uniform weights, zero biases.
  template <class Urng>
  void initialise(Urng& rng) {
    for (Layer& l : layers_) {
      const Scalar bound = std::sqrt(Scalar(6) / static_cast<Scalar>(l.weight.rows()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = static_cast<Scalar>(u(rng));
      l.bias.setZero();
    }
  }

  // One row per sample.
  Matrix forward(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix next = h * layers_[i].weight;
      next.rowwise() += layers_[i].bias;
      if (i + 1 < layers_.size()) next = next.cwiseMax(Scalar(0));
      h = std::move(next);
    }
    return h;
  }

  // Writes rows of the output into `out` (rows x outputs, row-major). Rows
  // are pushed through in blocks so the hidden activations stay in cache;
  // biases are broadcast first and the products accumulate onto them.
  void forward_into(const Matrix& x, Scalar* out, Eigen::Index block = 2048) const {
    const Eigen::Index rows = x.rows();
    Eigen::Map<Matrix> y(out, rows, outputs());
    std::vector<Matrix> hidden;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      hidden.emplace_back(std::min(block, rows), layers_[i].weight.cols());
    }
    for (Eigen::Index r = 0; r < rows; r += block) {
      const Eigen::Index n = std::min(block, rows - r);
      const std::size_t last = layers_.size() - 1;
      for (std::size_t i = 0; i < last; ++i) {
        auto dst = hidden[i].topRows(n);
        dst.rowwise() = layers_[i].bias;
        if (i == 0) {
          dst.noalias() += x.middleRows(r, n) * layers_[i].weight;
        } else {
          dst.noalias() += hidden[i - 1].topRows(n) * layers_[i].weight;
        }
        dst = dst.cwiseMax(Scalar(0));
      }
      auto dst = y.middleRows(r, n);
      dst.rowwise() = layers_[last].bias;
      if (last == 0) {
        dst.noalias() += x.middleRows(r, n) * layers_[last].weight;
      } else {
        dst.noalias() += hidden[last - 1].topRows(n) * layers_[last].weight;
      }
    }
  }

  // Mean over all output elements of the squared error; fills `grad` with
  // d loss / d parameter (same layout as the network).
  Scalar loss_and_gradient(const Matrix& x, const Matrix& y, std::vector<Layer>& grad) const {
    const std::size_t n = layers_.size();
    std::vector<Matrix> act(n + 1);
    act[0] = x;
    for (std::size_t i = 0; i < n; ++i) {
      Matrix z = act[i] * layers_[i].weight;
      z.rowwise() += layers_[i].bias;
      act[i + 1] = (i + 1 < n) ? Matrix(z.cwiseMax(Scalar(0))) : z;
    }
    const Matrix diff = act[n] - y;
    const Scalar scale = Scalar(1) / static_cast<Scalar>(diff.size());
    const Scalar loss = diff.squaredNorm() * scale;

    grad.resize(n);
    Matrix delta = Scalar(2) * scale * diff;
    for (std::size_t i = n; i-- > 0;) {
      grad[i].weight.noalias() = act[i].transpose() * delta;
      grad[i].bias = delta.colwise().sum();
      if (i > 0) {
        Matrix back = delta * layers_[i].weight.transpose();
        delta = back.cwiseProduct((act[i].array() > Scalar(0)).template cast<Scalar>().matrix());
      }
    }
    return loss;
  }

  Scalar loss(const Matrix& x, const Matrix& y) const {
    return (forward(x) - y).squaredNorm() / static_cast<Scalar>(y.size());
  }

 private:
  std::vector<Layer> layers_;
};

}  // namespace reachabc
