#include "reachabc/surrogate.hpp"

#include "reachabc/codec.hpp"

#include <nlohmann/json.hpp>

#if defined(__SSE__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace reachabc {

SurrogateNet::SurrogateNet()
    : net_(kSurrogateLayers), input_min_(-0.65, 0.05, -0.05), input_max_(0.65, 0.75, 0.05) {}

SurrogateNet::SurrogateNet(Network net, Vec3 input_min, Vec3 input_max, std::uint64_t seed)
    : net_(std::move(net)), input_min_(input_min), input_max_(input_max), seed_(seed) {
  if (net_.inputs() != 3 || net_.outputs() % 3 != 0) {
    throw Error(ErrorCode::shape_mismatch, "surrogate must map 3 inputs to 3*points outputs");
  }
  if (!((input_max_ - input_min_).array() > 0.0).all()) {
    throw Error(ErrorCode::parameter, "surrogate input range must be non-degenerate");
  }
}

SurrogateNet::Network::Matrix SurrogateNet::normalise(std::span<const Vec3> targets) const {
  Network::Matrix x(static_cast<Eigen::Index>(targets.size()), 3);
  const Vec3 centre = 0.5 * (input_min_ + input_max_);
  const Vec3 half = 0.5 * (input_max_ - input_min_);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      x(static_cast<Eigen::Index>(i), a) = static_cast<float>((targets[i][a] - centre[a]) / half[a]);
    }
  }
  return x;
}

void SurrogateNet::check_finite() const {
  if (!net_.all_finite()) throw Error(ErrorCode::corrupt_model, "surrogate has non-finite parameters");
}

Trajectory SurrogateNet::forward(const Vec3& target) const {
  return batch_forward(std::span<const Vec3>(&target, 1)).front();
}

namespace {

// Trained weights drive some activations subnormal; flushing them to zero
// for the duration of a batch keeps the GEMMs at full speed.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned int saved_ = 0;
};

}  // namespace

void SurrogateNet::batch_forward_flat(std::span<const Vec3> targets, std::span<float> out) const {
  check_finite();
  const FlushDenormals ftz;
  if (out.size() != targets.size() * static_cast<std::size_t>(net_.outputs())) {
    throw Error(ErrorCode::shape_mismatch, "output buffer has the wrong size");
  }
  if (targets.empty()) return;
  net_.forward_into(normalise(targets), out.data());
}

std::vector<Trajectory> SurrogateNet::batch_forward(std::span<const Vec3> targets) const {
  std::vector<float> flat(targets.size() * static_cast<std::size_t>(net_.outputs()));
  batch_forward_flat(targets, flat);
  const int n = points();
  std::vector<Trajectory> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out[i].dt = dt();
    out[i].points.reserve(n);
    const float* row = flat.data() + i * 3 * n;
    for (int k = 0; k < n; ++k) out[i].points.emplace_back(row[3 * k], row[3 * k + 1], row[3 * k + 2]);
  }
  return out;
}

namespace {

std::vector<std::uint8_t> layer_bytes(const SurrogateNet::Network::Layer& l) {
  auto w = codec::pack_f32(std::span<const float>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
  const auto b = codec::pack_f32(std::span<const float>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

}  // namespace

std::string SurrogateNet::weights_hash() const {
  std::vector<std::uint8_t> all;
  for (const auto& l : net_.layers()) {
    const auto bytes = layer_bytes(l);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return codec::sha256_hex(all);
}

double mean_point_error(const SurrogateNet& net, const TrajectoryDataset& data, std::span<const std::size_t> records) {
  if (records.empty()) return 0.0;
  constexpr std::size_t kChunk = 1024;
  const std::size_t stride = 3 * data.points_per_trajectory;
  double total = 0.0;
  std::vector<Vec3> targets;
  std::vector<float> out;
  for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
    const std::size_t end = std::min(records.size(), begin + kChunk);
    targets.clear();
    for (std::size_t i = begin; i < end; ++i) targets.push_back(data.target(records[i]));
    out.assign(targets.size() * stride, 0.0f);
    net.batch_forward_flat(targets, out);
    for (std::size_t i = begin; i < end; ++i) {
      const auto truth = data.record_points(records[i]);
      const float* pred = out.data() + (i - begin) * stride;
      for (std::size_t k = 0; k < data.points_per_trajectory; ++k) {
        const double dx = pred[3 * k] - truth[3 * k];
        const double dy = pred[3 * k + 1] - truth[3 * k + 1];
        const double dz = pred[3 * k + 2] - truth[3 * k + 2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    }
  }
  return total / static_cast<double>(records.size() * data.points_per_trajectory);
}

namespace {

using Matrix = SurrogateNet::Network::Matrix;
using Layer = SurrogateNet::Network::Layer;

Matrix gather_rows(const std::vector<float>& flat, std::size_t width, std::span<const std::size_t> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(flat.data() + rows[r] * width, width, m.row(static_cast<Eigen::Index>(r)).data());
  }
  return m;
}

std::vector<Layer> zeros_like(const std::vector<Layer>& layers) {
  std::vector<Layer> z;
  for (const Layer& l : layers) z.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), SurrogateNet::Network::RowVector::Zero(l.bias.size())});
  return z;
}

class Stepper {
 public:
  Stepper(const TrainConfig& c, const std::vector<Layer>& shape)
      : config_(c), first_(zeros_like(shape)), second_(zeros_like(shape)) {}

  void apply(std::vector<Layer>& params, const std::vector<Layer>& grad) {
    ++t_;
    const float lr = static_cast<float>(config_.learning_rate);
    if (config_.optimizer == Optimizer::sgd_momentum) {
      const float mu = static_cast<float>(config_.momentum);
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i].weight = mu * first_[i].weight + grad[i].weight;
        first_[i].bias = mu * first_[i].bias + grad[i].bias;
        params[i].weight -= lr * first_[i].weight;
        params[i].bias -= lr * first_[i].bias;
      }
      return;
    }
    constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    const float c1 = 1.0f - std::pow(b1, static_cast<float>(t_));
    const float c2 = 1.0f - std::pow(b2, static_cast<float>(t_));
    const float step = lr * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < params.size(); ++i) {
      update(params[i].weight, first_[i].weight, second_[i].weight, grad[i].weight, step, b1, b2, eps);
      update(params[i].bias, first_[i].bias, second_[i].bias, grad[i].bias, step, b1, b2, eps);
    }
  }

 private:
  template <class M>
  static void update(M& p, M& m, M& v, const M& g, float step, float b1, float b2, float eps) {
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    p.array() -= step * m.array() / (v.array().sqrt() + eps);
  }

  const TrainConfig& config_;
  std::vector<Layer> first_;
  std::vector<Layer> second_;
  long t_ = 0;
};

}  // namespace

TrainResult train(const TrajectoryDataset& data, const TrainConfig& config, bool allow_small) {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = data.count();
  if (n < 1000 && !allow_small) {
    throw Error(ErrorCode::parameter, "training needs at least 1,000 records, have " + std::to_string(n));
  }
  if (n < 2) throw Error(ErrorCode::parameter, "training needs at least 2 records");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::parameter, "invalid training configuration");
  }
  const std::size_t width = 3 * data.points_per_trajectory;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t train_count =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config.train_fraction * n)), 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  const std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());

  // Input box from the training targets; a flat axis (all targets at table
  // height) gets a unit-width box so the mapping stays invertible.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i : train_idx) {
    lo = lo.cwiseMin(data.target(i));
    hi = hi.cwiseMax(data.target(i));
  }
  for (int a = 0; a < 3; ++a) {
    if (hi[a] - lo[a] < 1e-6) {
      lo[a] -= 0.05;
      hi[a] += 0.05;
    }
  }

  std::vector<int> sizes{3, 32, 64, static_cast<int>(width)};
  SurrogateNet::Network net(sizes);
  net.initialise(rng);
  // Start the output layer at the mean training trajectory.
  Eigen::Matrix<double, 1, Eigen::Dynamic> mean = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(static_cast<Eigen::Index>(width));
  for (std::size_t i : train_idx) {
    const auto p = data.record_points(i);
    for (std::size_t k = 0; k < width; ++k) mean[static_cast<Eigen::Index>(k)] += p[k];
  }
  net.layers().back().bias = (mean / static_cast<double>(train_count)).cast<float>();

  SurrogateNet model(std::move(net), lo, hi, config.seed);
  std::vector<Vec3> train_targets;
  for (std::size_t i : train_idx) train_targets.push_back(data.target(i));
  const Matrix x_train = model.normalise(train_targets);
  std::vector<float> targets_flat(data.points.begin(), data.points.end());

  const double per_point = 3.0;  // element-mean loss -> squared metres per point
  auto full_loss = [&](std::span<const std::size_t> idx) {
    std::vector<Vec3> t;
    for (std::size_t i : idx) t.push_back(data.target(i));
    const Matrix y = gather_rows(data.points, width, idx);
    return per_point * static_cast<double>(model.network().loss(model.normalise(t), y));
  };

  TrainReport report;
  report.seed = config.seed;
  report.train_fraction = config.train_fraction;
  report.test_fraction = 1.0 - config.train_fraction;
  report.train_count = train_count;
  report.test_count = test_idx.size();
  report.initial_loss = full_loss(train_idx);

  Stepper stepper(config, model.network().layers());
  std::vector<Layer> grad;
  std::vector<std::size_t> batch_order(train_count);
  std::iota(batch_order.begin(), batch_order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < train_count; begin += bs) {
      const std::size_t end = std::min(train_count, begin + bs);
      Matrix xb(static_cast<Eigen::Index>(end - begin), 3);
      std::vector<std::size_t> rows;
      rows.reserve(end - begin);
      for (std::size_t r = begin; r < end; ++r) {
        xb.row(static_cast<Eigen::Index>(r - begin)) = x_train.row(static_cast<Eigen::Index>(batch_order[r]));
        rows.push_back(train_idx[batch_order[r]]);
      }
      const Matrix yb = gather_rows(data.points, width, rows);
      const float loss = model.network().loss_and_gradient(xb, yb, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::training_divergence, "training loss diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += per_point * loss * static_cast<double>(end - begin);
      seen += end - begin;
      stepper.apply(model.network().layers(), grad);
    }
    epoch_loss /= static_cast<double>(seen);
    if (epoch == 1) report.first_epoch_loss = full_loss(train_idx);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
    report.epochs = epoch;
  }
  if (!model.network().all_finite()) {
    throw Error(ErrorCode::training_divergence, "training produced non-finite parameters");
  }
  report.train_loss = full_loss(train_idx);
  report.test_loss = full_loss(test_idx);
  report.test_mean_point_error = mean_point_error(model, data, test_idx);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(model), report};
}

void save_weights(const SurrogateNet& net, const std::filesystem::path& path) {
  nlohmann::json j;
  j["magic"] = "ISUR";
  j["version"] = kWeightsVersion;
  nlohmann::json shapes = nlohmann::json::array();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.network().layers()) {
    shapes.push_back({l.weight.rows(), l.weight.cols()});
    const auto w = codec::pack_f32(std::span<const float>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
    const auto b = codec::pack_f32(std::span<const float>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
    layers.push_back({{"weight", codec::base64_encode(w)}, {"bias", codec::base64_encode(b)}});
  }
  j["shapes"] = shapes;
  j["normalization"] = {
      {"input", "affine to [-1,1]"},
      {"input_min", {net.input_min().x(), net.input_min().y(), net.input_min().z()}},
      {"input_max", {net.input_max().x(), net.input_max().y(), net.input_max().z()}},
      {"output", "metres"},
      {"points", net.points()},
      {"dt", net.dt()},
  };
  j["activation"] = {{"hidden", "relu"}, {"output", "identity"}};
  j["seed"] = net.seed();
  j["sha256"] = net.weights_hash();
  j["layers"] = layers;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  os << j.dump(1) << '\n';
  if (!os) throw Error(ErrorCode::io, "failed writing " + path.string());
}

SurrogateNet load_weights(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::truncated, "weights file is not complete JSON: " + std::string(e.what()));
  }
  try {
    if (!j.is_object() || j.value("magic", std::string()) != "ISUR") {
      throw Error(ErrorCode::bad_magic, path.string() + " is not an ISUR weights file");
    }
    if (j.at("version").get<int>() != kWeightsVersion) {
      throw Error(ErrorCode::shape_mismatch, "unsupported weights version");
    }
    const auto& shapes = j.at("shapes");
    const auto& blobs = j.at("layers");
    if (shapes.size() != kSurrogateLayers.size() - 1 || blobs.size() != shapes.size()) {
      throw Error(ErrorCode::shape_mismatch, "weights file has the wrong number of layers");
    }
    std::vector<int> sizes{shapes[0][0].get<int>()};
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (i > 0 && shapes[i][0].get<int>() != sizes.back()) {
        throw Error(ErrorCode::shape_mismatch, "layer shapes do not chain");
      }
      sizes.push_back(shapes[i][1].get<int>());
    }
    if (sizes != kSurrogateLayers) throw Error(ErrorCode::shape_mismatch, "layer shapes differ from 3-32-64-270");
    SurrogateNet::Network network(sizes);
    for (std::size_t i = 0; i < blobs.size(); ++i) {
      auto& layer = network.layers()[i];
      const auto w = codec::unpack_f32(codec::base64_decode(blobs[i].at("weight").get<std::string>()));
      const auto b = codec::unpack_f32(codec::base64_decode(blobs[i].at("bias").get<std::string>()));
      if (w.size() != static_cast<std::size_t>(layer.weight.size()) ||
          b.size() != static_cast<std::size_t>(layer.bias.size())) {
        throw Error(ErrorCode::truncated, "layer " + std::to_string(i) + " blob has the wrong length");
      }
      std::copy(w.begin(), w.end(), layer.weight.data());
      std::copy(b.begin(), b.end(), layer.bias.data());
    }
    const auto& norm = j.at("normalization");
    const auto lo = norm.at("input_min").get<std::vector<double>>();
    const auto hi = norm.at("input_max").get<std::vector<double>>();
    if (lo.size() != 3 || hi.size() != 3) throw Error(ErrorCode::shape_mismatch, "normalization needs 3 entries");
    SurrogateNet net(std::move(network), Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2]),
                     j.value("seed", std::uint64_t{0}));
    if (!net.network().all_finite()) throw Error(ErrorCode::corrupt_model, "weights contain non-finite values");
    if (net.weights_hash() != j.at("sha256").get<std::string>()) {
      throw Error(ErrorCode::corrupt_model, "weights hash does not match the recorded sha256");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::shape_mismatch, std::string("malformed weights file: ") + e.what());
  }
}

}  // namespace reachabc
