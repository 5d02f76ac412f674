#include "reachabc/priors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <numeric>

namespace reachabc {

Gaussian2::Gaussian2(const Vec2& mean, const Mat2& cov) : mean_(mean), cov_(cov) {
  if (!mean.allFinite() || !cov.allFinite()) {
    throw Error(ErrorCode::parameter, "Gaussian parameters must be finite");
  }
  if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::parameter, "covariance is not symmetric");
  }
  Eigen::LLT<Mat2> llt(cov);
  const double det = cov.determinant();
  if (llt.info() != Eigen::Success || !(cov(0, 0) > 0.0) || !(det > 0.0)) {
    throw Error(ErrorCode::parameter, "covariance is not positive-definite");
  }
  chol_ = llt.matrixL();
  precision_ = cov.inverse();
  norm_ = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
}

double Gaussian2::density(const Vec2& z) const {
  const Vec2 d = z - mean_;
  return norm_ * std::exp(-0.5 * d.dot(precision_ * d));
}

Vec2 Gaussian2::sample(Rng& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng);
  const double b = n(rng);
  return mean_ + chol_ * Vec2(a, b);
}

const char* to_string(PriorVariant v) {
  switch (v) {
    case PriorVariant::proximity: return "proximity";
    case PriorVariant::gaze: return "gaze";
    case PriorVariant::objects: return "objects";
    case PriorVariant::mixture: return "mixture";
  }
  return "unknown";
}

namespace {

std::vector<double> normalised(std::vector<double> w) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::parameter, "weights must be finite and >= 0");
    total += x;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::parameter, "weights must not all be zero");
  for (double& x : w) x /= total;
  return w;
}

std::size_t pick(std::span<const double> weights, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  // Rounding left r above the last partial sum: take the last non-zero entry.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

PriorSpec PriorSpec::gaussian(PriorVariant variant, const Vec2& mean, const Mat2& cov) {
  PriorSpec p;
  p.variant_ = variant;
  p.components_.push_back({1.0, Gaussian2(mean, cov)});
  return p;
}

PriorSpec PriorSpec::gmm(std::vector<WeightedGaussian> components) {
  if (components.empty()) throw Error(ErrorCode::parameter, "mixture model needs a component");
  std::vector<double> w;
  for (const auto& c : components) w.push_back(c.weight);
  w = normalised(std::move(w));
  PriorSpec p;
  p.variant_ = PriorVariant::objects;
  for (std::size_t i = 0; i < components.size(); ++i) components[i].weight = w[i];
  p.components_ = std::move(components);
  return p;
}

PriorSpec PriorSpec::mix(std::vector<PriorSpec> children, std::vector<double> weights) {
  if (children.empty() || children.size() != weights.size()) {
    throw Error(ErrorCode::parameter, "mixture needs matching, non-empty children and weights");
  }
  PriorSpec p;
  p.variant_ = PriorVariant::mixture;
  p.weights_ = normalised(std::move(weights));
  p.children_ = std::move(children);
  return p;
}

void GazeBuffer::push(double t, const Vec2& p) {
  if (!entries_.empty() && !(t > entries_.back().t)) {
    throw Error(ErrorCode::parameter, "gaze timestamps must be strictly increasing");
  }
  entries_.push_back({t, p});
  while (!entries_.empty() && entries_.front().t < t - retain_) entries_.pop_front();
}

std::vector<TimedPoint> GazeBuffer::window(double now, double span) const {
  std::vector<TimedPoint> out;
  for (const TimedPoint& e : entries_) {
    if (e.t >= now - span - 1e-9 && e.t <= now + 1e-9) out.push_back(e);
  }
  return out;
}

PriorSpec proximity_prior(const Vec2& human_origin, const Mat2& scale) {
  return PriorSpec::gaussian(PriorVariant::proximity, human_origin, scale);
}

PriorSpec gaze_prior(const GazeBuffer& buffer, double now, double scale) {
  const std::vector<TimedPoint> pts = buffer.window(now);
  if (pts.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "gaze prior needs 2 points in the window, have " + std::to_string(pts.size()));
  }
  Vec2 mean = Vec2::Zero();
  for (const auto& e : pts) mean += e.p;
  mean /= static_cast<double>(pts.size());
  Mat2 cov = Mat2::Zero();
  for (const auto& e : pts) {
    const Vec2 d = e.p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size() - 1);
  cov = scale * cov + kGazeRegulariser * Mat2::Identity();
  return PriorSpec::gaussian(PriorVariant::gaze, mean, cov);
}

PriorSpec objects_prior(const Scene& scene) {
  if (scene.objects.empty()) throw Error(ErrorCode::empty_scene, "objects prior needs at least one object");
  std::vector<WeightedGaussian> comps;
  comps.reserve(scene.objects.size());
  for (const SceneObject& o : scene.objects) {
    const double var = 0.25 * o.extent * o.extent + kPerceptionSigma * kPerceptionSigma;
    comps.push_back({o.confidence, Gaussian2(scene.table.to_plane(o.position), var * Mat2::Identity())});
  }
  return PriorSpec::gmm(std::move(comps));
}

PriorSpec mixture(std::vector<PriorSpec> children, std::vector<double> weights) {
  return PriorSpec::mix(std::move(children), std::move(weights));
}

double evaluate(const PriorSpec& prior, const Vec2& z) {
  if (prior.variant() == PriorVariant::mixture) {
    double total = 0.0;
    for (std::size_t i = 0; i < prior.children().size(); ++i) {
      total += prior.weights()[i] * evaluate(prior.children()[i], z);
    }
    return total;
  }
  double total = 0.0;
  for (const auto& c : prior.components()) total += c.weight * c.gaussian.density(z);
  return total;
}

Vec2 sample(const PriorSpec& prior, Rng& rng) {
  if (prior.variant() == PriorVariant::mixture) {
    return sample(prior.children()[pick(prior.weights(), rng)], rng);
  }
  const auto& comps = prior.components();
  if (comps.size() == 1) return comps.front().gaussian.sample(rng);
  std::vector<double> w;
  w.reserve(comps.size());
  for (const auto& c : comps) w.push_back(c.weight);
  return comps[pick(w, rng)].gaussian.sample(rng);
}

Vec2 sample(const PriorSpec& prior, std::uint64_t seed) {
  Rng rng(seed);
  return sample(prior, rng);
}

PriorSpec combined_prior(const Scene& scene, const Vec2& human_origin, const GazeBuffer* gaze,
                         double now, const PriorWeights& weights) {
  std::vector<PriorSpec> children;
  std::vector<double> w;
  children.push_back(proximity_prior(human_origin));
  w.push_back(weights.proximity);
  if (gaze != nullptr && weights.gaze > 0.0) {
    try {
      children.push_back(gaze_prior(*gaze, now));
      w.push_back(weights.gaze);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::insufficient_data) throw;
    }
  }
  if (!scene.objects.empty() && weights.objects > 0.0) {
    children.push_back(objects_prior(scene));
    w.push_back(weights.objects);
  }
  return mixture(std::move(children), std::move(w));
}

namespace {

nlohmann::json gaussian_json(const Gaussian2& g) {
  return {{"mean", {g.mean().x(), g.mean().y()}},
          {"cov", {{g.cov()(0, 0), g.cov()(0, 1)}, {g.cov()(1, 0), g.cov()(1, 1)}}}};
}

Gaussian2 json_gaussian(const nlohmann::json& j) {
  const auto& m = j.at("mean");
  const auto& c = j.at("cov");
  Mat2 cov;
  cov << c.at(0).at(0).get<double>(), c.at(0).at(1).get<double>(), c.at(1).at(0).get<double>(),
      c.at(1).at(1).get<double>();
  return Gaussian2(Vec2(m.at(0).get<double>(), m.at(1).get<double>()), cov);
}

PriorVariant parse_variant(const std::string& s) {
  if (s == "proximity") return PriorVariant::proximity;
  if (s == "gaze") return PriorVariant::gaze;
  if (s == "objects") return PriorVariant::objects;
  if (s == "mixture") return PriorVariant::mixture;
  throw Error(ErrorCode::parameter, "unknown prior variant '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const PriorSpec& prior) {
  j = nlohmann::json::object();
  j["variant"] = to_string(prior.variant());
  switch (prior.variant()) {
    case PriorVariant::proximity:
    case PriorVariant::gaze: {
      const nlohmann::json g = gaussian_json(prior.components().front().gaussian);
      j["mean"] = g["mean"];
      j["cov"] = g["cov"];
      break;
    }
    case PriorVariant::objects: {
      nlohmann::json comps = nlohmann::json::array();
      for (const auto& c : prior.components()) {
        nlohmann::json g = gaussian_json(c.gaussian);
        g["weight"] = c.weight;
        comps.push_back(g);
      }
      j["components"] = comps;
      break;
    }
    case PriorVariant::mixture: {
      nlohmann::json kids = nlohmann::json::array();
      for (const auto& c : prior.children()) kids.push_back(c);
      j["children"] = kids;
      j["weights"] = prior.weights();
      break;
    }
  }
}

void from_json(const nlohmann::json& j, PriorSpec& prior) {
  try {
    const PriorVariant v = parse_variant(j.at("variant").get<std::string>());
    switch (v) {
      case PriorVariant::proximity:
      case PriorVariant::gaze: {
        const Gaussian2 g = json_gaussian(j);
        prior = PriorSpec::gaussian(v, g.mean(), g.cov());
        return;
      }
      case PriorVariant::objects: {
        std::vector<WeightedGaussian> comps;
        for (const auto& c : j.at("components")) comps.push_back({c.at("weight").get<double>(), json_gaussian(c)});
        prior = PriorSpec::gmm(std::move(comps));
        return;
      }
      case PriorVariant::mixture: {
        std::vector<PriorSpec> kids;
        for (const auto& c : j.at("children")) kids.push_back(c.get<PriorSpec>());
        prior = PriorSpec::mix(std::move(kids), j.at("weights").get<std::vector<double>>());
        return;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parameter, std::string("malformed prior: ") + e.what());
  }
}

}  // namespace reachabc
