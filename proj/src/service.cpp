#include "reachabc/service.hpp"

#include "reachabc/codec.hpp"
#include "reachabc/task.hpp"

#include <algorithm>
#include <cmath>

namespace reachabc {

namespace {

using json = nlohmann::json;

bool is_vector(const json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) return false;
  return std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); });
}

}  // namespace

std::vector<std::uint8_t> quantize_weights(std::span<const double> weights) {
  std::vector<std::uint8_t> out(weights.size(), 0);
  double top = 0.0;
  for (double w : weights) top = std::max(top, w);
  if (!(top > 0.0)) return out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(weights[i] / top, 0.0, 1.0) * 255.0));
  }
  return out;
}

Session::Session(std::shared_ptr<const ServiceContext> context)
    : context_(std::move(context)), scene_(context_->scene) {}

std::size_t Session::observed_points() const { return hand_.size(); }

void Session::reset() {
  hand_.clear();
  gaze_.clear();
  last_hand_t_.reset();
  last_gaze_t_.reset();
}

std::vector<json> Session::fail(const std::string& code, const std::string& detail) {
  closed_ = true;
  return {json{{"type", "error"}, {"code", code}, {"message", detail}}};
}

std::vector<json> Session::handle_line(const std::string& line) {
  const auto received = Clock::now();
  if (closed_) return {};
  json message;
  try {
    message = json::parse(line);
  } catch (const json::parse_error& e) {
    return fail("bad_json", e.what());
  }
  return handle(message, received);
}

std::vector<json> Session::handle(const json& message, Clock::time_point received) {
  if (closed_) return {};
  if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
    return fail("protocol", "message needs a string \"type\"");
  }
  const std::string type = message["type"];
  if (type == "hello") {
    if (greeted_) return fail("protocol", "duplicate hello");
    if (!message.contains("proto") || message["proto"] != kProtocolVersion) {
      return fail("version_mismatch", "server speaks proto " + std::to_string(kProtocolVersion));
    }
    greeted_ = true;
    const auto& g = context_->grid;
    json scene;
    to_json(scene, scene_);
    return {json{{"type", "ready"},
                 {"proto", kProtocolVersion},
                 {"grid", {{"nx", g.nx}, {"ny", g.ny}, {"origin", {g.origin.x(), g.origin.y()}}, {"cell_size", g.cell_size}}},
                 {"scene", scene}}};
  }
  if (!greeted_) return fail("protocol", "hello expected first");

  try {
    if (type == "hand") return on_hand(message, received);
    if (type == "gaze") {
      if (!message.contains("t") || !message["t"].is_number() || !message.contains("p") || !is_vector(message["p"], 2)) {
        return fail("protocol", "gaze needs t and p[2]");
      }
      const double t = message["t"];
      if (last_gaze_t_ && t <= *last_gaze_t_) return fail("non_monotone", "gaze timestamps must increase");
      last_gaze_t_ = t;
      gaze_.push(t, Vec2(message["p"][0].get<double>(), message["p"][1].get<double>()));
      return {};
    }
    if (type == "reset") {
      reset();
      return {};
    }
    if (type == "scene") {
      Scene next;
      from_json(message, next);
      next.validate();
      if (next.objects.empty()) return fail("bad_scene", "scene has no objects");
      if (message.contains("table_frame") && !next.table.pose.isApprox(context_->grid.table_pose, 1e-9)) {
        return fail("scene_mismatch", "table frame differs from the served grid");
      }
      if (!message.contains("table_frame")) next.table = scene_.table;
      scene_ = std::move(next);
      reset();
      return {};
    }
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what());
  }
  return fail("protocol", "unknown message type '" + type + "'");
}

std::vector<json> Session::on_hand(const json& message, Clock::time_point received) {
  if (!message.contains("t") || !message["t"].is_number() || !message.contains("p") || !is_vector(message["p"], 3)) {
    return fail("protocol", "hand needs t and p[3]");
  }
  const double t = message["t"];
  if (last_hand_t_ && t <= *last_hand_t_) return fail("non_monotone", "hand timestamps must increase");
  last_hand_t_ = t;
  const Vec3 p(message["p"][0].get<double>(), message["p"][1].get<double>(), message["p"][2].get<double>());

  const auto& ctx = *context_;
  const double dt = ctx.grid.cache_dt;
  const auto horizon = static_cast<std::size_t>(ctx.grid.cache_points);
  // A reach longer than the cached horizon starts a fresh observation.
  if (!hand_.empty() && (t - hand_.front().t) / dt > static_cast<double>(horizon - 1) + 1e-6) hand_.clear();
  hand_.push_back({t, p});

  const double t0 = hand_.front().t;
  const auto t_index = static_cast<std::size_t>(std::floor((t - t0) / dt + 1e-6));
  const PriorSpec prior = combined_prior(scene_, scene_.table.to_plane(hand_.front().p), &gaze_, t, ctx.prior_weights);
  const std::vector<double> density = prior_on_grid(ctx.grid, prior);

  PosteriorEstimate posterior;
  if (t_index < 1) {
    posterior = prior_estimate(ctx.grid, density);
  } else {
    // Resample the message stream onto the generator's clock.
    Trajectory observed;
    observed.dt = dt;
    observed.points.reserve(t_index + 1);
    std::size_t j = 0;
    for (std::size_t k = 0; k <= t_index; ++k) {
      const double tk = t0 + dt * static_cast<double>(k);
      while (j + 2 < hand_.size() && hand_[j + 1].t < tk) ++j;
      const Sample& a = hand_[j];
      const Sample& b = hand_[std::min(j + 1, hand_.size() - 1)];
      const double f = b.t > a.t ? std::clamp((tk - a.t) / (b.t - a.t), 0.0, 1.0) : 0.0;
      observed.points.push_back((1.0 - f) * a.p + f * b.p);
    }
    posterior = grid_posterior(ctx.grid, density, *ctx.generator, ctx.inference, observed, t_index);
  }

  const auto probs = decision_summary(posterior, ctx.grid, scene_, ctx.conflict_radius);
  const auto safe = choose_safe_object(probs, scene_, ctx.p_safe);
  json object_probs = json::object();
  for (const auto& op : probs) object_probs[std::to_string(op.id)] = op.probability;

  const auto bytes = quantize_weights(posterior.weights);
  const Vec2 map = ctx.grid.center(posterior.map_cell);
  const double latency = std::chrono::duration<double, std::milli>(Clock::now() - received).count();
  return {json{{"type", "posterior"}, {"t", t}, {"weights_u8", codec::base64_encode(bytes)}, {"map", {map.x(), map.y()}}},
          json{{"type", "decision"},
               {"t", t},
               {"object_probs", object_probs},
               {"safe_object", safe ? json(*safe) : json(nullptr)},
               {"latency_ms", latency}}};
}

}  // namespace reachabc
