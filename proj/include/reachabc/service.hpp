#pragma once

#include "reachabc/generator.hpp"
#include "reachabc/inference.hpp"
#include "reachabc/priors.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

namespace reachabc {

inline constexpr int kProtocolVersion = 1;

// Read-only state shared by every session.
struct ServiceContext {
  std::shared_ptr<const TrajectoryGenerator> generator;
  InferenceGrid grid;  // cache built by `generator`
  Scene scene;         // default scene for new sessions
  InferenceConfig inference{};
  PriorWeights prior_weights{};
  double conflict_radius = 0.10;
  double p_safe = 0.05;
};

// One client's inference session. Messages are handled in receipt order;
// every reply is returned to the caller, who writes it to the wire.
class Session {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Session(std::shared_ptr<const ServiceContext> context);

  // Replies to one client message. After an error reply the session is
  // closed and further messages are ignored.
  std::vector<nlohmann::json> handle(const nlohmann::json& message, Clock::time_point received = Clock::now());
  std::vector<nlohmann::json> handle_line(const std::string& line);

  bool closed() const { return closed_; }
  const Scene& scene() const { return scene_; }
  std::size_t observed_points() const;

 private:
  std::vector<nlohmann::json> fail(const std::string& code, const std::string& detail);
  std::vector<nlohmann::json> on_hand(const nlohmann::json& message, Clock::time_point received);
  void reset();

  struct Sample {
    double t;
    Vec3 p;
  };

  std::shared_ptr<const ServiceContext> context_;
  Scene scene_;
  GazeBuffer gaze_;
  std::vector<Sample> hand_;
  std::optional<double> last_hand_t_;
  std::optional<double> last_gaze_t_;
  bool greeted_ = false;
  bool closed_ = false;
};

// Weights scaled so the largest is 255, rounded to the nearest byte.
std::vector<std::uint8_t> quantize_weights(std::span<const double> weights);

// Newline-delimited JSON over TCP, one thread per connection.
class Server {
 public:
  // port 0 picks a free port; see port().
  Server(std::shared_ptr<const ServiceContext> context, int port, const std::string& host = "127.0.0.1");
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  // Accepts until stop is requested; joins open connections before returning.
  void run(std::stop_token stop);

 private:
  std::shared_ptr<const ServiceContext> context_;
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace reachabc
