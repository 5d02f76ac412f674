#include "reachabc/task.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace reachabc {

double idle_time(const TaskLog& log, Agent agent) {
  std::vector<std::pair<double, double>> spans;
  for (const auto& a : log.actions) {
    if (a.agent != agent) continue;
    const double s = std::max(a.t_start, log.t0), e = std::min(a.t_end, log.t_final);
    if (e > s) spans.emplace_back(s, e);
  }
  std::sort(spans.begin(), spans.end());
  double covered = 0.0, cursor = log.t0;
  for (const auto& [s, e] : spans) {
    const double from = std::max(s, cursor);
    if (e > from) {
      covered += e - from;
      cursor = e;
    }
  }
  return (log.t_final - log.t0) - covered;
}

FluencyMetrics compute_metrics(const TaskLog& log, int placements) {
  const int placed = log.placements();
  if (placed != placements) {
    throw Error(ErrorCode::incomplete_task,
                "log has " + std::to_string(placed) + " placements, expected " + std::to_string(placements));
  }
  FluencyMetrics m;
  m.T = log.t_final - log.t0;
  const auto human = log.of(Agent::human);
  const auto robot = log.of(Agent::robot);
  if (human.empty() || robot.empty()) return m;

  m.RI = idle_time(log, Agent::robot);
  m.HI = idle_time(log, Agent::human);

  std::vector<double> retreat_ends;
  for (const auto& a : human) {
    if (a.kind == ActionKind::retreat) retreat_ends.push_back(a.t_end);
  }
  std::sort(retreat_ends.begin(), retreat_ends.end());
  if (retreat_ends.empty()) return m;
  double sum = 0.0;
  for (const auto& r : robot) {
    if (r.kind != ActionKind::reach || r.aborted) continue;
    // Pair with the first human retreat ending at or after the robot's
    // onset; fall back to the last one before it.
    auto it = std::lower_bound(retreat_ends.begin(), retreat_ends.end(), r.t_start);
    const double end = it != retreat_ends.end() ? *it : retreat_ends.back();
    sum += r.t_start - end;
    ++m.handovers;
  }
  if (m.handovers > 0) {
    m.FD_sum = sum;
    m.FD = sum / m.handovers;
  }
  return m;
}

int safety_violations(const TaskLog& log, const Scene& scene, double radius) {
  struct Occupancy {
    double s, e;
    Vec2 where;
  };
  auto occupancy = [&](Agent agent) {
    std::vector<Occupancy> out;
    const auto actions = log.of(agent);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto& a = actions[i];
      if (a.kind != ActionKind::reach || !a.object_id) continue;
      double end = a.t_end;
      if (i + 1 < actions.size() && actions[i + 1].kind == ActionKind::grasp) end = actions[i + 1].t_end;
      out.push_back({a.t_start, end, scene.table.to_plane(scene.object(*a.object_id).position)});
    }
    return out;
  };
  int violations = 0;
  for (const auto& h : occupancy(Agent::human)) {
    for (const auto& r : occupancy(Agent::robot)) {
      const bool overlap = std::min(h.e, r.e) - std::max(h.s, r.s) > 1e-9;
      if (overlap && (h.where - r.where).norm() < radius) ++violations;
    }
  }
  return violations;
}

nlohmann::json to_json(const AtomicAction& a) {
  nlohmann::json j = {{"type", "action"},
                      {"agent", to_string(a.agent)},
                      {"kind", to_string(a.kind)},
                      {"t_start", a.t_start},
                      {"t_end", a.t_end}};
  j["object_id"] = a.object_id ? nlohmann::json(*a.object_id) : nlohmann::json(nullptr);
  if (a.aborted) j["aborted"] = true;
  return j;
}

void write_jsonl(std::ostream& os, const TaskLog& log) {
  os << nlohmann::json{{"type", "task"},
                       {"policy", log.policy},
                       {"seed", log.seed},
                       {"t0", log.t0},
                       {"t_final", log.t_final}}
            .dump()
     << '\n';
  for (const auto& a : log.actions) os << to_json(a).dump() << '\n';
}

TaskLog read_task_jsonl(std::istream& is) {
  TaskLog log;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (j.at("type") == "task") {
        log.policy = j.at("policy").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.t0 = j.at("t0").get<double>();
        log.t_final = j.at("t_final").get<double>();
        continue;
      }
      AtomicAction a;
      a.agent = j.at("agent") == "human" ? Agent::human : Agent::robot;
      const std::string kind = j.at("kind").get<std::string>();
      bool known = false;
      for (ActionKind k : {ActionKind::reach, ActionKind::grasp, ActionKind::transport, ActionKind::release,
                           ActionKind::retreat}) {
        if (to_string(k) == kind) {
          a.kind = k;
          known = true;
        }
      }
      if (!known) throw Error(ErrorCode::parameter, "unknown action kind '" + kind + "'");
      a.t_start = j.at("t_start").get<double>();
      a.t_end = j.at("t_end").get<double>();
      if (j.contains("object_id") && !j["object_id"].is_null()) a.object_id = j["object_id"].get<int>();
      a.aborted = j.value("aborted", false);
      log.actions.push_back(a);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parameter, "task log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const char* colour(ActionKind kind) {
  switch (kind) {
    case ActionKind::reach: return "#4e79a7";
    case ActionKind::transport: return "#f28e2b";
    case ActionKind::retreat: return "#59a14f";
    default: return "#bab0ac";
  }
}

}  // namespace

std::string export_task_diagram(const TaskLog& log) {
  constexpr double kScale = 20.0;  // px per second
  constexpr double kLeft = 70.0;
  constexpr double kRowHeight = 28.0;
  const double span = std::max(0.0, log.t_final - log.t0);
  const double width = kLeft + span * kScale + 20.0;
  const double axis_y = 30.0 + 2 * (kRowHeight + 12.0);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
     << fmt("%.0f", axis_y + 30.0) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<title>" << log.policy << " seed " << log.seed << "</title>\n";
  const Agent rows[] = {Agent::human, Agent::robot};
  for (int r = 0; r < 2; ++r) {
    const double y = 30.0 + r * (kRowHeight + 12.0);
    os << "<text x=\"4\" y=\"" << fmt("%.1f", y + kRowHeight / 2 + 4) << "\">" << to_string(rows[r]) << "</text>\n";
    for (const auto& a : log.actions) {
      // Grasp and release count towards T but are left out of the diagram.
      if (a.agent != rows[r] || a.kind == ActionKind::grasp || a.kind == ActionKind::release) continue;
      const double x = kLeft + (a.t_start - log.t0) * kScale;
      const double w = a.duration() * kScale;
      os << "<g class=\"action " << to_string(a.kind) << "\"><rect x=\"" << fmt("%.2f", x) << "\" y=\""
         << fmt("%.1f", y) << "\" width=\"" << fmt("%.2f", w) << "\" height=\"" << fmt("%.1f", kRowHeight)
         << "\" fill=\"" << colour(a.kind) << "\"" << (a.aborted ? " stroke=\"red\"" : "") << "/>";
      os << "<text x=\"" << fmt("%.2f", x + 2) << "\" y=\"" << fmt("%.1f", y + kRowHeight / 2 + 4) << "\">"
         << fmt("%.2f", a.duration()) << "</text></g>\n";
    }
  }
  os << "<line x1=\"" << kLeft << "\" y1=\"" << fmt("%.1f", axis_y) << "\" x2=\"" << fmt("%.2f", kLeft + span * kScale)
     << "\" y2=\"" << fmt("%.1f", axis_y) << "\" stroke=\"black\"/>\n";
  for (int s = 0; s <= static_cast<int>(span); s += 5) {
    const double x = kLeft + s * kScale;
    os << "<text x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", axis_y + 14) << "\">" << s << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

nlohmann::json metrics_summary(const std::string& policy, std::span<const std::uint64_t> seeds,
                               std::span<const FluencyMetrics> runs) {
  nlohmann::json mean = nlohmann::json::object(), stdev = nlohmann::json::object();
  auto stat = [&](const char* name, auto get) {
    std::vector<double> v;
    for (const auto& m : runs) {
      if (auto x = get(m)) v.push_back(*x);
    }
    if (v.empty()) {
      mean[name] = nullptr;
      stdev[name] = nullptr;
      return;
    }
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    mean[name] = mu;
    stdev[name] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  stat("T", [](const FluencyMetrics& m) { return std::optional<double>(m.T); });
  stat("FD", [](const FluencyMetrics& m) { return m.FD; });
  stat("FD_sum", [](const FluencyMetrics& m) { return m.FD_sum; });
  stat("RI", [](const FluencyMetrics& m) { return m.RI; });
  stat("HI", [](const FluencyMetrics& m) { return m.HI; });
  return {{"policy", policy},
          {"seeds", std::vector<std::uint64_t>(seeds.begin(), seeds.end())},
          {"mean", mean},
          {"std", stdev}};
}

}  // namespace reachabc
