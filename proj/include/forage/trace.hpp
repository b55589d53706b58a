#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "forage/agents.hpp"
#include "forage/error.hpp"
#include "forage/grid_map.hpp"

namespace forage {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kTraceVersion = 1;

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k) {
    s[k] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

struct MoveEvent {
  int t = 0;
  int agent = 0;
  Team team = Team::Scout;
  NodeId from{};
  std::optional<NodeId> via;
  NodeId to{};
  Action action = Action::Stay;
};

struct DiscoverEvent {
  int t = 0;
  int item = 0;
  NodeId cell{};
  int agent = 0;
  Team team = Team::Scout;
};

struct CollectEvent {
  int t = 0;
  int item = 0;
  NodeId cell{};
  int agent = 0;
};

struct SparseCount {
  int cell = 0;  // row-major cell index
  int n = 0;
};

struct StepSummary {
  int t = 0;
  int alive = 0;
  int discovered = 0;  // cumulative
  int collected = 0;   // cumulative
  double mi = 0.0;
  std::string visible_digest;
  std::vector<std::vector<int>> fov;  // per agent, sorted cell indices
  std::vector<SparseCount> truth;     // ground-truth counts, sparse
  std::vector<SparseCount> model;     // shared-model counts, sparse
};

struct TraceHeader {
  int trace_version = kTraceVersion;
  std::uint64_t seed = 0;
  int episode = 0;
  std::string algorithm;
  std::string config_digest;
  std::string map_digest;
  double cell_size = 1.0;
  std::vector<std::string> map_rows;
  int item_count = 0;  // K
  double wind_x = 0.0;
  double wind_y = 0.0;
  NodeId hotspot{};
  std::string spawn_digest;
  TeamSpec scouts;
  TeamSpec foragers;
  int horizon = 150;
  double forgetting = 0.95;
  IdlenessMode idleness_mode = IdlenessMode::Observe;
  std::string policy_scouts;
  std::string policy_foragers;
  double eps_scouts = 0.0;
  double eps_foragers = 0.0;
  NodeId start{};
};

struct TraceFooter {
  int t_end = 0;
  std::string reason;  // "horizon" | "cleared"
  int discovered_total = 0;
  int collected_total = 0;
};

// Append-only episode log. Every metric in the suite is computable from this
// record alone; the header embeds the map so files are self-contained.
struct EpisodeTrace {
  TraceHeader header;
  std::vector<MoveEvent> moves;
  std::vector<DiscoverEvent> discovers;
  std::vector<CollectEvent> collects;
  std::vector<StepSummary> summaries;
  TraceFooter footer;

  int steps() const { return footer.t_end + 1; }

  GridMap rebuild_map() const {
    std::string text;
    if (header.cell_size != 1.0)
      text += "# cell_size=" + std::to_string(header.cell_size) + "\n";
    for (const auto& r : header.map_rows) {
      text += r;
      text += '\n';
    }
    return GridMap::from_text(text);
  }

  std::string to_jsonl() const;
  void write_file(const std::string& path) const;
  static EpisodeTrace parse(const std::string& content, const std::string& name);
  static EpisodeTrace load(const std::string& path);
};

namespace trace_io {

inline ordered_json node_json(NodeId n) { return ordered_json::array({n.i, n.j}); }

inline NodeId node_from(const ordered_json& j) {
  return NodeId{j.at(0).get<int>(), j.at(1).get<int>()};
}

inline ordered_json team_spec_json(const TeamSpec& s) {
  ordered_json j;
  j["count"] = s.count;
  j["speed"] = s.speed;
  j["sensing_radius"] = s.sensing_radius;
  return j;
}

inline TeamSpec team_spec_from(const ordered_json& j) {
  TeamSpec s;
  s.count = j.at("count").get<int>();
  s.speed = j.at("speed").get<int>();
  s.sensing_radius = j.at("sensing_radius").get<double>();
  return s;
}

inline ordered_json header_json(const TraceHeader& h) {
  ordered_json j;
  j["type"] = "header";
  j["trace_version"] = h.trace_version;
  j["seed"] = h.seed;
  j["episode"] = h.episode;
  j["algorithm"] = h.algorithm;
  j["config_digest"] = h.config_digest;
  j["map_digest"] = h.map_digest;
  j["cell_size"] = h.cell_size;
  j["map_rows"] = h.map_rows;
  j["K"] = h.item_count;
  j["wind"] = ordered_json::array({h.wind_x, h.wind_y});
  j["hotspot"] = node_json(h.hotspot);
  j["spawn_digest"] = h.spawn_digest;
  j["scouts"] = team_spec_json(h.scouts);
  j["foragers"] = team_spec_json(h.foragers);
  j["horizon"] = h.horizon;
  j["forgetting"] = h.forgetting;
  j["idleness_mode"] = std::string(idleness_mode_name(h.idleness_mode));
  j["policy_scouts"] = h.policy_scouts;
  j["policy_foragers"] = h.policy_foragers;
  j["eps_scouts"] = h.eps_scouts;
  j["eps_foragers"] = h.eps_foragers;
  j["start"] = node_json(h.start);
  return j;
}

inline TraceHeader header_from(const ordered_json& j) {
  TraceHeader h;
  h.trace_version = j.at("trace_version").get<int>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.episode = j.at("episode").get<int>();
  h.algorithm = j.at("algorithm").get<std::string>();
  h.config_digest = j.at("config_digest").get<std::string>();
  h.map_digest = j.at("map_digest").get<std::string>();
  h.cell_size = j.at("cell_size").get<double>();
  h.map_rows = j.at("map_rows").get<std::vector<std::string>>();
  h.item_count = j.at("K").get<int>();
  h.wind_x = j.at("wind").at(0).get<double>();
  h.wind_y = j.at("wind").at(1).get<double>();
  h.hotspot = node_from(j.at("hotspot"));
  h.spawn_digest = j.at("spawn_digest").get<std::string>();
  h.scouts = team_spec_from(j.at("scouts"));
  h.foragers = team_spec_from(j.at("foragers"));
  h.horizon = j.at("horizon").get<int>();
  h.forgetting = j.at("forgetting").get<double>();
  auto mode = idleness_mode_from_name(j.at("idleness_mode").get<std::string>());
  if (!mode) throw ConfigError("trace header: unknown idleness_mode");
  h.idleness_mode = *mode;
  h.policy_scouts = j.at("policy_scouts").get<std::string>();
  h.policy_foragers = j.at("policy_foragers").get<std::string>();
  h.eps_scouts = j.at("eps_scouts").get<double>();
  h.eps_foragers = j.at("eps_foragers").get<double>();
  h.start = node_from(j.at("start"));
  return h;
}

inline ordered_json move_json(const MoveEvent& e) {
  ordered_json j;
  j["type"] = "move";
  j["t"] = e.t;
  j["agent"] = e.agent;
  j["team"] = std::string(team_name(e.team));
  j["from"] = node_json(e.from);
  if (e.via) j["via"] = node_json(*e.via);
  j["to"] = node_json(e.to);
  j["action"] = std::string(action_name(e.action));
  return j;
}

inline ordered_json discover_json(const DiscoverEvent& e) {
  ordered_json j;
  j["type"] = "discover";
  j["t"] = e.t;
  j["item"] = e.item;
  j["cell"] = node_json(e.cell);
  j["agent"] = e.agent;
  j["team"] = std::string(team_name(e.team));
  return j;
}

inline ordered_json collect_json(const CollectEvent& e) {
  ordered_json j;
  j["type"] = "collect";
  j["t"] = e.t;
  j["item"] = e.item;
  j["cell"] = node_json(e.cell);
  j["agent"] = e.agent;
  return j;
}

inline ordered_json sparse_json(const std::vector<SparseCount>& v) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : v) arr.push_back(ordered_json::array({s.cell, s.n}));
  return arr;
}

inline std::vector<SparseCount> sparse_from(const ordered_json& arr) {
  std::vector<SparseCount> v;
  v.reserve(arr.size());
  for (const auto& e : arr)
    v.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return v;
}

inline ordered_json summary_json(const StepSummary& s) {
  ordered_json j;
  j["type"] = "summary";
  j["t"] = s.t;
  j["alive"] = s.alive;
  j["discovered"] = s.discovered;
  j["collected"] = s.collected;
  j["mi"] = s.mi;
  j["visible_digest"] = s.visible_digest;
  j["fov"] = s.fov;
  j["truth"] = sparse_json(s.truth);
  j["model"] = sparse_json(s.model);
  return j;
}

inline StepSummary summary_from(const ordered_json& j) {
  StepSummary s;
  s.t = j.at("t").get<int>();
  s.alive = j.at("alive").get<int>();
  s.discovered = j.at("discovered").get<int>();
  s.collected = j.at("collected").get<int>();
  s.mi = j.at("mi").get<double>();
  s.visible_digest = j.at("visible_digest").get<std::string>();
  s.fov = j.at("fov").get<std::vector<std::vector<int>>>();
  s.truth = sparse_from(j.at("truth"));
  s.model = sparse_from(j.at("model"));
  return s;
}

inline ordered_json footer_json(const TraceFooter& f) {
  ordered_json j;
  j["type"] = "footer";
  j["t_end"] = f.t_end;
  j["reason"] = f.reason;
  j["discovered_total"] = f.discovered_total;
  j["collected_total"] = f.collected_total;
  return j;
}

inline Team team_from_name(const std::string& s, const std::string& where) {
  if (s == "scout") return Team::Scout;
  if (s == "forager") return Team::Forager;
  throw ConfigError(where + ": unknown team '" + s + "'");
}

// Reads a whole file, transparently inflating gzip content.
inline std::string read_file_auto(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
      static_cast<unsigned char>(raw[1]) != 0x8b)
    return raw;

  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw RuntimeError("zlib init failed for " + path);
  std::string out;
  std::array<char, 1 << 16> buf;
  zs.next_in = reinterpret_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw RuntimeError("gzip decompression failed for " + path);
    }
    out.append(buf.data(), buf.size() - zs.avail_out);
  } while (ret != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

}  // namespace trace_io

inline std::string EpisodeTrace::to_jsonl() const {
  std::string out;
  out += trace_io::header_json(header).dump();
  out += '\n';
  std::size_t im = 0, ic = 0, id = 0, is = 0;
  for (int t = 0; t <= footer.t_end; ++t) {
    for (; im < moves.size() && moves[im].t == t; ++im) {
      out += trace_io::move_json(moves[im]).dump();
      out += '\n';
    }
    for (; ic < collects.size() && collects[ic].t == t; ++ic) {
      out += trace_io::collect_json(collects[ic]).dump();
      out += '\n';
    }
    for (; id < discovers.size() && discovers[id].t == t; ++id) {
      out += trace_io::discover_json(discovers[id]).dump();
      out += '\n';
    }
    for (; is < summaries.size() && summaries[is].t == t; ++is) {
      out += trace_io::summary_json(summaries[is]).dump();
      out += '\n';
    }
  }
  out += trace_io::footer_json(footer).dump();
  out += '\n';
  return out;
}

inline void EpisodeTrace::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write trace file: " + path);
  out << to_jsonl();
}

inline EpisodeTrace EpisodeTrace::parse(const std::string& content,
                                        const std::string& name) {
  EpisodeTrace tr;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  bool have_footer = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (have_footer)
      throw RuntimeError(name + ":" + std::to_string(line_no) +
                         ": content after footer");
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw RuntimeError(name + ":" + std::to_string(line_no) +
                         ": bad JSON: " + e.what());
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "header") {
        if (have_header)
          throw RuntimeError("duplicate header");
        tr.header = trace_io::header_from(j);
        if (tr.header.trace_version != kTraceVersion)
          throw ConfigError("unsupported trace_version " +
                            std::to_string(tr.header.trace_version));
        have_header = true;
      } else if (!have_header) {
        throw RuntimeError("missing header");
      } else if (type == "move") {
        MoveEvent e;
        e.t = j.at("t").get<int>();
        e.agent = j.at("agent").get<int>();
        e.team = trace_io::team_from_name(j.at("team").get<std::string>(), name);
        e.from = trace_io::node_from(j.at("from"));
        if (j.contains("via")) e.via = trace_io::node_from(j.at("via"));
        e.to = trace_io::node_from(j.at("to"));
        auto a = action_from_name(j.at("action").get<std::string>());
        if (!a) throw RuntimeError("unknown action");
        e.action = *a;
        tr.moves.push_back(e);
      } else if (type == "discover") {
        DiscoverEvent e;
        e.t = j.at("t").get<int>();
        e.item = j.at("item").get<int>();
        e.cell = trace_io::node_from(j.at("cell"));
        e.agent = j.at("agent").get<int>();
        e.team = trace_io::team_from_name(j.at("team").get<std::string>(), name);
        tr.discovers.push_back(e);
      } else if (type == "collect") {
        CollectEvent e;
        e.t = j.at("t").get<int>();
        e.item = j.at("item").get<int>();
        e.cell = trace_io::node_from(j.at("cell"));
        e.agent = j.at("agent").get<int>();
        tr.collects.push_back(e);
      } else if (type == "summary") {
        tr.summaries.push_back(trace_io::summary_from(j));
      } else if (type == "footer") {
        tr.footer.t_end = j.at("t_end").get<int>();
        tr.footer.reason = j.at("reason").get<std::string>();
        tr.footer.discovered_total = j.at("discovered_total").get<int>();
        tr.footer.collected_total = j.at("collected_total").get<int>();
        have_footer = true;
      } else {
        throw RuntimeError("unknown event type '" + type + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw RuntimeError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw RuntimeError(name + ": missing header line");
  if (!have_footer)
    throw RuntimeError(name + ":" + std::to_string(line_no) +
                       ": truncated trace, missing footer");
  return tr;
}

inline EpisodeTrace EpisodeTrace::load(const std::string& path) {
  return parse(trace_io::read_file_auto(path), path);
}

}  // namespace forage
