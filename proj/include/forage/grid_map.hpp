#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forage/error.hpp"
#include "forage/rng.hpp"

namespace forage {

struct NodeId {
  int i = 0;  // row, increases southward
  int j = 0;  // column, increases eastward

  friend bool operator==(NodeId a, NodeId b) { return a.i == b.i && a.j == b.j; }
  friend bool operator!=(NodeId a, NodeId b) { return !(a == b); }
  friend bool operator<(NodeId a, NodeId b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  }
};

// Canonical direction order N, NE, E, SE, S, SW, W, NW. Every tie-break in
// the project follows this order; changing it changes traces.
inline constexpr int kNumDirs = 8;
inline constexpr std::array<std::pair<int, int>, kNumDirs> kDirOffset{{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};
inline constexpr std::array<std::string_view, kNumDirs> kDirName{
    "N", "NE", "E", "SE", "S", "SW", "W", "NW"};

class GridMap {
 public:
  GridMap(int height, int width, std::vector<std::uint8_t> navigable,
          double cell_size = 1.0)
      : h_(height), w_(width), cell_size_(cell_size), nav_(std::move(navigable)) {
    if (h_ <= 0 || w_ <= 0 || nav_.size() != static_cast<std::size_t>(h_ * w_))
      throw ConfigError("grid dimensions do not match navigability data");
    if (cell_size_ <= 0.0) throw ConfigError("cell_size must be positive");
    for (int i = 0; i < h_; ++i)
      for (int j = 0; j < w_; ++j)
        if (nav_[static_cast<std::size_t>(i) * w_ + j]) nav_nodes_.push_back({i, j});
    if (nav_nodes_.empty()) throw ConfigError("map has no navigable cells");
  }

  // Parses the ASCII map format: one row per line, '.' navigable,
  // '#' obstacle, all rows equal length. An optional leading directive line
  // "# cell_size=<float>" overrides the default cell size of 1.
  static GridMap from_text(std::string_view text) {
    double cell_size = 1.0;
    std::vector<std::string> rows;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      std::string_view line = (nl == std::string_view::npos)
                                  ? text.substr(pos)
                                  : text.substr(pos, nl - pos);
      pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
      ++line_no;
      if (line.empty()) continue;
      if (line.rfind("# ", 0) == 0) {
        constexpr std::string_view kKey = "# cell_size=";
        if (line.rfind(kKey, 0) != 0)
          throw ConfigError("map line " + std::to_string(line_no) +
                            ": unknown directive");
        try {
          cell_size = std::stod(std::string(line.substr(kKey.size())));
        } catch (const std::exception&) {
          throw ConfigError("map line " + std::to_string(line_no) +
                            ": bad cell_size value");
        }
        if (cell_size <= 0.0)
          throw ConfigError("map line " + std::to_string(line_no) +
                            ": cell_size must be positive");
        continue;
      }
      for (char c : line)
        if (c != '.' && c != '#')
          throw ConfigError("map line " + std::to_string(line_no) +
                            ": invalid character '" + std::string(1, c) + "'");
      rows.emplace_back(line);
    }
    if (rows.empty()) throw ConfigError("map has no rows");
    const std::size_t width = rows.front().size();
    for (std::size_t r = 1; r < rows.size(); ++r)
      if (rows[r].size() != width)
        throw ConfigError("map rows have unequal lengths (row " +
                          std::to_string(r + 1) + ")");
    std::vector<std::uint8_t> nav;
    nav.reserve(rows.size() * width);
    for (const auto& row : rows)
      for (char c : row) nav.push_back(c == '.' ? 1 : 0);
    return GridMap(static_cast<int>(rows.size()), static_cast<int>(width),
                   std::move(nav), cell_size);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  double cell_size() const { return cell_size_; }
  int cell_count() const { return h_ * w_; }

  bool in_bounds(NodeId n) const {
    return n.i >= 0 && n.i < h_ && n.j >= 0 && n.j < w_;
  }
  bool navigable(NodeId n) const {
    return in_bounds(n) && nav_[index(n)] != 0;
  }
  bool navigable_index(int idx) const { return nav_[idx] != 0; }

  int navigable_count() const { return static_cast<int>(nav_nodes_.size()); }
  // Row-major order; the canonical enumeration of V.
  const std::vector<NodeId>& navigable_nodes() const { return nav_nodes_; }

  int index(NodeId n) const { return n.i * w_ + n.j; }
  NodeId node_at(int idx) const { return {idx / w_, idx % w_}; }

  // Continuous coordinates of the cell center: x along rows, y along columns.
  std::pair<double, double> cell_center(NodeId n) const {
    return {(n.i + 0.5) * cell_size_, (n.j + 0.5) * cell_size_};
  }

  // Navigable cells among the 8 Chebyshev-adjacent ones, canonical order.
  std::vector<NodeId> neighbors(NodeId n) const {
    if (!navigable(n)) throw std::domain_error("neighbors: node not navigable");
    std::vector<NodeId> out;
    out.reserve(kNumDirs);
    for (const auto& [di, dj] : kDirOffset) {
      NodeId m{n.i + di, n.j + dj};
      if (navigable(m)) out.push_back(m);
    }
    return out;
  }

  // Cell whose half-open area [i*s,(i+1)*s) x [j*s,(j+1)*s) contains (x,y).
  std::optional<NodeId> node_of_point(double x, double y) const {
    if (x < 0.0 || y < 0.0) return std::nullopt;
    int i = static_cast<int>(std::floor(x / cell_size_));
    int j = static_cast<int>(std::floor(y / cell_size_));
    NodeId n{i, j};
    if (!in_bounds(n)) return std::nullopt;
    return n;
  }

  // Single-source Dijkstra over the 8-connected graph, edge cost 1 for
  // cardinal moves and sqrt(2) for diagonal ones. Pop order (dist, index) and
  // strict-improvement relaxation in canonical neighbor order make parents,
  // and therefore paths, deterministic.
  struct DistanceField {
    NodeId source;
    std::vector<double> dist;   // infinity when unreachable
    std::vector<int> parent;    // -1 at source / unreachable
  };

  DistanceField dijkstra(NodeId from) const {
    if (!navigable(from))
      throw std::domain_error("dijkstra: source not navigable");
    constexpr double kInf = std::numeric_limits<double>::infinity();
    DistanceField f;
    f.source = from;
    f.dist.assign(nav_.size(), kInf);
    f.parent.assign(nav_.size(), -1);
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    f.dist[index(from)] = 0.0;
    pq.emplace(0.0, index(from));
    const double diag = std::sqrt(2.0);
    while (!pq.empty()) {
      auto [d, idx] = pq.top();
      pq.pop();
      if (d > f.dist[idx]) continue;
      NodeId n = node_at(idx);
      for (int k = 0; k < kNumDirs; ++k) {
        NodeId m{n.i + kDirOffset[k].first, n.j + kDirOffset[k].second};
        if (!navigable(m)) continue;
        double w = (kDirOffset[k].first != 0 && kDirOffset[k].second != 0)
                       ? diag
                       : 1.0;
        double nd = d + w;
        int midx = index(m);
        if (nd < f.dist[midx]) {
          f.dist[midx] = nd;
          f.parent[midx] = idx;
          pq.emplace(nd, midx);
        }
      }
    }
    return f;
  }

  struct Path {
    std::vector<NodeId> nodes;
    double cost = 0.0;
  };

  std::optional<Path> shortest_path(NodeId from, NodeId to) const {
    if (!navigable(from) || !navigable(to))
      throw std::domain_error("shortest_path: endpoint not navigable");
    if (from == to) return Path{{from}, 0.0};
    DistanceField f = dijkstra(from);
    int tidx = index(to);
    if (!std::isfinite(f.dist[tidx])) return std::nullopt;
    Path p;
    p.cost = f.dist[tidx];
    for (int idx = tidx; idx != -1; idx = f.parent[idx])
      p.nodes.push_back(node_at(idx));
    std::reverse(p.nodes.begin(), p.nodes.end());
    return p;
  }

  // First edge of the canonical path from the field's source to `to`,
  // as a direction index into kDirOffset.
  static int first_step_dir(const DistanceField& f, const GridMap& map,
                            NodeId to) {
    int idx = map.index(to);
    int src = map.index(f.source);
    if (idx == src) throw std::domain_error("first_step_dir: target is source");
    while (f.parent[idx] != src) idx = f.parent[idx];
    NodeId second = map.node_at(idx);
    int di = second.i - f.source.i;
    int dj = second.j - f.source.j;
    for (int k = 0; k < kNumDirs; ++k)
      if (kDirOffset[k].first == di && kDirOffset[k].second == dj) return k;
    throw RuntimeError("first_step_dir: corrupt parent chain");
  }

  std::vector<std::string> rows() const {
    std::vector<std::string> out;
    out.reserve(h_);
    for (int i = 0; i < h_; ++i) {
      std::string row(w_, '#');
      for (int j = 0; j < w_; ++j)
        if (nav_[static_cast<std::size_t>(i) * w_ + j]) row[j] = '.';
      out.push_back(std::move(row));
    }
    return out;
  }

  std::string to_text() const {
    std::string out;
    if (cell_size_ != 1.0)
      out += "# cell_size=" + std::to_string(cell_size_) + "\n";
    for (const auto& row : rows()) {
      out += row;
      out += '\n';
    }
    return out;
  }

  std::uint64_t digest() const { return fnv1a64(to_text()); }

 private:
  int h_;
  int w_;
  double cell_size_;
  std::vector<std::uint8_t> nav_;
  std::vector<NodeId> nav_nodes_;
};

}  // namespace forage
