#include "eicoal/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace eicoal {

const char* event_type_name(EventType t) {
  switch (t) {
    case EventType::Sampling: return "sampling";
    case EventType::Coalescent: return "coalescent";
    case EventType::Grid: return "grid";
  }
  return "?";
}

int EventTimeline::total_tips() const {
  int n = 0;
  for (const auto& e : events) n += e.samples_added;
  return n;
}

int EventTimeline::coalescent_count() const {
  int n = 0;
  for (const auto& e : events)
    if (e.type == EventType::Coalescent) ++n;
  return n;
}

std::vector<double> EventTimeline::coalescent_times() const {
  std::vector<double> ts;
  for (const auto& e : events)
    if (e.type == EventType::Coalescent) ts.push_back(e.time);
  return ts;
}

void EventTimeline::validate() const {
  if (events.empty()) throw ValidationError("empty timeline");
  if (std::abs(events.front().time) > kTimeTolerance ||
      events.front().type != EventType::Sampling)
    throw ValidationError("timeline must start with a sampling event at t=0");
  int k = 0;
  double prev = -1.0;
  for (const auto& e : events) {
    if (e.time <= prev) throw ValidationError("timeline times must be strictly increasing");
    prev = e.time;
    switch (e.type) {
      case EventType::Sampling:
        if (e.samples_added <= 0)
          throw ValidationError("sampling event must add at least one sample");
        k += e.samples_added;
        break;
      case EventType::Coalescent:
        if (k < 2) throw InvariantError("coalescent event with fewer than 2 lineages");
        k -= 1;
        break;
      case EventType::Grid:
        if (e.samples_added != 0)
          throw ValidationError("grid event cannot add samples");
        break;
    }
    if (e.k != k) throw InvariantError("timeline lineage counts inconsistent");
    if (k < 1) throw InvariantError("lineage count dropped below 1");
  }
}

int SampledTree::tip_count() const {
  int n = 0;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (is_tip(i)) ++n;
  return n;
}

std::vector<double> SampledTree::depths() const {
  std::vector<double> d(nodes.size(), 0.0);
  // Parents precede children is not guaranteed; do an explicit traversal.
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int c : nodes[static_cast<std::size_t>(id)].children) {
      d[static_cast<std::size_t>(c)] =
          d[static_cast<std::size_t>(id)] + nodes[static_cast<std::size_t>(c)].branch_length;
      stack.push_back(c);
    }
  }
  return d;
}

std::vector<double> SampledTree::tip_offsets() const {
  const auto d = depths();
  double max_depth = 0.0;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (is_tip(i)) max_depth = std::max(max_depth, d[static_cast<std::size_t>(i)]);
  std::vector<double> off(nodes.size(), 0.0);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (is_tip(i)) off[static_cast<std::size_t>(i)] = max_depth - d[static_cast<std::size_t>(i)];
  return off;
}

void SampledTree::validate() const {
  if (nodes.empty()) throw ValidationError("empty tree");
  if (root < 0 || root >= static_cast<int>(nodes.size()))
    throw ValidationError("missing root");
  int roots = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.parent < 0) {
      ++roots;
      if (static_cast<int>(i) != root) throw ValidationError("node without parent is not the root");
    } else {
      if (!std::isfinite(n.branch_length) || n.branch_length < 0.0)
        throw ValidationError("branch lengths must be finite and >= 0");
    }
    if (!n.children.empty() && n.children.size() != 2)
      throw ValidationError("internal nodes must be binary");
  }
  if (roots != 1) throw ValidationError("tree must have exactly one root");
  if (tip_count() < 2) throw ValidationError("tree must have at least 2 tips");
}

namespace {

struct NewickParser {
  const std::string& text;
  std::size_t pos = 0;
  SampledTree tree;

  explicit NewickParser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  char peek() {
    skip_ws();
    if (pos >= text.size()) throw ParseError("unexpected end of input", pos);
    return text[pos];
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  void expect(char c) {
    if (peek() != c)
      throw ParseError(std::string("expected '") + c + "'", pos);
    ++pos;
  }

  std::string parse_label() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size()) {
      const char c = text[pos];
      if (c == ':' || c == ',' || c == '(' || c == ')' || c == ';' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      ++pos;
    }
    return text.substr(start, pos - start);
  }

  double parse_length() {
    skip_ws();
    const char* begin = text.c_str() + pos;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("expected branch length", pos);
    pos += static_cast<std::size_t>(end - begin);
    return v;
  }

  // subtree := "(" subtree_with_length ("," subtree_with_length)* ")" label?
  //          | label
  int parse_subtree() {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (peek() == '(') {
      ++pos;
      std::vector<int> children;
      children.push_back(parse_branch(id));
      while (peek() == ',') {
        ++pos;
        children.push_back(parse_branch(id));
      }
      expect(')');
      tree.nodes[static_cast<std::size_t>(id)].children = std::move(children);
      skip_ws();
      if (pos < text.size() && text[pos] != ':' && text[pos] != ',' &&
          text[pos] != ')' && text[pos] != ';')
        tree.nodes[static_cast<std::size_t>(id)].label = parse_label();
    } else {
      const std::string label = parse_label();
      if (label.empty()) throw ParseError("expected a tip label or '('", pos);
      tree.nodes[static_cast<std::size_t>(id)].label = label;
    }
    return id;
  }

  int parse_branch(int parent) {
    const int id = parse_subtree();
    tree.nodes[static_cast<std::size_t>(id)].parent = parent;
    expect(':');
    tree.nodes[static_cast<std::size_t>(id)].branch_length = parse_length();
    return id;
  }

  SampledTree run() {
    if (at_end()) throw ParseError("empty input", pos);
    tree.root = parse_subtree();
    skip_ws();
    // A root branch length carries no information; accept and ignore it.
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      const double v = parse_length();
      if (!std::isfinite(v) || v < 0.0)
        throw ValidationError("branch lengths must be finite and >= 0");
    }
    expect(';');
    if (!at_end()) throw ParseError("trailing characters after ';'", pos);
    return std::move(tree);
  }
};

}  // namespace

SampledTree parse_newick(const std::string& text) {
  NewickParser parser(text);
  SampledTree tree = parser.run();
  tree.validate();
  return tree;
}

namespace {

void append_newick(const SampledTree& tree, int id, std::string& out) {
  const auto& n = tree.nodes[static_cast<std::size_t>(id)];
  if (!n.children.empty()) {
    out += '(';
    for (std::size_t c = 0; c < n.children.size(); ++c) {
      if (c) out += ',';
      append_newick(tree, n.children[c], out);
    }
    out += ')';
  }
  out += n.label;
  if (n.parent >= 0) {
    char buf[40];
    std::snprintf(buf, sizeof buf, ":%.17g", n.branch_length);
    out += buf;
  }
}

}  // namespace

std::string to_newick(const SampledTree& tree) {
  std::string out;
  append_newick(tree, tree.root, out);
  out += ';';
  return out;
}

EventTimeline extract_events(const SampledTree& tree) {
  tree.validate();
  const auto depths = tree.depths();
  double max_depth = 0.0;
  for (int i = 0; i < static_cast<int>(tree.nodes.size()); ++i)
    if (tree.is_tip(i)) max_depth = std::max(max_depth, depths[static_cast<std::size_t>(i)]);

  // Backwards times: tips at max_depth - depth, internals likewise.
  std::vector<double> tip_times, coal_times;
  for (int i = 0; i < static_cast<int>(tree.nodes.size()); ++i) {
    const double t = max_depth - depths[static_cast<std::size_t>(i)];
    if (tree.is_tip(i))
      tip_times.push_back(t);
    else
      coal_times.push_back(t);
  }
  std::sort(tip_times.begin(), tip_times.end());
  std::sort(coal_times.begin(), coal_times.end());
  for (std::size_t i = 1; i < coal_times.size(); ++i)
    if (coal_times[i] - coal_times[i - 1] <= kTimeTolerance)
      throw ValidationError("simultaneous coalescent times (zero-length internal branch?)");

  EventTimeline tl;
  // Merge co-dated tips into single sampling events.
  std::size_t i = 0;
  while (i < tip_times.size()) {
    std::size_t j = i + 1;
    while (j < tip_times.size() && tip_times[j] - tip_times[i] <= kTimeTolerance) ++j;
    tl.events.push_back({tip_times[i], EventType::Sampling, static_cast<int>(j - i), 0});
    i = j;
  }
  for (double t : coal_times)
    tl.events.push_back({t, EventType::Coalescent, 0, 0});
  std::sort(tl.events.begin(), tl.events.end(),
            [](const TimelineEvent& a, const TimelineEvent& b) { return a.time < b.time; });
  for (std::size_t e = 1; e < tl.events.size(); ++e)
    if (tl.events[e].time - tl.events[e - 1].time <= kTimeTolerance)
      throw ValidationError("coalescent time collides with a sampling time");

  int k = 0;
  for (auto& e : tl.events) {
    if (e.type == EventType::Sampling) {
      k += e.samples_added;
    } else {
      if (k < 2) throw InvariantError("coalescent event with fewer than 2 lineages");
      k -= 1;
    }
    e.k = k;
  }
  tl.validate();
  return tl;
}

EventTimeline insert_grid(const EventTimeline& timeline, double changepoint_interval) {
  if (changepoint_interval <= 0.0)
    throw UsageError("changepoint interval must be positive");
  timeline.validate();
  const double span = timeline.span();
  EventTimeline out = timeline;
  for (int j = 1; j * changepoint_interval < span + kTimeTolerance; ++j) {
    const double t = j * changepoint_interval;
    if (t > span) break;
    bool collides = false;
    for (const auto& e : out.events)
      if (std::abs(e.time - t) <= kTimeTolerance) {
        collides = true;
        break;
      }
    if (!collides) out.events.push_back({t, EventType::Grid, 0, 0});
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const TimelineEvent& a, const TimelineEvent& b) { return a.time < b.time; });
  int k = 0;
  for (auto& e : out.events) {
    if (e.type == EventType::Sampling)
      k += e.samples_added;
    else if (e.type == EventType::Coalescent)
      k -= 1;
    e.k = k;
  }
  out.validate();
  return out;
}

SampledTree tree_from_timeline(const EventTimeline& timeline, Rng& rng) {
  timeline.validate();
  if (timeline.events.back().k != 1)
    throw UsageError("tree synthesis needs a complete timeline ending at the MRCA");
  SampledTree tree;
  std::vector<int> active;           // node ids of open lineages
  std::vector<double> node_time;     // backwards time of each node
  int tip_no = 0;
  for (const auto& e : timeline.events) {
    if (e.type == EventType::Sampling) {
      for (int s = 0; s < e.samples_added; ++s) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.back().label = "t" + std::to_string(tip_no++);
        node_time.push_back(e.time);
        active.push_back(id);
      }
    } else if (e.type == EventType::Coalescent) {
      const std::size_t a = static_cast<std::size_t>(rng.uniform_int(active.size()));
      std::size_t b = static_cast<std::size_t>(rng.uniform_int(active.size() - 1));
      if (b >= a) ++b;
      const int id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      node_time.push_back(e.time);
      for (std::size_t idx : {a, b}) {
        const int child = active[idx];
        tree.nodes[static_cast<std::size_t>(child)].parent = id;
        tree.nodes[static_cast<std::size_t>(child)].branch_length =
            e.time - node_time[static_cast<std::size_t>(child)];
        tree.nodes[static_cast<std::size_t>(id)].children.push_back(child);
      }
      active[std::min(a, b)] = id;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::max(a, b)));
    }
  }
  if (active.size() != 1) throw InvariantError("timeline did not close to a single root");
  tree.root = active.front();
  tree.validate();
  return tree;
}

void write_timeline_csv(std::ostream& os, const EventTimeline& timeline) {
  os << "time,type,samples_added,k\n";
  char buf[40];
  for (const auto& e : timeline.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf << ',' << event_type_name(e.type) << ',' << e.samples_added << ',' << e.k
       << '\n';
  }
}

}  // namespace eicoal
