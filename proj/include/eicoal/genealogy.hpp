#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eicoal/common.hpp"
#include "eicoal/rng.hpp"

namespace eicoal {

// Events of different kinds closer together than this (in days) are either
// merged (co-dated samplings, grid collisions) or rejected (coalescences).
inline constexpr double kTimeTolerance = 1e-9;

enum class EventType { Sampling, Coalescent, Grid };

const char* event_type_name(EventType t);

struct TimelineEvent {
  double time = 0.0;      // backwards days; 0 at the most recent tip
  EventType type = EventType::Sampling;
  int samples_added = 0;  // > 0 only for sampling events
  int k = 0;              // active lineages after the event
};

// Ordered backwards-time record of what the model treats as data: when
// lineages were added (sampling), when pairs merged (coalescence), and where
// the reproduction-number changepoints sit (grid).
struct EventTimeline {
  std::vector<TimelineEvent> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  const TimelineEvent& operator[](std::size_t i) const { return events[i]; }

  double span() const { return events.empty() ? 0.0 : events.back().time; }
  int total_tips() const;
  int coalescent_count() const;
  std::vector<double> coalescent_times() const;

  void validate() const;
};

struct TreeNode {
  int parent = -1;            // -1 for the root
  double branch_length = 0.0; // to the parent, days; unused on the root
  std::string label;          // tips carry labels, internals may
  std::vector<int> children;  // empty for tips
};

struct SampledTree {
  std::vector<TreeNode> nodes;
  int root = -1;

  bool is_tip(int id) const { return nodes[static_cast<std::size_t>(id)].children.empty(); }
  int tip_count() const;
  // Root-to-node path length for every node (root depth 0).
  std::vector<double> depths() const;
  // Days before the most recent tip, per tip id (non-tips get 0).
  std::vector<double> tip_offsets() const;

  void validate() const;
};

SampledTree parse_newick(const std::string& text);
std::string to_newick(const SampledTree& tree);

EventTimeline extract_events(const SampledTree& tree);
EventTimeline insert_grid(const EventTimeline& timeline, double changepoint_interval);

// Synthesizes a labeled topology consistent with a timeline by joining
// uniformly chosen lineage pairs at each coalescence. Any such topology maps
// back to the same timeline.
SampledTree tree_from_timeline(const EventTimeline& timeline, Rng& rng);

void write_timeline_csv(std::ostream& os, const EventTimeline& timeline);

}  // namespace eicoal
