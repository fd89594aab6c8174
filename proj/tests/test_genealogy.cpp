#include <doctest.h>

#include <sstream>

#include "eicoal/genealogy.hpp"
#include "oracles.hpp"

using namespace eicoal;

TEST_CASE("parse_newick: symmetric cherry") {
  const SampledTree tree = parse_newick("(A:1.0,B:1.0);");
  CHECK(tree.tip_count() == 2);
  const auto off = tree.tip_offsets();
  const auto depths = tree.depths();
  for (int n = 0; n < static_cast<int>(tree.nodes.size()); ++n) {
    if (tree.is_tip(n)) {
      CHECK(off[static_cast<std::size_t>(n)] == doctest::Approx(0.0));
      CHECK(depths[static_cast<std::size_t>(n)] == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("parse_newick: heterochronous offsets from path lengths") {
  const SampledTree tree = parse_newick("((A:1,B:1):1,C:1.5);");
  const auto off = tree.tip_offsets();
  for (int n = 0; n < static_cast<int>(tree.nodes.size()); ++n) {
    if (!tree.is_tip(n)) continue;
    const auto& label = tree.nodes[static_cast<std::size_t>(n)].label;
    if (label == "C") CHECK(off[static_cast<std::size_t>(n)] == doctest::Approx(0.5));
    if (label == "A" || label == "B")
      CHECK(off[static_cast<std::size_t>(n)] == doctest::Approx(0.0));
  }
}

TEST_CASE("parse_newick: error positions and validation") {
  CHECK_THROWS_AS(parse_newick("(A:1,B:1"), ParseError);
  CHECK_THROWS_AS(parse_newick(""), ParseError);
  CHECK_THROWS_AS(parse_newick("(A:1,B:1,C:1);"), ValidationError);  // polytomy
  CHECK_THROWS_AS(parse_newick("(A:-1,B:1);"), ValidationError);
  CHECK_THROWS_AS(parse_newick("(A:1);"), ValidationError);  // single child
  // Missing branch length is a syntax error under the dated-tips contract.
  CHECK_THROWS_AS(parse_newick("(A,B:1);"), ParseError);
}

TEST_CASE("newick round trip") {
  const std::string text = "((A:1.25,B:1):0.5,C:1.5);";
  const SampledTree tree = parse_newick(text);
  const SampledTree again = parse_newick(to_newick(tree));
  CHECK(again.tip_count() == tree.tip_count());
  const auto a = tree.tip_offsets();
  const auto b = again.tip_offsets();
  REQUIRE(a.size() == b.size());
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]));
}

TEST_CASE("extract_events: two-tip isochronous tree") {
  const EventTimeline tl = extract_events(parse_newick("(A:1.0,B:1.0);"));
  REQUIRE(tl.size() == 2);
  CHECK(tl[0].time == doctest::Approx(0.0));
  CHECK(tl[0].type == EventType::Sampling);
  CHECK(tl[0].samples_added == 2);
  CHECK(tl[0].k == 2);
  CHECK(tl[1].time == doctest::Approx(1.0));
  CHECK(tl[1].type == EventType::Coalescent);
  CHECK(tl[1].k == 1);
}

TEST_CASE("extract_events: three-tip heterochronous tree") {
  // A at depth 2.5 (most recent tip), B and C co-dated at offset 0.5.
  const EventTimeline tl = extract_events(parse_newick("((A:1.5,B:1):1,C:2);"));
  REQUIRE(tl.size() == 4);
  CHECK(tl[0].type == EventType::Sampling);
  CHECK(tl[0].samples_added == 1);
  CHECK(tl[0].k == 1);
  CHECK(tl[1].type == EventType::Sampling);
  CHECK(tl[1].time == doctest::Approx(0.5));
  CHECK(tl[1].samples_added == 2);
  CHECK(tl[1].k == 3);
  CHECK(tl[2].type == EventType::Coalescent);
  CHECK(tl[2].time == doctest::Approx(1.5));
  CHECK(tl[2].k == 2);
  CHECK(tl[3].type == EventType::Coalescent);
  CHECK(tl[3].time == doctest::Approx(2.5));
  CHECK(tl[3].k == 1);
  CHECK(tl.coalescent_count() == tl.total_tips() - 1);
}

TEST_CASE("extract_events rejects simultaneous coalescences") {
  CHECK_THROWS_AS(extract_events(parse_newick("((A:1,B:1):0,C:1);")),
                  ValidationError);
}

TEST_CASE("insert_grid: weekly changepoints over 21 days") {
  const EventTimeline tl = extract_events(parse_newick("(A:21,B:21);"));
  const EventTimeline g = insert_grid(tl, 7.0);
  REQUIRE(g.size() == 4);  // sampling, grid 7, grid 14, coalescent 21
  CHECK(g[1].type == EventType::Grid);
  CHECK(g[1].time == doctest::Approx(7.0));
  CHECK(g[1].k == 2);
  CHECK(g[2].type == EventType::Grid);
  CHECK(g[2].time == doctest::Approx(14.0));
  CHECK(g[3].type == EventType::Coalescent);

  SUBCASE("idempotent for a fixed interval") {
    const EventTimeline gg = insert_grid(g, 7.0);
    REQUIRE(gg.size() == g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      CHECK(gg[j].time == g[j].time);
      CHECK(gg[j].type == g[j].type);
    }
  }
  SUBCASE("interval larger than the span changes nothing") {
    const EventTimeline same = insert_grid(tl, 30.0);
    CHECK(same.size() == tl.size());
  }
  SUBCASE("paper default interval is seven days") {
    const EventTimeline week = insert_grid(tl, 7.0);
    int grids = 0;
    for (const auto& e : week.events)
      if (e.type == EventType::Grid) ++grids;
    CHECK(grids == 2);
  }
}

TEST_CASE("timeline conservation and synthesis round trip") {
  EventTimeline tl;
  tl.events = {{0.0, EventType::Sampling, 3, 3},
               {1.3, EventType::Sampling, 2, 5},
               {2.1, EventType::Coalescent, 0, 4},
               {3.7, EventType::Coalescent, 0, 3},
               {4.0, EventType::Coalescent, 0, 2},
               {5.5, EventType::Coalescent, 0, 1}};
  tl.validate();
  CHECK(tl.total_tips() - tl.coalescent_count() == tl.events.back().k);

  Rng rng(99);
  const SampledTree tree = tree_from_timeline(tl, rng);
  CHECK(tree.tip_count() == 5);
  const EventTimeline back = extract_events(parse_newick(to_newick(tree)));
  REQUIRE(back.size() == tl.size());
  for (std::size_t j = 0; j < tl.size(); ++j) {
    CHECK(back[j].time == doctest::Approx(tl[j].time).epsilon(1e-9));
    CHECK(back[j].type == tl[j].type);
    CHECK(back[j].samples_added == tl[j].samples_added);
    CHECK(back[j].k == tl[j].k);
  }
}

TEST_CASE("timeline csv export") {
  const EventTimeline tl = extract_events(parse_newick("(A:1.0,B:1.0);"));
  std::ostringstream ss;
  write_timeline_csv(ss, tl);
  CHECK(ss.str() == "time,type,samples_added,k\n0,sampling,2,2\n1,coalescent,0,1\n");
}
