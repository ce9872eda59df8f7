#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "riskpath/discovery.hpp"
#include "support.hpp"

using namespace riskpath;
using namespace riskpath::testing;

namespace {

ScoredPathway scored(std::vector<std::string> entities, double total) {
  ScoredPathway sp;
  for (auto& e : entities) sp.pathway.entities.emplace_back(e);
  for (std::size_t i = 1; i < entities.size(); ++i) sp.pathway.relations.emplace_back("r" + std::to_string(i));
  sp.score.total = total;
  return sp;
}

struct Case {
  KnowledgeGraph graph;
  CorpusStats stats;
  CentralityScores centrality;
};

Case make_case(std::uint64_t seed, const RandomGraphSpec& spec) {
  Case c{random_graph(seed, spec), {}, {}};
  c.stats = corpus_stats(c.graph);
  c.centrality = pagerank(c.graph, ScoringConfig{});
  return c;
}

}  // namespace

TEST(Discover, NoPhysicalEntitiesGivesEmptyResult) {
  KnowledgeGraph g = build_graph({entity("S", Layer::Social), entity("E", Layer::Economic)}, {relation("r", "S", "E")});
  DiscoveryResult r = discover(g, corpus_stats(g), pagerank(g, {}), ScoringConfig{});
  EXPECT_TRUE(r.pathways.empty());
  EXPECT_EQ(r.sources_processed, 0u);
}

TEST(Discover, ThreeNodeChainHandEvaluated) {
  KnowledgeGraph g = build_graph({entity("P", Layer::Physical, 0.9), entity("S", Layer::Social, 0.6), entity("E", Layer::Economic, 0.3)},
                                 {relation("r1", "P", "S", {"d1"}), relation("r2", "S", "E", {"d1"})});
  ScoringConfig c;
  c.theta_novelty = 0.0;
  DiscoveryResult r = discover(g, corpus_stats(g), pagerank(g, c), c, {.workers = 1});
  ASSERT_EQ(r.pathways.size(), 1u);
  const auto& s = r.pathways[0].score;
  EXPECT_EQ(r.f_max_used, 1);
  EXPECT_EQ(r.candidates_enumerated, 1u);
  EXPECT_EQ(s.f, 1);
  EXPECT_EQ(s.lf, 0.0);
  EXPECT_EQ(s.clc, 1.0);

  const auto pr = dense_pagerank(g, 0.85);
  const double max = *std::max_element(pr.begin(), pr.end());
  const double ip = (pr[0] / max * 0.3 + pr[1] / max * 0.9 + pr[2] / max * 0.6) / 3.0;  // ids sort E, P, S
  EXPECT_NEAR(s.ip, ip, 1e-9);
  EXPECT_NEAR(s.total, 0.3 + 0.2 * ip, 1e-9);
  EXPECT_NEAR(s.total, 0.3 * s.clc + 0.2 * s.ip, 1e-12);
}

TEST(Discover, InvalidConfigThrows) {
  KnowledgeGraph g = build_graph({entity("P", Layer::Physical)}, {});
  ScoringConfig c;
  c.d_max = 0;
  EXPECT_THROW(discover(g, corpus_stats(g), pagerank(g, {}), c), ConfigError);
}

TEST(Oracle, EmptyGraphAndSingleCrossingEdge) {
  KnowledgeGraph empty = build_graph({}, {});
  EXPECT_TRUE(enumerate_oracle(empty, {}, {}, ScoringConfig{}).pathways.empty());
  KnowledgeGraph g = build_graph({entity("P", Layer::Physical), entity("S", Layer::Social)}, {relation("r", "P", "S")});
  ScoringConfig c;
  c.theta_novelty = 0.0;
  DiscoveryResult r = enumerate_oracle(g, corpus_stats(g), pagerank(g, c), c);
  EXPECT_EQ(r.candidates_enumerated, 0u);
  EXPECT_TRUE(r.pathways.empty());
}

TEST(RankTopK, ShorterPathwayWinsTie) {
  ScoringConfig c;
  auto out = rank_top_k({scored({"a", "b", "c", "d"}, 0.8), scored({"z", "y", "x"}, 0.8)}, c);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].pathway.entities.size(), 3u);
}

TEST(RankTopK, ThresholdIsStrict) {
  ScoringConfig c;
  auto out = rank_top_k({scored({"a", "b", "c"}, 0.7), scored({"a", "b", "d"}, 0.7000000001)}, c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].pathway.entities.back(), EntityId("d"));
}

TEST(RankTopK, EntityThenRelationSequenceBreakTies) {
  ScoringConfig c;
  ScoredPathway a = scored({"a", "c", "d"}, 0.9), b = scored({"a", "b", "e"}, 0.9), d = scored({"a", "b", "e"}, 0.9);
  d.pathway.relations[1] = RelationId("r0");
  auto out = rank_top_k({a, b, d}, c);
  EXPECT_EQ(out[0], d);
  EXPECT_EQ(out[1], b);
  EXPECT_EQ(out[2], a);
}

TEST(RankTopK, ShuffledInputGivesIdenticalOutput) {
  std::mt19937 rng(5);
  std::vector<ScoredPathway> items;
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> ids;
    const int n = 3 + static_cast<int>(rng() % 3);
    for (int j = 0; j < n; ++j) ids.push_back("e" + std::to_string(rng() % 6));
    items.push_back(scored(ids, 0.7 + 0.05 * static_cast<double>(rng() % 5)));
  }
  ScoringConfig c;
  c.top_k = 40;
  auto base = rank_top_k(items, c);
  EXPECT_EQ(base.size(), 40u);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(rank_top_k(items, c), base);
  }
}

TEST(UpperBoundPrune, RequiresEdgeMax) {
  ScoringConfig c;
  EXPECT_THROW(upper_bound_prune(PartialPathState{}, c), ConfigError);
}

TEST(UpperBoundPrune, ThetaZeroNeverPrunes) {
  ScoringConfig c;
  c.fmax_mode = FmaxMode::EdgeMax;
  c.theta_novelty = 0.0;
  for (std::size_t n = 1; n <= 5; ++n)
    for (int cross = 0; cross < static_cast<int>(n); ++cross)
      EXPECT_FALSE(upper_bound_prune(PartialPathState{n, cross, 0.0, 0.0}, c));
}

TEST(UpperBoundPrune, ThetaOnePrunesWheneverBoundBelowOne) {
  ScoringConfig c;
  c.fmax_mode = FmaxMode::EdgeMax;
  c.theta_novelty = 1.0;
  EXPECT_TRUE(upper_bound_prune(PartialPathState{1, 0, 0.5, 0.5}, c));
  EXPECT_TRUE(upper_bound_prune(PartialPathState{3, 1, 3.0, 1.0}, c));
}

TEST(UpperBoundPrune, ThetaOneDiscoverEqualsOracle) {
  for (auto fm : {FmaxMode::EdgeMax, FmaxMode::PathwayMax}) {
    Case k = make_case(12, {.nodes = 40, .edges = 120});
    ScoringConfig c;
    c.fmax_mode = fm;
    c.theta_novelty = 1.0;
    DiscoveryResult got = discover(k.graph, k.stats, k.centrality, c, {.workers = 2});
    EXPECT_TRUE(got.pathways.empty());
    EXPECT_EQ(got.pathways, enumerate_oracle(k.graph, k.stats, k.centrality, c).pathways);
  }
}

TEST(UpperBoundPrune, NeverCutsAQualifyingExtension) {
  // Exhaustive check of admissibility on small states: any completion the
  // bound says cannot clear theta really cannot.
  ScoringConfig c;
  c.fmax_mode = FmaxMode::EdgeMax;
  for (double theta : {0.3, 0.55, 0.7, 0.8}) {
    c.theta_novelty = theta;
    for (std::size_t n = 1; n <= 4; ++n)
      for (int cross = 0; cross < static_cast<int>(n); ++cross)
        for (double max_impact : {0.25, 0.5, 1.0}) {
          const double sum = max_impact * static_cast<double>(n) * 0.5;
          if (!upper_bound_prune(PartialPathState{n, cross, sum, max_impact}, c)) continue;
          for (std::size_t extra = 1; n + extra <= static_cast<std::size_t>(c.d_max) + 1; ++extra) {
            const std::size_t total_n = n + extra;
            const double clc = static_cast<double>(cross + static_cast<int>(extra)) / static_cast<double>(total_n - 1);
            const double ip = (sum + max_impact * static_cast<double>(extra)) / static_cast<double>(total_n);
            const double best = c.alpha + c.beta * std::min(1.0, clc) + c.gamma * std::min(1.0, ip);
            EXPECT_LE(best, theta + 1e-9) << "n=" << n << " cross=" << cross << " extra=" << extra;
          }
        }
  }
}

class OracleEquivalence : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OracleEquivalence, AllModesAndWorkerCounts) {
  const std::uint64_t seed = GetParam();
  std::mt19937_64 rng(seed * 7919);
  const std::size_t nodes = 10 + rng() % 120;
  const std::size_t edges = std::min<std::size_t>(600, nodes * (1 + rng() % 3));
  Case k = make_case(seed, {.nodes = nodes, .edges = edges, .doc_pool = 4 + rng() % 20});
  for (auto fm : {FmaxMode::PathwayMax, FmaxMode::EdgeMax})
    for (auto freq : {FreqMode::Relations, FreqMode::Entities})
      for (double theta : {0.0, 0.55, 0.7}) {
        ScoringConfig c;
        c.fmax_mode = fm;
        c.freq_mode = freq;
        c.theta_novelty = theta;
        c.top_k = 1 + static_cast<int>(rng() % 60);
        c.d_max = 3 + static_cast<int>(rng() % 3);
        const DiscoveryResult oracle = enumerate_oracle(k.graph, k.stats, k.centrality, c);
        for (bool prune : {true, false}) {
          c.prune = prune;
          for (unsigned w : {1u, 2u, 8u}) {
            DiscoveryResult got = discover(k.graph, k.stats, k.centrality, c, {.workers = w});
            ASSERT_EQ(got.pathways, oracle.pathways)
                << "seed " << seed << " " << to_string(fm) << " " << to_string(freq) << " theta " << theta
                << " prune " << prune << " workers " << w;
            EXPECT_EQ(got.f_max_used, oracle.f_max_used);
            EXPECT_EQ(got.sources_processed, oracle.sources_processed);
            if (!(prune && fm == FmaxMode::EdgeMax)) {
              EXPECT_EQ(got.candidates_enumerated, oracle.candidates_enumerated);
            }
          }
        }
      }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OracleEquivalence, ::testing::Range<std::uint64_t>(1, 13));

TEST(Discover, UndirectedModeMatchesOracle) {
  Case k = make_case(31, {.nodes = 40, .edges = 70});
  ScoringConfig c;
  c.undirected = true;
  c.theta_novelty = 0.5;
  c.top_k = 50;
  c.d_max = 4;
  EXPECT_EQ(discover(k.graph, k.stats, k.centrality, c, {.workers = 3}).pathways,
            enumerate_oracle(k.graph, k.stats, k.centrality, c).pathways);
}

TEST(Discover, ReturnedPathwaysSatisfyConstraints) {
  Case k = make_case(77, {.nodes = 120, .edges = 400});
  ScoringConfig c;
  c.theta_novelty = 0.6;
  c.top_k = 500;
  DiscoveryResult r = discover(k.graph, k.stats, k.centrality, c);
  ASSERT_FALSE(r.pathways.empty());
  for (const auto& sp : r.pathways) {
    const auto& p = sp.pathway;
    EXPECT_EQ(k.graph.entity(p.entities.front()).layer, Layer::Physical);
    EXPECT_EQ(std::set<EntityId>(p.entities.begin(), p.entities.end()).size(), p.entities.size());
    EXPECT_GE(cross_layer_count(p, k.graph), 2);
    EXPECT_GE(p.relations.size(), 2u);
    EXPECT_LE(p.relations.size(), 5u);
    EXPECT_GT(sp.score.total, c.theta_novelty);
    for (std::size_t i = 0; i < p.relations.size(); ++i) {
      const Relation& rel = k.graph.relation(p.relations[i]);
      EXPECT_EQ(rel.source, p.entities[i]);
      EXPECT_EQ(rel.target, p.entities[i + 1]);
    }
  }
  EXPECT_TRUE(std::is_sorted(r.pathways.begin(), r.pathways.end(), ranks_before));
}

TEST(Discover, RaisingDepthNeverRemovesCandidates) {
  Case k = make_case(8, {.nodes = 60, .edges = 150});
  ScoringConfig c;
  c.theta_novelty = 0.0;
  std::uint64_t prev = 0;
  for (int d = 1; d <= 5; ++d) {
    c.d_max = d;
    auto r = discover(k.graph, k.stats, k.centrality, c, {.workers = 2});
    EXPECT_GE(r.candidates_enumerated, prev);
    prev = r.candidates_enumerated;
  }
}

TEST(Discover, LoweringThetaKeepsReturnedPathways) {
  Case k = make_case(21, {.nodes = 80, .edges = 240});
  ScoringConfig c;
  c.top_k = 100000;
  c.theta_novelty = 0.75;
  auto high = discover(k.graph, k.stats, k.centrality, c);
  c.theta_novelty = 0.6;
  auto low = discover(k.graph, k.stats, k.centrality, c);
  for (const auto& sp : high.pathways) EXPECT_NE(std::find(low.pathways.begin(), low.pathways.end(), sp), low.pathways.end());
}

TEST(Discover, DeterministicAcrossRunsAndWorkers) {
  Case k = make_case(4, {.nodes = 150, .edges = 450});
  ScoringConfig c;
  c.theta_novelty = 0.5;
  c.top_k = 200;
  auto base = discover(k.graph, k.stats, k.centrality, c, {.workers = 1});
  for (unsigned w : {1u, 2u, 8u, 0u}) EXPECT_EQ(discover(k.graph, k.stats, k.centrality, c, {.workers = w}), base);
}
