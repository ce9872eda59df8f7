#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "riskpath/discovery.hpp"
#include "riskpath/ingest.hpp"
#include "riskpath/json_io.hpp"
#include "riskpath/syngen.hpp"

using namespace riskpath;

namespace {

GenSpec small_spec(std::uint64_t seed) {
  GenSpec s;
  s.n_docs = 200;
  s.seed = seed;
  s.entities_per_layer = 80;
  s.planted_chains = {PlantedChainSpec{{Layer::Physical, Layer::Social, Layer::Economic, Layer::Social, Layer::Economic}, 1, {}}};
  return s;
}

AggregateResult ingest_corpus(const GeneratedCorpus& c) {
  std::istringstream triples(c.triples_jsonl), meta_in(c.entities_jsonl);
  ParseResult parsed = parse_triples(triples, TripleFormat::Jsonl);
  auto meta = parse_entity_meta(meta_in);
  return aggregate(canonicalize(std::move(parsed.triples), meta).triples, meta);
}

Pathway chain_pathway(const json& chain, const KnowledgeGraph& g) {
  Pathway p;
  for (const auto& name : chain.at("entities")) p.entities.emplace_back(name.get<std::string>());
  for (std::size_t i = 0; i + 1 < p.entities.size(); ++i) {
    for (const auto& rid : out_adjacency(g, p.entities[i])) {
      const Relation& r = g.relation(rid);
      if (r.target == p.entities[i + 1] && r.predicate == chain.at("predicates")[i]) p.relations.push_back(rid);
    }
  }
  return p;
}

}  // namespace

TEST(Syngen, ZeroDocumentsGivesEmptyCorpus) {
  GenSpec s;
  s.n_docs = 0;
  GeneratedCorpus c = generate(s);
  EXPECT_TRUE(c.triples_jsonl.empty());
  EXPECT_TRUE(c.entities_jsonl.empty());
  EXPECT_TRUE(c.manifest["chains"].empty());
  EXPECT_EQ(c.manifest["counts"]["relations"], 0);
  EXPECT_EQ(c.manifest["counts"]["docs"], 0);
}

TEST(Syngen, SameSeedIsByteIdentical) {
  GeneratedCorpus a = generate(small_spec(4)), b = generate(small_spec(4));
  EXPECT_EQ(a.triples_jsonl, b.triples_jsonl);
  EXPECT_EQ(a.entities_jsonl, b.entities_jsonl);
  EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
  EXPECT_NE(generate(small_spec(5)).triples_jsonl, a.triples_jsonl);
}

TEST(Syngen, PerDocumentCountsStayInRange) {
  GenSpec s = small_spec(2);
  s.relations_min = 3;
  s.relations_max = 6;
  GeneratedCorpus c = generate(s);
  std::map<std::string, int> per_doc;
  std::istringstream in(c.triples_jsonl);
  for (const auto& t : parse_triples(in, TripleFormat::Jsonl).triples) ++per_doc[t.doc_id];
  ASSERT_EQ(per_doc.size(), s.n_docs);
  std::set<int> seen;
  for (const auto& [doc, n] : per_doc) {
    EXPECT_GE(n, 3);
    EXPECT_LE(n, 6);
    seen.insert(n);
  }
  EXPECT_EQ(seen.size(), 4u);  // every count in the range occurs
  const auto& recorded = c.manifest["relations_per_doc"];
  ASSERT_EQ(recorded.size(), s.n_docs);
}

TEST(Syngen, ManifestCountsMatchAggregation) {
  for (std::uint64_t seed : {1, 2, 3}) {
    GeneratedCorpus c = generate(small_spec(seed));
    AggregateResult agg = ingest_corpus(c);
    EXPECT_EQ(agg.entities.size(), c.manifest["counts"]["entities"].get<std::size_t>());
    EXPECT_EQ(agg.relations.size(), c.manifest["counts"]["relations"].get<std::size_t>());
    EXPECT_EQ(agg.stats.doc_count, c.manifest["counts"]["docs"].get<std::size_t>());
    EXPECT_TRUE(agg.rejections.empty());
  }
}

TEST(Syngen, PlantedChainFrequencyEqualsAttestation) {
  GenSpec s = small_spec(8);
  s.planted_chains.push_back(PlantedChainSpec{{Layer::Physical, Layer::Economic, Layer::Social}, 3, {}});
  GeneratedCorpus c = generate(s);
  AggregateResult agg = ingest_corpus(c);
  KnowledgeGraph g = build_graph(agg.entities, agg.relations);
  for (const auto& chain : c.manifest["chains"]) {
    Pathway p = chain_pathway(chain, g);
    ASSERT_EQ(p.relations.size(), p.entities.size() - 1);
    EXPECT_EQ(pathway_frequency(p, agg.stats), chain["attestation"].get<std::int64_t>());
    // Planted edges appear in no other document.
    for (const auto& rid : p.relations)
      EXPECT_EQ(g.relation(rid).doc_ids.size(), static_cast<std::size_t>(chain["attestation"].get<int>()));
  }
}

TEST(Syngen, BackgroundIsBiasedTowardSameLayer) {
  GeneratedCorpus c = generate(small_spec(6));
  AggregateResult agg = ingest_corpus(c);
  KnowledgeGraph g = build_graph(agg.entities, agg.relations);
  std::size_t same = 0;
  for (const Relation& r : g.relations()) same += g.entity(r.source).layer == g.entity(r.target).layer;
  EXPECT_GT(static_cast<double>(same) / static_cast<double>(g.relation_count()), 0.8);
}

TEST(Syngen, CollidingPlantedChainsAreRejected) {
  GenSpec s = small_spec(1);
  s.planted_chains = {PlantedChainSpec{{Layer::Physical, Layer::Social}, 1, {"x", "y"}},
                      PlantedChainSpec{{Layer::Physical, Layer::Social, Layer::Economic}, 1, {"x", "y", "z"}}};
  EXPECT_THROW(generate(s), GenerationError);
}

TEST(Syngen, InvalidSpecsAreRejected) {
  GenSpec s;
  s.relations_min = 0;
  EXPECT_THROW(generate(s), GenerationError);
  s = GenSpec{};
  s.relations_max = 101;
  EXPECT_THROW(generate(s), GenerationError);
  s = GenSpec{};
  s.planted_chains = {PlantedChainSpec{{Layer::Physical, Layer::Social, Layer::Economic, Layer::Social, Layer::Economic,
                                        Layer::Social, Layer::Economic},
                                       1,
                                       {}}};
  EXPECT_THROW(generate(s), GenerationError);
  s.planted_chains = {PlantedChainSpec{{Layer::Physical, Layer::Social}, 0, {}}};
  EXPECT_THROW(generate(s), GenerationError);
}

TEST(Syngen, MalformedLinesAreCountedAndRejectedByIngest) {
  GenSpec s = small_spec(3);
  s.malformed_rate = 0.05;
  GeneratedCorpus c = generate(s);
  std::istringstream in(c.triples_jsonl);
  ParseResult parsed = parse_triples(in, TripleFormat::Jsonl);
  EXPECT_EQ(parsed.errors.size(), c.manifest["counts"]["malformed_lines"].get<std::size_t>());
  EXPECT_GT(parsed.errors.size(), 0u);
  EXPECT_EQ(parsed.triples.size(), c.manifest["counts"]["triples"].get<std::size_t>());
}
