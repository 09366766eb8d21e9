/**
 * Copyright 2026 The kgfusion Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef KGF_STORE_HPP_
#define KGF_STORE_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "common.hpp"

namespace kgf {

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple &) const = default;
};

enum class Split : int { kBackground = 0, kTrain = 1, kValid = 2, kTest = 3 };
inline constexpr std::array<Split, 4> kAllSplits = {Split::kBackground, Split::kTrain, Split::kValid,
                                                    Split::kTest};

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

// Dense label <-> id map. Ids are handed out in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string &label(std::uint32_t id) const { return labels_.at(id); }
  const std::vector<std::string> &labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Reverse of r is r + n_original, identity is 2 * n_original.
struct AugmentedRelationScheme {
  std::size_t n_original = 0;

  std::size_t count() const { return 2 * n_original + 1; }
  RelationId reverse(RelationId r) const {
    return r < n_original ? static_cast<RelationId>(r + n_original) : static_cast<RelationId>(r - n_original);
  }
  RelationId identity() const { return static_cast<RelationId>(2 * n_original); }
  bool is_identity(RelationId r) const { return r == identity(); }
};

struct Edge {
  RelationId relation = 0;
  EntityId tail = 0;
  auto operator<=>(const Edge &) const = default;
};

// One (head, relation) group of out-edges; the unit at which relation
// embeddings are refined.
struct RelationPair {
  EntityId head = 0;
  RelationId relation = 0;
  std::uint32_t edge_begin = 0;
  std::uint32_t edge_end = 0;
};

// Augmented adjacency in CSR form. Edges of a head are sorted by
// (relation, tail); consecutive edges with equal relation form a pair.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t n_entities, const std::vector<Triple> &facts, const AugmentedRelationScheme &scheme);

  std::size_t n_entities() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t n_edges() const { return edges_.size(); }
  std::size_t n_pairs() const { return pairs_.size(); }
  std::size_t n_facts() const { return n_facts_; }

  std::span<const Edge> out_edges(EntityId h) const {
    return {edges_.data() + offsets_[h], edges_.data() + offsets_[h + 1]};
  }
  std::uint32_t edge_offset(EntityId h) const { return offsets_[h]; }
  const Edge &edge(std::uint32_t i) const { return edges_[i]; }
  std::span<const RelationPair> pairs_of(EntityId h) const {
    return {pairs_.data() + pair_offsets_[h], pairs_.data() + pair_offsets_[h + 1]};
  }
  std::uint32_t pair_index(EntityId h) const { return pair_offsets_[h]; }
  const RelationPair &pair(std::uint32_t p) const { return pairs_[p]; }

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> pair_offsets_;
  std::vector<RelationPair> pairs_;
  std::size_t n_facts_ = 0;
};

// Which facts make up the message-passing graph. Training propagates over
// background knowledge only so a training query never sees its own answer
// edge; evaluation adds the training facts.
enum class GraphView { kTraining, kInference };

class TripleStore {
 public:
  TripleStore() = default;

  // Reads `head<TAB>relation<TAB>tail` lines into `split`. Returns the
  // number of distinct triples in the file.
  std::size_t load_triples(const std::filesystem::path &path, Split split);
  // Adds one labelled triple; returns false if it was already in the split.
  bool add_triple(std::string_view head, std::string_view relation, std::string_view tail, Split split);
  EntityId add_entity(std::string_view label) { return entities_.intern(label); }
  RelationId add_relation(std::string_view label);

  AugmentedRelationScheme augment();
  bool augmented() const { return scheme_.has_value(); }
  const AugmentedRelationScheme &scheme() const;

  std::span<const Edge> neighbors(EntityId h, GraphView view = GraphView::kInference) const;
  const Graph &graph(GraphView view) const;
  bool is_known(EntityId h, RelationId r, EntityId t) const;
  std::size_t n_known() const { return known_.size(); }

  const Vocabulary &entities() const { return entities_; }
  const Vocabulary &relations() const { return relations_; }
  std::size_t n_entities() const { return entities_.size(); }
  std::size_t n_relations() const { return relations_.size(); }
  std::size_t n_relations_augmented() const { return scheme().count(); }
  std::string relation_label(RelationId r) const;

  const std::vector<Triple> &split(Split s) const { return splits_[static_cast<int>(s)]; }
  std::vector<Triple> &mutable_split(Split s);

 private:
  std::uint64_t key(EntityId h, RelationId r, EntityId t) const;

  Vocabulary entities_;
  Vocabulary relations_;
  std::array<std::vector<Triple>, 4> splits_;
  std::array<std::unordered_set<std::uint64_t>, 4> seen_;
  std::optional<AugmentedRelationScheme> scheme_;
  Graph training_graph_;
  Graph inference_graph_;
  std::unordered_set<std::uint64_t> known_;
};

// Loads background/train/valid/test.txt from a dataset directory and
// augments. train.txt is required; the others may be absent.
TripleStore load_dataset(const std::filesystem::path &dir);
void write_split(const TripleStore &store, Split split, const std::filesystem::path &path);
void write_dataset(const TripleStore &store, const std::filesystem::path &dir);

std::vector<std::vector<Triple>> kfold_split(const std::vector<Triple> &triples, std::size_t k, std::uint64_t seed);

struct SyntheticSplit {
  double background = 0.0;
  double valid = 0.0;
  double test = 0.0;
};

// Uniformly sampled distinct facts over entities e0.. and relations r0..;
// every fact lands in the train split unless `split` moves a share
// elsewhere. The store is returned un-augmented.
TripleStore generate_synthetic(std::size_t n_entities, std::size_t n_relations, std::size_t n_facts,
                               std::uint64_t seed, const SyntheticSplit &split = {});

}  // namespace kgf

#endif  // KGF_STORE_HPP_
