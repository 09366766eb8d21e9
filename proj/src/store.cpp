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
#include "store.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "linalg.hpp"

namespace kgf {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kBackground: return "background";
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  for (Split s : kAllSplits)
    if (split_name(s) == name) return s;
  return std::nullopt;
}

std::uint32_t Vocabulary::intern(std::string_view label) {
  auto it = ids_.find(std::string(label));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  ids_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

Graph::Graph(std::size_t n_entities, const std::vector<Triple> &facts, const AugmentedRelationScheme &scheme)
    : n_facts_(facts.size()) {
  std::vector<std::vector<Edge>> lists(n_entities);
  for (const Triple &f : facts) {
    lists[f.head].push_back({f.relation, f.tail});
    lists[f.tail].push_back({scheme.reverse(f.relation), f.head});
  }
  for (std::size_t e = 0; e < n_entities; ++e) lists[e].push_back({scheme.identity(), static_cast<EntityId>(e)});

  offsets_.assign(n_entities + 1, 0);
  pair_offsets_.assign(n_entities + 1, 0);
  for (std::size_t e = 0; e < n_entities; ++e) {
    auto &l = lists[e];
    std::sort(l.begin(), l.end());
    offsets_[e] = static_cast<std::uint32_t>(edges_.size());
    pair_offsets_[e] = static_cast<std::uint32_t>(pairs_.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
      const auto idx = static_cast<std::uint32_t>(edges_.size());
      if (i == 0 || l[i].relation != l[i - 1].relation)
        pairs_.push_back({static_cast<EntityId>(e), l[i].relation, idx, idx});
      edges_.push_back(l[i]);
      pairs_.back().edge_end = idx + 1;
    }
  }
  offsets_[n_entities] = static_cast<std::uint32_t>(edges_.size());
  pair_offsets_[n_entities] = static_cast<std::uint32_t>(pairs_.size());
}

RelationId TripleStore::add_relation(std::string_view label) {
  require(!augmented(), ErrorKind::kUsage, "cannot add relations after augmentation");
  return relations_.intern(label);
}

bool TripleStore::add_triple(std::string_view head, std::string_view relation, std::string_view tail,
                             Split split) {
  require(!augmented(), ErrorKind::kUsage, "cannot add triples after augmentation");
  const Triple t{entities_.intern(head), relations_.intern(relation), entities_.intern(tail)};
  // Pre-augmentation key space: plain 21-bit packing is enough to dedupe.
  const std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 42) | (static_cast<std::uint64_t>(t.relation) << 21) |
                          static_cast<std::uint64_t>(t.tail);
  require(t.head < (1u << 21) && t.tail < (1u << 21) && t.relation < (1u << 21), ErrorKind::kData,
          "vocabulary too large");
  if (!seen_[static_cast<int>(split)].insert(k).second) return false;
  splits_[static_cast<int>(split)].push_back(t);
  return true;
}

std::size_t TripleStore::load_triples(const std::filesystem::path &path, Split split) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kData, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t distinct = 0;
  std::size_t nonblank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++nonblank;
    std::array<std::string_view, 3> fields;
    std::size_t n = 0;
    std::size_t start = 0;
    std::string_view sv(line);
    while (true) {
      const auto tab = sv.find('\t', start);
      const auto piece = sv.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
      if (n < 3) fields[n] = piece;
      ++n;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (n != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      fail(ErrorKind::kData, path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                                 std::to_string(n));
    if (add_triple(fields[0], fields[1], fields[2], split)) ++distinct;
  }
  require(nonblank > 0, ErrorKind::kData, path.string() + ": no triples");
  return distinct;
}

std::vector<Triple> &TripleStore::mutable_split(Split s) {
  require(!augmented(), ErrorKind::kUsage, "store is immutable after augmentation");
  return splits_[static_cast<int>(s)];
}

std::uint64_t TripleStore::key(EntityId h, RelationId r, EntityId t) const {
  const auto n_ent = static_cast<std::uint64_t>(entities_.size());
  const auto n_rel = static_cast<std::uint64_t>(scheme_->count());
  return (static_cast<std::uint64_t>(h) * n_rel + r) * n_ent + t;
}

AugmentedRelationScheme TripleStore::augment() {
  require(!augmented(), ErrorKind::kUsage, "store already augmented");
  require(entities_.size() > 0, ErrorKind::kData, "no triples");
  scheme_ = AugmentedRelationScheme{relations_.size()};

  auto merged = [&](std::initializer_list<Split> parts) {
    std::vector<Triple> out;
    for (Split s : parts) out.insert(out.end(), split(s).begin(), split(s).end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  const auto inference = merged({Split::kBackground, Split::kTrain});
  const auto training = split(Split::kBackground).empty() ? merged({Split::kTrain}) : merged({Split::kBackground});
  inference_graph_ = Graph(entities_.size(), inference, *scheme_);
  training_graph_ = Graph(entities_.size(), training, *scheme_);

  for (const auto &part : splits_) {
    for (const Triple &t : part) {
      known_.insert(key(t.head, t.relation, t.tail));
      known_.insert(key(t.tail, scheme_->reverse(t.relation), t.head));
    }
  }
  for (auto &s : seen_) s = {};
  return *scheme_;
}

const AugmentedRelationScheme &TripleStore::scheme() const {
  require(augmented(), ErrorKind::kUsage, "store not augmented");
  return *scheme_;
}

const Graph &TripleStore::graph(GraphView view) const {
  require(augmented(), ErrorKind::kUsage, "store not augmented");
  return view == GraphView::kTraining ? training_graph_ : inference_graph_;
}

std::span<const Edge> TripleStore::neighbors(EntityId h, GraphView view) const {
  require(h < entities_.size(), ErrorKind::kUsage, "entity id " + std::to_string(h) + " out of range");
  return graph(view).out_edges(h);
}

bool TripleStore::is_known(EntityId h, RelationId r, EntityId t) const {
  if (!augmented() || h >= entities_.size() || t >= entities_.size() || r >= scheme_->count()) return false;
  return known_.count(key(h, r, t)) > 0;
}

std::string TripleStore::relation_label(RelationId r) const {
  const auto &s = scheme();
  if (s.is_identity(r)) return "identity";
  if (r >= s.n_original) return relations_.label(r - s.n_original) + "_inv";
  return relations_.label(r);
}

TripleStore load_dataset(const std::filesystem::path &dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::kData, "dataset directory not found: " + dir.string());
  TripleStore store;
  for (Split s : kAllSplits) {
    const auto p = dir / (std::string(split_name(s)) + ".txt");
    if (std::filesystem::exists(p)) {
      store.load_triples(p, s);
    } else {
      require(s != Split::kTrain, ErrorKind::kData, "missing " + p.string());
    }
  }
  store.augment();
  return store;
}

void write_split(const TripleStore &store, Split split, const std::filesystem::path &path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::kData, "cannot write " + path.string());
  for (const Triple &t : store.split(split))
    out << store.entities().label(t.head) << '\t' << store.relations().label(t.relation) << '\t'
        << store.entities().label(t.tail) << '\n';
}

void write_dataset(const TripleStore &store, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  for (Split s : kAllSplits)
    if (!store.split(s).empty()) write_split(store, s, dir / (std::string(split_name(s)) + ".txt"));
}

std::vector<std::vector<Triple>> kfold_split(const std::vector<Triple> &triples, std::size_t k, std::uint64_t seed) {
  require(k >= 2, ErrorKind::kUsage, "k must be at least 2");
  require(k <= triples.size(), ErrorKind::kUsage,
          "k=" + std::to_string(k) + " exceeds the number of triples (" + std::to_string(triples.size()) + ")");
  std::vector<Triple> shuffled = triples;
  std::mt19937_64 rng(seed);
  portable_shuffle(shuffled, rng);
  std::vector<std::vector<Triple>> folds(k);
  const std::size_t base = shuffled.size() / k;
  const std::size_t extra = shuffled.size() % k;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t n = base + (i < extra ? 1 : 0);
    folds[i].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                    shuffled.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return folds;
}

TripleStore generate_synthetic(std::size_t n_entities, std::size_t n_relations, std::size_t n_facts,
                               std::uint64_t seed, const SyntheticSplit &split) {
  require(n_entities >= 1 && n_relations >= 1, ErrorKind::kUsage, "need at least one entity and one relation");
  const std::uint64_t capacity = static_cast<std::uint64_t>(n_entities) * n_entities * n_relations;
  require(n_facts <= capacity, ErrorKind::kUsage,
          "cannot draw " + std::to_string(n_facts) + " distinct facts from " + std::to_string(capacity) +
              " possible triples");
  require(split.background >= 0 && split.valid >= 0 && split.test >= 0 &&
              split.background + split.valid + split.test < 1.0 + 1e-12,
          ErrorKind::kUsage, "split fractions must be non-negative and sum to at most 1");

  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> codes;
  if (n_facts * 2 >= capacity) {
    codes.resize(capacity);
    for (std::uint64_t i = 0; i < capacity; ++i) codes[i] = i;
    portable_shuffle(codes, rng);
    codes.resize(n_facts);
  } else {
    std::set<std::uint64_t> chosen;
    while (codes.size() < n_facts) {
      const std::uint64_t c = rng() % capacity;
      if (chosen.insert(c).second) codes.push_back(c);
    }
  }

  TripleStore store;
  for (std::size_t e = 0; e < n_entities; ++e) store.add_entity("e" + std::to_string(e));
  for (std::size_t r = 0; r < n_relations; ++r) store.add_relation("r" + std::to_string(r));

  const auto n_bg = static_cast<std::size_t>(split.background * static_cast<double>(n_facts));
  const auto n_valid = static_cast<std::size_t>(split.valid * static_cast<double>(n_facts));
  const auto n_test = static_cast<std::size_t>(split.test * static_cast<double>(n_facts));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::uint64_t c = codes[i];
    const auto t = c % n_entities;
    const auto r = (c / n_entities) % n_relations;
    const auto h = c / (n_entities * n_relations);
    Split dest = Split::kTrain;
    if (i < n_bg) dest = Split::kBackground;
    else if (i < n_bg + n_valid) dest = Split::kValid;
    else if (i < n_bg + n_valid + n_test) dest = Split::kTest;
    store.add_triple("e" + std::to_string(h), "r" + std::to_string(r), "e" + std::to_string(t), dest);
  }
  return store;
}

}  // namespace kgf
