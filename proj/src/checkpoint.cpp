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
#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace kgf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Checkpoint make_checkpoint(const TrainConfig &config, const TripleStore &store, const Model &model,
                           std::uint64_t epochs_completed, double best_valid_mrr, std::uint64_t best_epoch) {
  Checkpoint c;
  c.config = config;
  c.entities = store.entities().labels();
  c.relations = store.relations().labels();
  c.params = model.params();
  c.rng_seed = model.seed();
  c.epochs_completed = epochs_completed;
  c.best_valid_mrr = best_valid_mrr;
  c.best_epoch = best_epoch;
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ckpt) {
  json header;
  header["format"] = "kgf-checkpoint";
  header["version"] = ckpt.version;
  json cfg = json::object();
  for (const auto &[k, v] : config_items(ckpt.config)) cfg[k] = v;
  header["config"] = cfg;
  header["entities"] = ckpt.entities;
  header["relations"] = ckpt.relations;
  json tensors = json::array();
  std::size_t total = 0;
  for_each_tensor(ckpt.params, [&](const std::string &name, const std::string &family, const Matrix &m) {
    tensors.push_back({{"name", name}, {"group", family}, {"rows", m.rows}, {"cols", m.cols}});
    total += m.size();
  });
  header["tensors"] = tensors;
  header["rng"] = {{"seed", ckpt.rng_seed}, {"epochs_completed", ckpt.epochs_completed}};
  header["best_valid_mrr"] = ckpt.best_valid_mrr;
  header["best_epoch"] = ckpt.best_epoch;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(sizeof kCheckpointMagic + 8 + text.size() + total * 8);
  std::uint8_t *p = out.data();
  std::memcpy(p, kCheckpointMagic, sizeof kCheckpointMagic);
  p += sizeof kCheckpointMagic;
  const std::uint64_t len = text.size();
  std::memcpy(p, &len, 8);
  p += 8;
  std::memcpy(p, text.data(), text.size());
  p += text.size();
  for_each_tensor(ckpt.params, [&](const std::string &, const std::string &, const Matrix &m) {
    std::memcpy(p, m.data.data(), m.size() * 8);
    p += m.size() * 8;
  });
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t> &bytes) {
  const std::size_t head = sizeof kCheckpointMagic + 8;
  require(bytes.size() >= head && std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) == 0,
          ErrorKind::kData, "not a kgf checkpoint (bad magic)");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof kCheckpointMagic, 8);
  require(len <= bytes.size() - head, ErrorKind::kData, "truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(head),
                         bytes.begin() + static_cast<std::ptrdiff_t>(head + len));
  } catch (const json::exception &e) {
    fail(ErrorKind::kData, std::string("malformed checkpoint header: ") + e.what());
  }

  Checkpoint c;
  try {
    c.version = header.at("version").get<int>();
    require(c.version == kCheckpointVersion, ErrorKind::kData,
            "checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");
    for (const auto &[k, v] : header.at("config").items()) set_config_value(c.config, k, v.get<std::string>());
    c.entities = header.at("entities").get<std::vector<std::string>>();
    c.relations = header.at("relations").get<std::vector<std::string>>();
    c.rng_seed = header.at("rng").at("seed").get<std::uint64_t>();
    c.epochs_completed = header.at("rng").at("epochs_completed").get<std::uint64_t>();
    c.best_valid_mrr = header.at("best_valid_mrr").get<double>();
    c.best_epoch = header.at("best_epoch").get<std::uint64_t>();

    const EmbeddingSizes sizes{c.entities.size(), 2 * c.relations.size() + 1};
    c.params = zeros_like(init_params(sizes, c.config.model, 0));
    const json &tensors = header.at("tensors");
    std::size_t i = 0;
    const std::uint8_t *p = bytes.data() + head + len;
    const std::uint8_t *end = bytes.data() + bytes.size();
    for_each_tensor(c.params, [&](const std::string &name, const std::string &, Matrix &m) {
      require(i < tensors.size(), ErrorKind::kData, "checkpoint is missing tensor " + name);
      const json &t = tensors[i++];
      require(t.at("name").get<std::string>() == name && t.at("rows").get<std::size_t>() == m.rows &&
                  t.at("cols").get<std::size_t>() == m.cols,
              ErrorKind::kData, "checkpoint tensor layout mismatch at " + name);
      require(static_cast<std::size_t>(end - p) >= m.size() * 8, ErrorKind::kData, "truncated checkpoint data");
      std::memcpy(m.data.data(), p, m.size() * 8);
      p += m.size() * 8;
    });
    require(i == tensors.size() && p == end, ErrorKind::kData, "checkpoint has trailing data");
  } catch (const json::exception &e) {
    fail(ErrorKind::kData, std::string("malformed checkpoint header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kData, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kData, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kData, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Model model_from_checkpoint(const Checkpoint &ckpt) { return Model(ckpt.config.model, ckpt.params, ckpt.rng_seed); }

TripleStore load_dataset_for(const Checkpoint &ckpt, const std::filesystem::path &dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::kData, "dataset directory not found: " + dir.string());
  TripleStore store;
  for (const auto &e : ckpt.entities) store.add_entity(e);
  for (const auto &r : ckpt.relations) store.add_relation(r);
  for (Split s : kAllSplits) {
    const auto path = dir / (std::string(split_name(s)) + ".txt");
    if (std::filesystem::exists(path)) store.load_triples(path, s);
  }
  require(store.n_entities() == ckpt.entities.size() && store.n_relations() == ckpt.relations.size(),
          ErrorKind::kData, "dataset " + dir.string() + " has labels the checkpoint does not know");
  store.augment();
  return store;
}

}  // namespace kgf
