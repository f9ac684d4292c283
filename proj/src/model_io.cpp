#include "mmlda/model_io.hpp"

#include <fstream>
#include <sstream>

#include "mmlda/atomic_file.hpp"
#include "mmlda/error.hpp"

namespace mmlda {

using nlohmann::json;

json to_json(const ModalityConfig& m) {
  return json{{"id", m.id}, {"vocab_size", m.vocab_size}, {"beta", m.beta}, {"weight", m.weight}};
}

ModalityConfig modality_config_from_json(const json& j) {
  return ModalityConfig{j.at("id").get<std::string>(), j.at("vocab_size").get<std::size_t>(),
                        j.at("beta").get<double>(), j.at("weight").get<std::uint32_t>()};
}

json to_json(const UnitConfig& c) {
  json mods = json::array();
  for (const auto& m : c.modalities) mods.push_back(to_json(m));
  return json{{"n_topics", c.n_topics}, {"alpha", c.alpha}, {"modalities", std::move(mods)}};
}

UnitConfig unit_config_from_json(const json& j) {
  UnitConfig c;
  c.n_topics = j.at("n_topics").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  for (const auto& m : j.at("modalities")) c.modalities.push_back(modality_config_from_json(m));
  return c;
}

json to_json(const NodeSpec& n) {
  json mods = json::array();
  for (const auto& m : n.observed) mods.push_back(to_json(m));
  return json{{"id", n.id},
              {"n_topics", n.n_topics},
              {"alpha", n.alpha},
              {"observed", std::move(mods)},
              {"children", n.children},
              {"child_beta", n.child_beta},
              {"forward_weight", n.forward_weight}};
}

NodeSpec node_spec_from_json(const json& j) {
  NodeSpec n;
  n.id = j.at("id").get<std::string>();
  n.n_topics = j.at("n_topics").get<std::size_t>();
  n.alpha = j.at("alpha").get<double>();
  for (const auto& m : j.at("observed")) n.observed.push_back(modality_config_from_json(m));
  n.children = j.at("children").get<std::vector<std::string>>();
  n.child_beta = j.at("child_beta").get<double>();
  n.forward_weight = j.at("forward_weight").get<std::uint32_t>();
  return n;
}

json to_json(const GraphSpec& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) nodes.push_back(to_json(n));
  return json{{"name", g.name}, {"nodes", std::move(nodes)}};
}

GraphSpec graph_spec_from_json(const json& j) {
  GraphSpec g;
  g.name = j.value("name", "");
  for (const auto& n : j.at("nodes")) g.nodes.push_back(node_spec_from_json(n));
  return g;
}

json to_json(const TrainingSchedule& s) {
  return json{{"inner_iterations", s.inner_iterations}, {"global_passes", s.global_passes}};
}

TrainingSchedule schedule_from_json(const json& j) {
  TrainingSchedule s;
  s.inner_iterations = j.value("inner_iterations", s.inner_iterations);
  s.global_passes = j.value("global_passes", s.global_passes);
  s.validate();
  return s;
}

json to_json(const UnitState& s) {
  const std::size_t n_mod = s.config.modalities.size();
  json docs = json::array();
  for (std::size_t j = 0; j < s.n_docs(); ++j) {
    std::vector<Histogram> hist(n_mod);
    std::vector<bool> present(n_mod, false);
    for (const Token& t : s.tokens[j]) {
      if (!present[t.modality]) {
        hist[t.modality].assign(s.config.modalities[t.modality].vocab_size, 0);
        present[t.modality] = true;
      }
      ++hist[t.modality][t.word];
    }
    json h = json::array();
    for (std::size_t m = 0; m < n_mod; ++m) h.push_back(present[m] ? json(hist[m]) : json(nullptr));
    docs.push_back(json{{"histograms", std::move(h)}, {"assignments", s.tables.assignments[j]}});
  }
  std::ostringstream rng;
  rng << s.rng;
  return json{{"config", to_json(s.config)},
              {"seed", s.seed},
              {"sweeps", s.sweeps},
              {"rng", rng.str()},
              {"documents", std::move(docs)},
              {"doc_topic", s.tables.doc_topic},
              {"word_topic", s.tables.word_topic},
              {"topic_total", s.tables.topic_total}};
}

UnitState unit_state_from_json(const json& j) {
  UnitState s;
  s.config = unit_config_from_json(j.at("config"));
  s.config.validate();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.sweeps = j.at("sweeps").get<std::uint64_t>();
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> s.rng;
  if (!rng) throw FormatError("unit state: unreadable RNG state");

  const std::size_t k = s.config.n_topics;
  auto& t = s.tables;
  t.n_topics = k;
  for (const json& d : j.at("documents")) {
    const json& hist = d.at("histograms");
    if (hist.size() != s.config.modalities.size()) throw FormatError("unit state: wrong number of histograms");
    std::vector<Token> toks;
    for (std::size_t m = 0; m < hist.size(); ++m) {
      if (hist[m].is_null()) continue;
      const auto h = hist[m].get<Histogram>();
      if (h.size() != s.config.modalities[m].vocab_size) throw FormatError("unit state: histogram size mismatch");
      for (std::uint32_t w = 0; w < h.size(); ++w) toks.insert(toks.end(), h[w], Token{static_cast<std::uint16_t>(m), w});
    }
    s.tokens.push_back(std::move(toks));
    t.assignments.push_back(d.at("assignments").get<std::vector<TopicIndex>>());
  }
  t.doc_topic = j.at("doc_topic").get<std::vector<std::uint32_t>>();
  t.word_topic = j.at("word_topic").get<std::vector<std::vector<std::uint32_t>>>();
  t.topic_total = j.at("topic_total").get<std::vector<std::vector<std::uint32_t>>>();
  try {
    check_consistency(s);
  } catch (const StateError& e) {
    throw FormatError(std::string("unit state: ") + e.what());
  }
  return s;
}

void write_model(std::ostream& out, const ComposedModel& model) {
  json nodes = json::object();
  for (std::size_t i = 0; i < model.size(); ++i) nodes[model.node(i).id] = to_json(model.state(i));
  json root{{"schema", "mmlda.model"},
            {"schema_version", kModelSchemaVersion},
            {"graph", to_json(model.spec())},
            {"schedule", to_json(model.schedule())},
            {"seed", model.seed()},
            {"nodes", std::move(nodes)}};
  out << root.dump() << '\n';
}

ComposedModel read_model(std::istream& in) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model snapshot: ") + e.what());
  }
  if (root.value("schema", "") != "mmlda.model") throw FormatError("model snapshot: wrong schema name");
  const int v = root.value("schema_version", -1);
  if (v != kModelSchemaVersion)
    throw FormatError("model snapshot: schema_version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(kModelSchemaVersion) + ")");
  try {
    ComposedModel model = build(graph_spec_from_json(root.at("graph")));
    std::vector<UnitState> states;
    for (std::size_t i = 0; i < model.size(); ++i)
      states.push_back(unit_state_from_json(root.at("nodes").at(model.node(i).id)));
    model.set_trained(std::move(states), root.at("seed").get<std::uint64_t>(),
                      schedule_from_json(root.at("schedule")));
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model snapshot: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ComposedModel& model) {
  write_file_atomically(path, [&](std::ostream& out) { write_model(out, model); });
}

ComposedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model snapshot '" + path.string() + "'");
  return read_model(in);
}

}  // namespace mmlda
