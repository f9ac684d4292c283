#include "mmlda/composition.hpp"

#include <algorithm>
#include <set>

#include "mmlda/error.hpp"

namespace mmlda {

void TrainingSchedule::validate() const {
  if (inner_iterations < 1) throw ValidationError("inner_iterations must be >= 1");
  if (global_passes < 1) throw ValidationError("global_passes must be >= 1");
}

std::size_t ComposedModel::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < spec_.nodes.size(); ++i)
    if (spec_.nodes[i].id == id) return i;
  throw ValidationError("model has no node '" + std::string(id) + "'");
}

bool ComposedModel::has_node(std::string_view id) const {
  return std::any_of(spec_.nodes.begin(), spec_.nodes.end(), [&](const NodeSpec& n) { return n.id == id; });
}

const UnitState& ComposedModel::state(std::size_t i) const {
  if (!trained_) throw StateError("model is not trained");
  return states_.at(i);
}

const FrozenUnit& ComposedModel::frozen(std::size_t i) const {
  if (!trained_) throw StateError("model is not trained");
  return frozen_.at(i);
}

void ComposedModel::set_trained(std::vector<UnitState> states, std::uint64_t seed, TrainingSchedule schedule) {
  if (states.size() != size()) throw ValidationError("state count does not match the graph");
  for (std::size_t i = 0; i < states.size(); ++i)
    if (!(states[i].config == configs_[i]))
      throw ValidationError("state for node '" + spec_.nodes[i].id + "' has a mismatched configuration");
  states_ = std::move(states);
  frozen_.clear();
  for (const UnitState& s : states_) frozen_.push_back(freeze(s));
  seed_ = seed;
  schedule_ = schedule;
  trained_ = true;
}

ComposedModel build(GraphSpec graph) {
  const auto& nodes = graph.nodes;
  const std::size_t n = nodes.size();
  if (n == 0) throw ValidationError("graph has no nodes");

  std::map<std::string, std::size_t, std::less<>> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].id.empty()) throw ValidationError("node id must not be empty");
    if (!ids.emplace(nodes[i].id, i).second) throw ValidationError("duplicate node id '" + nodes[i].id + "'");
  }

  std::set<std::string, std::less<>> modality_ids;
  std::vector<std::optional<std::size_t>> parent(n);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeSpec& node = nodes[i];
    if (node.observed.empty() && node.children.empty())
      throw ValidationError("node '" + node.id + "' has neither observed modalities nor children");
    for (const ModalityConfig& m : node.observed) {
      m.validate();
      if (ids.count(m.id)) throw ValidationError("modality '" + m.id + "' collides with a node id");
      if (!modality_ids.insert(m.id).second)
        throw ValidationError("modality '" + m.id + "' is attached to more than one node");
    }
    for (const std::string& c : node.children) {
      auto it = ids.find(c);
      if (it == ids.end()) throw ValidationError("node '" + node.id + "' lists unknown child '" + c + "'");
      if (it->second == i) throw ValidationError("cycle: node '" + node.id + "' lists itself as a child");
      if (parent[it->second])
        throw ValidationError("node '" + c + "' has more than one parent ('" + nodes[*parent[it->second]].id +
                              "' and '" + node.id + "')");
      parent[it->second] = i;
      children[i].push_back(it->second);
    }
  }

  // Kahn's algorithm over child -> parent edges; ties broken by declaration order.
  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = children[i].size();
  std::vector<std::size_t> order;
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    bool progressed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i] || pending[i] != 0) continue;
      done[i] = true;
      order.push_back(i);
      if (parent[i]) --pending[*parent[i]];
      progressed = true;
      break;
    }
    if (!progressed) {
      std::string members;
      for (std::size_t i = 0; i < n; ++i)
        if (!done[i]) members += (members.empty() ? "" : ", ") + nodes[i].id;
      throw ValidationError("cycle among nodes: " + members);
    }
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) roots += parent[i] ? 0 : 1;
  if (roots != 1) throw ValidationError("graph must have exactly one top node, found " + std::to_string(roots));

  ComposedModel model;
  model.configs_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    UnitConfig cfg;
    cfg.n_topics = nodes[i].n_topics;
    cfg.alpha = nodes[i].alpha;
    cfg.modalities = nodes[i].observed;
    for (std::size_t c : children[i])
      cfg.modalities.push_back(
          ModalityConfig{nodes[c].id, nodes[c].n_topics, nodes[i].child_beta, nodes[c].forward_weight});
    try {
      cfg.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("node '" + nodes[i].id + "': " + e.what());
    }
    model.configs_[i] = std::move(cfg);
  }
  model.spec_ = std::move(graph);
  model.order_ = std::move(order);
  model.parent_ = std::move(parent);
  return model;
}

Histogram sample_histogram(std::span<const double> theta, std::uint32_t weight, Rng& rng) {
  if (theta.empty()) throw ValidationError("cannot sample from an empty distribution");
  std::vector<double> cumulative(theta.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (theta[k] < 0.0) throw ValidationError("negative probability");
    acc += theta[k];
    cumulative[k] = acc;
  }
  if (!(acc > 0.0)) throw ValidationError("distribution has zero mass");
  Histogram h(theta.size(), 0);
  for (std::uint32_t t = 0; t < weight; ++t) {
    const double u = uniform01(rng) * acc;
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && cumulative[k] <= u) ++k;
    ++h[k];
  }
  return h;
}

ForwardMessage forward_message(const UnitState& node, std::string_view source_id, std::uint32_t weight, Rng& rng) {
  if (node.sweeps == 0) throw StateError("node '" + std::string(source_id) + "' has not been trained");
  ForwardMessage msg{std::string(source_id), {}};
  msg.histograms.reserve(node.n_docs());
  for (std::size_t j = 0; j < node.n_docs(); ++j)
    msg.histograms.push_back(sample_histogram(estimate_theta(node, j), weight, rng));
  return msg;
}

namespace {

std::vector<double> mix_child(std::span<const double> phi, std::size_t child_k, std::size_t parent_k,
                              std::span<const double> parent_theta) {
  std::vector<double> out(child_k, 0.0);
  for (std::size_t c = 0; c < child_k; ++c)
    for (std::size_t p = 0; p < parent_k; ++p) out[c] += phi[c * parent_k + p] * parent_theta[p];
  return out;
}

}  // namespace

BackwardMessage backward_message(const UnitState& parent, std::string_view child_id) {
  std::size_t m = 0;
  try {
    m = parent.config.modality_index(child_id);
  } catch (const ValidationError&) {
    throw ValidationError("node '" + std::string(child_id) + "' is not connected to this parent");
  }
  if (parent.sweeps == 0) throw StateError("parent of '" + std::string(child_id) + "' has not been trained");
  const std::vector<double> phi = estimate_phi(parent, m);
  const std::size_t child_k = parent.config.modalities[m].vocab_size;
  BackwardMessage msg{std::string(child_id), {}};
  msg.per_doc.reserve(parent.n_docs());
  for (std::size_t j = 0; j < parent.n_docs(); ++j)
    msg.per_doc.push_back(mix_child(phi, child_k, parent.n_topics(), estimate_theta(parent, j)));
  return msg;
}

std::vector<double> backward_from_theta(const FrozenUnit& parent, std::string_view child_id,
                                        std::span<const double> parent_theta) {
  std::size_t m = 0;
  try {
    m = parent.config.modality_index(child_id);
  } catch (const ValidationError&) {
    throw ValidationError("node '" + std::string(child_id) + "' is not connected to this parent");
  }
  if (parent_theta.size() != parent.config.n_topics) throw ValidationError("parent theta has the wrong size");
  return mix_child(parent.phi[m], parent.config.modalities[m].vocab_size, parent.config.n_topics, parent_theta);
}

UnitDocument observed_unit_document(const ComposedModel& model, std::size_t node, const BlockDocument& doc) {
  const NodeSpec& spec = model.node(node);
  UnitDocument ud;
  ud.histograms.resize(model.unit_config(node).modalities.size());
  for (std::size_t m = 0; m < spec.observed.size(); ++m) {
    const ModalityConfig& mc = spec.observed[m];
    auto it = doc.observations.find(mc.id);
    if (it == doc.observations.end()) continue;
    if (it->second.counts.size() != mc.vocab_size)
      throw ValidationError("modality '" + mc.id + "' has vocabulary " + std::to_string(it->second.counts.size()) +
                            ", node '" + spec.id + "' expects " + std::to_string(mc.vocab_size));
    ud.histograms[m] = rescale(it->second.counts, mc.weight);
  }
  return ud;
}

void train(ComposedModel& model, std::span<const BlockDocument> docs, const TrainingSchedule& schedule,
           const TrainOptions& opts) {
  schedule.validate();
  if (docs.empty()) throw ValidationError("training needs at least one document");
  const std::size_t n = model.size();
  for (std::size_t i = 0; i < n; ++i)
    for (const ModalityConfig& mc : model.node(i).observed)
      for (const BlockDocument& d : docs)
        if (!d.has(mc.id))
          throw ValidationError("training document (day " + std::to_string(d.day) + ", block " +
                                std::to_string(d.block) + ") is missing modality '" + mc.id + "'");

  // Observed parts of each node's documents; child slots are filled per pass.
  std::vector<std::vector<UnitDocument>> unit_docs(n);
  for (std::size_t i = 0; i < n; ++i) {
    unit_docs[i].reserve(docs.size());
    for (const BlockDocument& d : docs) unit_docs[i].push_back(observed_unit_document(model, i, d));
  }

  std::vector<std::optional<UnitState>> states(n);
  std::vector<std::optional<ForwardMessage>> forward(n);
  std::vector<std::optional<TopicBias>> bias(n);

  for (int pass = 1; pass <= schedule.global_passes; ++pass) {
    for (std::size_t i : model.bottom_up()) {
      const NodeSpec& spec = model.node(i);
      const std::size_t first_child = spec.observed.size();
      if (!states[i]) {
        for (std::size_t c = 0; c < spec.children.size(); ++c) {
          const ForwardMessage& msg = *forward[model.index_of(spec.children[c])];
          for (std::size_t j = 0; j < docs.size(); ++j) unit_docs[i][j].histograms[first_child + c] = msg.histograms[j];
        }
        states[i] = init_unit(model.unit_config(i), unit_docs[i], derive_seed(opts.seed, {tag_of(spec.id)}));
        unit_docs[i].clear();
      } else {
        for (std::size_t c = 0; c < spec.children.size(); ++c) {
          const ForwardMessage& msg = *forward[model.index_of(spec.children[c])];
          std::vector<std::optional<Histogram>> slots(msg.histograms.begin(), msg.histograms.end());
          replace_modality(*states[i], first_child + c, slots);
        }
      }
      for (int s = 1; s <= schedule.inner_iterations; ++s) {
        gibbs_sweep(*states[i], bias[i] ? &*bias[i] : nullptr);
        if (opts.observer) opts.observer(TrainEvent{spec.id, pass, s, &*states[i]});
      }
      if (model.parent(i)) {
        Rng rng(derive_seed(opts.seed, {tag_of(spec.id), 0xf0u, static_cast<std::uint64_t>(pass)}));
        forward[i] = forward_message(*states[i], spec.id, spec.forward_weight, rng);
      }
    }
    const auto& order = model.bottom_up();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t i = *it;
      for (const std::string& child : model.node(i).children) {
        const std::size_t c = model.index_of(child);
        if (opts.uniform_backward) {
          const std::size_t k = model.node(c).n_topics;
          bias[c] = TopicBias(docs.size(), std::vector<double>(k, 1.0 / static_cast<double>(k)));
        } else {
          bias[c] = backward_message(*states[i], child).per_doc;
        }
      }
    }
  }

  std::vector<UnitState> out;
  out.reserve(n);
  for (auto& s : states) out.push_back(std::move(*s));
  model.set_trained(std::move(out), opts.seed, schedule);
}

NodeThetas infer(const ComposedModel& model, const BlockDocument& doc, const TrainingSchedule& schedule,
                 std::uint64_t seed) {
  if (!model.trained()) throw StateError("model is not trained");
  schedule.validate();
  const std::size_t n = model.size();

  std::vector<bool> evidence(n, false);
  std::vector<UnitDocument> observed(n);
  for (std::size_t i : model.bottom_up()) {
    observed[i] = observed_unit_document(model, i, doc);
    evidence[i] = std::any_of(observed[i].histograms.begin(), observed[i].histograms.end(),
                              [](const auto& h) { return h.has_value(); });
    for (const std::string& c : model.node(i).children) evidence[i] = evidence[i] || evidence[model.index_of(c)];
  }
  if (!evidence[model.top()]) throw ValidationError("inference needs at least one observed modality");

  std::vector<std::vector<double>> theta(n);
  for (std::size_t i = 0; i < n; ++i)
    theta[i].assign(model.node(i).n_topics, 1.0 / static_cast<double>(model.node(i).n_topics));
  std::vector<std::optional<std::vector<double>>> bias(n);
  std::vector<std::optional<Histogram>> forward(n);

  for (int pass = 1; pass <= schedule.global_passes; ++pass) {
    for (std::size_t i : model.bottom_up()) {
      if (!evidence[i]) continue;
      const NodeSpec& spec = model.node(i);
      UnitDocument ud = observed[i];
      for (std::size_t c = 0; c < spec.children.size(); ++c)
        ud.histograms[spec.observed.size() + c] = forward[model.index_of(spec.children[c])];
      const std::uint64_t node_seed = derive_seed(seed, {tag_of(spec.id), static_cast<std::uint64_t>(pass)});
      InferenceOptions io{schedule.inner_iterations, node_seed, bias[i]};
      theta[i] = infer_unseen(model.frozen(i), ud, io).theta;
      if (model.parent(i)) {
        Rng rng(derive_seed(node_seed, {0xf0u}));
        forward[i] = sample_histogram(theta[i], spec.forward_weight, rng);
      }
    }
    const auto& order = model.bottom_up();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      for (const std::string& child : model.node(*it).children) {
        const std::size_t c = model.index_of(child);
        bias[c] = backward_from_theta(model.frozen(*it), child, theta[*it]);
        if (!evidence[c]) theta[c] = *bias[c];
      }
    }
  }

  NodeThetas out;
  for (std::size_t i = 0; i < n; ++i) out.emplace(model.node(i).id, std::move(theta[i]));
  return out;
}

}  // namespace mmlda
