#include "mmlda/models.hpp"

#include "mmlda/error.hpp"

namespace mmlda {

std::string_view to_string(Architecture a) noexcept {
  switch (a) {
    case Architecture::IPM: return "IPM";
    case Architecture::NCM: return "NCM";
    case Architecture::ECM: return "ECM";
  }
  return "?";
}

Architecture architecture_from_string(std::string_view name) {
  for (Architecture a : {Architecture::IPM, Architecture::NCM, Architecture::ECM})
    if (to_string(a) == name) return a;
  throw ValidationError("unknown architecture '" + std::string(name) + "' (expected IPM, NCM or ECM)");
}

std::optional<Architecture> architecture_of(const GraphSpec& graph) {
  for (Architecture a : {Architecture::IPM, Architecture::NCM, Architecture::ECM})
    if (to_string(a) == graph.name) return a;
  return std::nullopt;
}

std::uint32_t WeightConfig::for_modality(std::string_view id) const {
  if (id == modality::kSelfLicking) return self_licking;
  if (id == modality::kPartnerLicking) return partner_licking;
  if (id == modality::kSelfReward) return self_reward;
  if (id == modality::kPartnerReward) return partner_reward;
  if (id == modality::kStimulus) return stimulus;
  throw ValidationError("no weight for modality '" + std::string(id) + "'");
}

void WeightConfig::set(std::string_view id, std::uint32_t w) {
  if (id == modality::kSelfLicking) self_licking = w;
  else if (id == modality::kPartnerLicking) partner_licking = w;
  else if (id == modality::kSelfReward) self_reward = w;
  else if (id == modality::kPartnerReward) partner_reward = w;
  else if (id == modality::kStimulus) stimulus = w;
  else throw ValidationError("no weight for modality '" + std::string(id) + "'");
}

void WeightConfig::validate() const {
  for (std::string_view id : modality::kAll)
    if (for_modality(id) < 1) throw ValidationError("weight for '" + std::string(id) + "' must be >= 1");
}

namespace {

ModalityConfig observed(std::string_view id, const ModelDefaults& d) {
  return ModalityConfig{std::string(id), modality::vocab_size(id), d.beta, d.weights.for_modality(id)};
}

NodeSpec make_node(std::string_view id, const ModelDefaults& d, std::initializer_list<std::string_view> mods,
                   std::initializer_list<std::string_view> children) {
  NodeSpec n;
  n.id = std::string(id);
  n.n_topics = d.n_topics;
  n.alpha = d.alpha;
  n.child_beta = d.beta;
  n.forward_weight = d.forward_weight;
  for (auto m : mods) n.observed.push_back(observed(m, d));
  for (auto c : children) n.children.emplace_back(c);
  return n;
}

}  // namespace

GraphSpec ipm_spec(const ModelDefaults& d) {
  d.weights.validate();
  using namespace modality;
  return GraphSpec{"IPM",
                   {make_node(node::kSelfAction, d, {kSelfLicking}, {}),
                    make_node(node::kPartnerAction, d, {kPartnerLicking}, {}),
                    make_node(node::kSelfValue, d, {kSelfReward}, {node::kSelfAction}),
                    make_node(node::kPartnerValue, d, {kPartnerReward}, {node::kPartnerAction}),
                    make_node(node::kSituation, d, {kStimulus}, {node::kSelfValue, node::kPartnerValue})}};
}

GraphSpec ncm_spec(const ModelDefaults& d) {
  d.weights.validate();
  using namespace modality;
  return GraphSpec{"NCM",
                   {make_node(node::kSelfAction, d, {kSelfLicking}, {}),
                    make_node(node::kSelfValue, d, {kSelfReward}, {node::kSelfAction}),
                    make_node(node::kSituation, d, {kStimulus}, {node::kSelfValue})}};
}

GraphSpec ecm_spec(const ModelDefaults& d) {
  d.weights.validate();
  using namespace modality;
  return GraphSpec{"ECM",
                   {make_node(node::kSelfAction, d, {kSelfLicking}, {}),
                    make_node(node::kPartnerAction, d, {kPartnerLicking}, {}),
                    make_node(node::kSelfValue, d, {kSelfReward}, {node::kSelfAction}),
                    make_node(node::kSituation, d, {kStimulus, kPartnerReward},
                              {node::kSelfValue, node::kPartnerAction})}};
}

GraphSpec architecture_spec(Architecture a, const ModelDefaults& d) {
  switch (a) {
    case Architecture::IPM: return ipm_spec(d);
    case Architecture::NCM: return ncm_spec(d);
    case Architecture::ECM: return ecm_spec(d);
  }
  throw ValidationError("unknown architecture");
}

std::size_t free_parameter_count(const GraphSpec& graph) {
  std::size_t total = 0;
  for (const NodeSpec& n : graph.nodes) {
    for (const ModalityConfig& m : n.observed) total += n.n_topics * (m.vocab_size - 1);
    for (const std::string& c : n.children) {
      for (const NodeSpec& child : graph.nodes)
        if (child.id == c) total += n.n_topics * (child.n_topics - 1);
    }
  }
  return total;
}

}  // namespace mmlda
