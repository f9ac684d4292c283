#pragma once

// Hierarchical composition of MLDA units. Lower units send sampled topic
// histograms upward as pseudo-observations; upper units send topic
// distributions downward that bias the lower units' Gibbs conditionals.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/mlda.hpp"

namespace mmlda {

struct NodeSpec {
  std::string id;
  std::size_t n_topics = 6;
  double alpha = 1.0;
  /// Modalities attached directly to this node.
  std::vector<ModalityConfig> observed;
  /// Nodes whose sampled topics feed this node. Each child appears as a
  /// pseudo-modality named after the child node, vocabulary = child's K.
  std::vector<std::string> children;
  /// beta of the pseudo-modalities created for children.
  double child_beta = 1.0;
  /// Pseudo-token mass of the forward message this node sends to its parent.
  std::uint32_t forward_weight = 200;

  bool operator==(const NodeSpec&) const = default;
};

struct GraphSpec {
  std::string name;
  std::vector<NodeSpec> nodes;

  bool operator==(const GraphSpec&) const = default;
};

struct TrainingSchedule {
  int inner_iterations = 100;
  int global_passes = 3;

  void validate() const;
  bool operator==(const TrainingSchedule&) const = default;
};

struct ForwardMessage {
  std::string source;
  std::vector<Histogram> histograms;
};

struct BackwardMessage {
  std::string target;
  std::vector<std::vector<double>> per_doc;
};

class ComposedModel {
 public:
  const GraphSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return spec_.nodes.size(); }
  const NodeSpec& node(std::size_t i) const { return spec_.nodes.at(i); }
  std::size_t index_of(std::string_view id) const;
  bool has_node(std::string_view id) const;
  /// Node indices with every child before its parent.
  const std::vector<std::size_t>& bottom_up() const noexcept { return order_; }
  std::optional<std::size_t> parent(std::size_t i) const { return parent_.at(i); }
  std::size_t top() const noexcept { return order_.back(); }
  /// Observed modalities first, then one pseudo-modality per child.
  const UnitConfig& unit_config(std::size_t i) const { return configs_.at(i); }

  bool trained() const noexcept { return trained_; }
  const UnitState& state(std::size_t i) const;
  const FrozenUnit& frozen(std::size_t i) const;
  const UnitState& state(std::string_view id) const { return state(index_of(id)); }
  const FrozenUnit& frozen(std::string_view id) const { return frozen(index_of(id)); }
  std::uint64_t seed() const noexcept { return seed_; }
  const TrainingSchedule& schedule() const noexcept { return schedule_; }

  /// Installs trained unit states (used by training and snapshot loading).
  void set_trained(std::vector<UnitState> states, std::uint64_t seed, TrainingSchedule schedule);

  bool operator==(const ComposedModel& o) const {
    return spec_ == o.spec_ && trained_ == o.trained_ && seed_ == o.seed_ && schedule_ == o.schedule_ &&
           states_ == o.states_;
  }

 private:
  friend ComposedModel build(GraphSpec graph);

  GraphSpec spec_;
  std::vector<std::size_t> order_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<UnitConfig> configs_;
  std::vector<UnitState> states_;
  std::vector<FrozenUnit> frozen_;
  bool trained_ = false;
  std::uint64_t seed_ = 0;
  TrainingSchedule schedule_;
};

/// Validates the graph (unique ids, known children, single parent per node,
/// acyclic, one top node, well-formed modalities) and allocates the model.
ComposedModel build(GraphSpec graph);

/// Histogram of `weight` topics drawn independently from `theta`.
Histogram sample_histogram(std::span<const double> theta, std::uint32_t weight, Rng& rng);

/// Samples every document's topic histogram from the node's current theta.
ForwardMessage forward_message(const UnitState& node, std::string_view source_id, std::uint32_t weight, Rng& rng);

/// P(z_child | parent evidence) = sum_p phi_parent(child = c | p) theta_parent(p), per document.
BackwardMessage backward_message(const UnitState& parent, std::string_view child_id);
std::vector<double> backward_from_theta(const FrozenUnit& parent, std::string_view child_id,
                                        std::span<const double> parent_theta);

struct TrainEvent {
  std::string_view node_id;
  int pass = 0;
  int sweep = 0;
  const UnitState* state = nullptr;
};

struct TrainOptions {
  std::uint64_t seed = 0;
  /// Replace every backward message with the uniform distribution.
  bool uniform_backward = false;
  /// Called after every sweep of every node.
  std::function<void(const TrainEvent&)> observer;
};

void train(ComposedModel& model, std::span<const BlockDocument> docs, const TrainingSchedule& schedule,
           const TrainOptions& opts);

using NodeThetas = std::map<std::string, std::vector<double>, std::less<>>;

/// Held-out inference with all phi tables frozen. Modalities missing from
/// `doc` are left out; a node whose subtree observes nothing takes its
/// parent's backward message as its topic distribution.
NodeThetas infer(const ComposedModel& model, const BlockDocument& doc, const TrainingSchedule& schedule,
                 std::uint64_t seed);

/// The unit document a node sees for `doc`, observed modalities only (child slots empty).
UnitDocument observed_unit_document(const ComposedModel& model, std::size_t node, const BlockDocument& doc);

}  // namespace mmlda
