#pragma once

// A single LDA/MLDA unit: one latent topic variable shared by several count
// modalities, trained by collapsed Gibbs sampling.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/random.hpp"

namespace mmlda {

using Histogram = std::vector<std::uint32_t>;
using TopicIndex = std::uint16_t;

struct ModalityConfig {
  std::string id;
  std::size_t vocab_size = 2;
  double beta = 1.0;
  /// Token mass a raw observation is rescaled to before sampling.
  std::uint32_t weight = 200;

  void validate() const;
  bool operator==(const ModalityConfig&) const = default;
};

struct UnitConfig {
  std::size_t n_topics = 6;
  double alpha = 1.0;
  std::vector<ModalityConfig> modalities;

  /// Requires K >= 1 and at least one modality.
  void validate() const;
  std::size_t modality_index(std::string_view id) const;
  bool operator==(const UnitConfig&) const = default;
};

/// One document as seen by a unit: a (possibly absent) histogram per modality,
/// in the unit's modality order. Histograms are used as given; callers rescale.
struct UnitDocument {
  std::vector<std::optional<Histogram>> histograms;
};

struct Token {
  std::uint16_t modality = 0;
  std::uint32_t word = 0;
  bool operator==(const Token&) const = default;
};

struct CountTables {
  std::size_t n_topics = 0;
  /// n_{k,j}: documents x topics, row-major.
  std::vector<std::uint32_t> doc_topic;
  /// n_{m,w,k}: per modality, words x topics, row-major.
  std::vector<std::vector<std::uint32_t>> word_topic;
  /// n_{m,k}: per modality, topics.
  std::vector<std::vector<std::uint32_t>> topic_total;
  /// z: per document, one topic per token (aligned with UnitState::tokens).
  std::vector<std::vector<TopicIndex>> assignments;

  bool operator==(const CountTables&) const = default;
};

struct UnitState {
  UnitConfig config;
  std::vector<std::vector<Token>> tokens;
  CountTables tables;
  std::uint64_t seed = 0;
  std::uint64_t sweeps = 0;
  Rng rng;

  std::size_t n_docs() const noexcept { return tokens.size(); }
  std::size_t n_topics() const noexcept { return config.n_topics; }
  bool operator==(const UnitState&) const = default;
};

/// Per-document multiplicative bias over topics (a backward message).
using TopicBias = std::vector<std::vector<double>>;

/// Proportional rescale to total mass `weight` with largest-remainder rounding.
Histogram rescale(std::span<const std::uint32_t> counts, std::uint32_t weight);
FeatureVector rescale(const FeatureVector& v, std::uint32_t weight);

/// Expands the documents into tokens and assigns each token a uniformly random topic.
UnitState init_unit(UnitConfig config, std::span<const UnitDocument> docs, std::uint64_t seed);

/// One collapsed Gibbs pass over every token. With `bias`, document j's
/// conditional is multiplied elementwise by bias[j] before normalization.
void gibbs_sweep(UnitState& state, const TopicBias* bias = nullptr);

/// Swaps the tokens of modality `m` for new per-document histograms; the new
/// tokens get uniformly random topics. Other modalities keep their assignments.
void replace_modality(UnitState& state, std::size_t m, std::span<const std::optional<Histogram>> per_doc);

/// Throws StateError if the count tables disagree with the assignments.
void check_consistency(const UnitState& state);

std::vector<double> estimate_theta(const UnitState& state, std::size_t doc);
/// phi^m as a W^m x K row-major table; each topic column sums to 1.
std::vector<double> estimate_phi(const UnitState& state, std::size_t m);

/// Trained unit with phi precomputed; immutable, safe to share across threads.
struct FrozenUnit {
  UnitConfig config;
  std::vector<std::vector<double>> phi;

  const double& phi_at(std::size_t m, std::size_t w, std::size_t k) const {
    return phi[m][w * config.n_topics + k];
  }
};

FrozenUnit freeze(const UnitState& state);

struct InferenceOptions {
  int iterations = 100;
  std::uint64_t seed = 0;
  /// Optional bias over topics, applied to every token of the document.
  std::optional<std::vector<double>> bias;
};

struct InferenceResult {
  /// Posterior topic proportions, averaged over the second half of the sweeps.
  std::vector<double> theta;
  std::vector<TopicIndex> assignments;
};

/// Gibbs sampling over a new document's tokens with phi held fixed.
InferenceResult infer_unseen(const FrozenUnit& unit, const UnitDocument& doc, const InferenceOptions& opts);

/// sum_z phi^target(w|z) theta(z).
std::vector<double> mix_phi(const FrozenUnit& unit, std::size_t target_m, std::span<const double> theta);

/// Predictive distribution over an unobserved modality's vocabulary.
std::vector<double> predict_modality(const FrozenUnit& unit, const UnitDocument& partial, std::size_t target_m,
                                     const InferenceOptions& opts);

}  // namespace mmlda
