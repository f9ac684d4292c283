#pragma once

// Modality-weight search. Candidates are scored by the mean KL divergence
// between observed and predicted self-licking distributions on held-out blocks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmlda/composition.hpp"
#include "mmlda/evaluation.hpp"
#include "mmlda/models.hpp"

namespace mmlda {

inline constexpr double kKlFloor = 1e-9;

/// sum_i p_i ln(p_i / q_i) in nats, with q_i floored at `floor` to keep
/// sampling zeros finite.
double kl_divergence(std::span<const double> p_true, std::span<const double> p_pred, double floor = kKlFloor);

struct SearchBudget {
  int n_candidates = 10;
  std::uint64_t seed = 0;
  std::uint32_t min_weight = 50;
  std::uint32_t max_weight = 500;

  void validate() const;
};

struct TuningTarget {
  Architecture architecture = Architecture::ECM;
  ModelDefaults defaults;  // weights here are the baseline candidate
  TrainingSchedule schedule;
  std::uint64_t train_seed = 0;
  EvalSettings eval;
};

struct TraceRow {
  WeightConfig weights;
  double score = 0.0;
};

struct TuningResult {
  WeightConfig best;
  double best_score = 0.0;
  std::vector<TraceRow> trace;
};

/// Candidate list: the baseline first, then seeded log-uniform draws per modality.
std::vector<WeightConfig> weight_candidates(const WeightConfig& baseline, const SearchBudget& budget);

/// Mean over blocks of KL(observed w^As || predicted w^As), predicting from
/// every other modality the model observes.
double heldout_licking_kl(const ComposedModel& model, std::span<const BlockDocument> heldout,
                          const EvalSettings& settings);

TuningResult tune_weights(std::span<const BlockDocument> train_docs, std::span<const BlockDocument> heldout,
                          const TuningTarget& target, const SearchBudget& budget);

std::string trace_csv(std::span<const TraceRow> trace);

}  // namespace mmlda
