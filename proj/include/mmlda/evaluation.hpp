#pragma once

// Quantitative analyses: subjective-value classification (Rand index and its
// chance level), licking prediction by interpolation and extrapolation,
// factorized-joint NMI with paired Wilcoxon tests, and topic-vector export.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlda/composition.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/models.hpp"

namespace mmlda {

using Labeling = std::vector<int>;

// Clustering agreement -------------------------------------------------------

/// Fraction of element pairs grouped together in both or apart in both.
double rand_index(std::span<const int> a, std::span<const int> b);
/// Expected Rand index of two independent uniform labelings over k classes.
double rand_chance_level(int k);
Labeling ground_truth(std::span<const BlockDocument> docs);

// Model-driven predictions ---------------------------------------------------

struct EvalSettings {
  /// Sweeps per node and message-passing passes used at inference time.
  TrainingSchedule inference{100, 3};
  std::uint64_t seed = 0;
  int threads = 1;
  /// Replicates per extrapolation grid point (each simulates n_trials trials).
  int extrapolation_replicates = 10;
  int extrapolation_trials = 100;
};

/// Inference seed for one block; depends only on (seed, day, block).
std::uint64_t block_seed(std::uint64_t seed, const BlockDocument& doc);

/// Runs hierarchical inference for every document, optionally restricted to a
/// subset of modalities. Results are independent of the thread count.
std::vector<NodeThetas> infer_all(const ComposedModel& model, std::span<const BlockDocument> docs,
                                  const EvalSettings& settings,
                                  std::optional<std::vector<std::string>> keep_modalities = std::nullopt);

std::size_t argmax(std::span<const double> v);

/// Per-block argmax of the self subjective-value node's posterior, full observations.
Labeling classify_subjective_value(const ComposedModel& model, std::span<const BlockDocument> docs,
                                   const EvalSettings& settings);
Labeling classify_from_thetas(std::span<const NodeThetas> thetas);

/// Predicted probability of the licking word of w^As given the node posteriors.
double predicted_lick_fraction(const ComposedModel& model, const NodeThetas& thetas);

struct ConditionSummary {
  Condition condition = Condition::Self25;
  double mean = 0.0;
  double sem = 0.0;
  std::size_t n = 0;
};

struct InterpolationResult {
  std::vector<double> per_block;
  std::array<ConditionSummary, 6> per_condition;
};

/// Image-only inference per block, then the predicted self-licking fraction,
/// summarized per condition.
InterpolationResult predict_licking_interpolation(const ComposedModel& model, std::span<const BlockDocument> docs,
                                                  const EvalSettings& settings);

struct LickingPrediction {
  double mean = 0.0;
  double sem = 0.0;
  std::vector<double> replicates;
};

/// Synthesizes reward histograms for (self_p, partner_p) over n_trials trials,
/// infers with only the reward modalities observed and predicts self licking.
/// Replicate r uses the same random stream for every probability pair.
LickingPrediction predict_licking_extrapolation(const ComposedModel& model, double self_p, double partner_p,
                                                int n_trials, const EvalSettings& settings);

struct ExtrapolationRow {
  std::string block_type;  // "self_variable" or "partner_variable"
  double self_p = 0.0;
  double partner_p = 0.0;
  LickingPrediction prediction;
};

/// Both block types over a 0..1 grid in 5% steps, the other probability fixed at 0.20.
std::vector<ExtrapolationRow> extrapolation_sweep(const ComposedModel& model, const EvalSettings& settings);

/// Spearman rank correlation with average ranks; 0 if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

// Information-theoretic analysis ---------------------------------------------

struct PairwiseJoint {
  std::string a;
  std::string b;
  std::size_t rows = 0;  // outcomes of a
  std::size_t cols = 0;  // outcomes of b
  std::vector<double> p;  // rows x cols, row-major

  double at(std::size_t i, std::size_t j) const { return p[i * cols + j]; }
};

/// Tree-structured discrete Bayesian network: every variable but the root has
/// one parent and a conditional table P(v = a | parent = p) stored at a * P + p.
struct JointModel {
  struct Variable {
    std::string id;
    std::size_t states = 0;
    std::optional<std::size_t> parent;
    std::vector<double> table;
  };
  std::vector<Variable> vars;

  std::size_t index_of(std::string_view id) const;
  void validate() const;
};

/// Bivariate marginals (v, target) for every other variable v, computed analytically.
std::vector<PairwiseJoint> pairwise_joints(const JointModel& jm, std::string_view target);

/// The per-day factorized joint of an IPM or ECM model: learned phi tables
/// plus `top_theta` as the root prior. NCM and custom graphs are rejected.
JointModel day_joint_model(const ComposedModel& model, std::span<const double> top_theta);
std::vector<PairwiseJoint> factorized_joint(const ComposedModel& model, std::span<const double> top_theta);

double entropy_bits(std::span<const double> p);
/// 2 I(A;B) / (H(A) + H(B)) in bits; 0 when both marginals are degenerate.
double nmi(const PairwiseJoint& joint);

enum class WilcoxonMethod { Auto, Normal, Exact };

struct WilcoxonResult {
  double z = 0.0;
  double p = 1.0;
  double w_plus = 0.0;
  std::size_t n = 0;  // non-zero differences
  bool exact = false;
};

/// Two-sided signed-rank test on x - y. Zero differences are dropped, ties get
/// average ranks. Normal: tie-corrected variance with continuity correction.
/// Exact: enumeration of all sign patterns. Auto: exact below 20 pairs.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

double quantile(std::vector<double> v, double q);

struct NmiRecord {
  std::string variable;  // paired with the self subjective-value node
  std::vector<double> per_day;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::optional<WilcoxonResult> comparison;
};

struct NmiTable {
  std::string architecture;
  std::vector<int> days;
  std::vector<NmiRecord> records;
};

/// Per-day NMI between every variable and zRs. Each day's root prior is the
/// mean top-node posterior of its blocks. `thetas` is aligned with `docs`.
NmiTable nmi_table(const ComposedModel& model, std::span<const BlockDocument> docs,
                   std::span<const NodeThetas> thetas);

/// Paired Wilcoxon (a vs b, paired by day) for every variable present in both tables.
void compare_nmi(NmiTable& a, const NmiTable& b);

// Export ---------------------------------------------------------------------

/// CSV: day,block,condition,theta_0..theta_{K-1} for `node_id`, one row per block.
std::string topic_vectors_csv(const ComposedModel& model, std::span<const BlockDocument> docs,
                              std::span<const NodeThetas> thetas, std::string_view node_id);
void export_topic_vectors(const std::filesystem::path& path, const ComposedModel& model,
                          std::span<const BlockDocument> docs, std::span<const NodeThetas> thetas,
                          std::string_view node_id);

std::string interpolation_csv(const InterpolationResult& r);
std::string extrapolation_csv(std::span<const ExtrapolationRow> rows);

}  // namespace mmlda
