#pragma once

// Experimental data model, modality encoders and the synthetic
// social-reward experiment simulator.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmlda/random.hpp"

namespace mmlda {

enum class Condition : std::uint8_t { Self25, Self50, Self75, Partner25, Partner50, Partner75 };

inline constexpr std::array<Condition, 6> kConditions = {
    Condition::Self25,    Condition::Self50,    Condition::Self75,
    Condition::Partner25, Condition::Partner50, Condition::Partner75};

inline constexpr std::size_t kBlocksPerDay = kConditions.size();

struct RewardProbabilities {
  double self = 0.0;
  double partner = 0.0;
};

RewardProbabilities reward_probabilities(Condition c) noexcept;
bool is_self_variable(Condition c) noexcept;
std::string_view to_string(Condition c) noexcept;
Condition condition_from_string(std::string_view name);
inline int index_of(Condition c) noexcept { return static_cast<int>(c); }

/// Modality identifiers used throughout the toolkit.
namespace modality {
inline constexpr std::string_view kSelfLicking = "As";
inline constexpr std::string_view kPartnerLicking = "Ap";
inline constexpr std::string_view kSelfReward = "Rs";
inline constexpr std::string_view kPartnerReward = "Rp";
inline constexpr std::string_view kStimulus = "S";

inline constexpr std::size_t kLickingVocab = 2;
inline constexpr std::size_t kRewardVocab = 2;
inline constexpr std::size_t kStimulusVocab = 512;

inline constexpr std::array<std::string_view, 5> kAll = {kSelfLicking, kPartnerLicking, kSelfReward,
                                                         kPartnerReward, kStimulus};

/// Vocabulary size of a known modality; throws ValidationError otherwise.
std::size_t vocab_size(std::string_view id);
}  // namespace modality

/// Non-negative count histogram over one modality's vocabulary.
struct FeatureVector {
  std::string modality;
  std::vector<std::uint32_t> counts;

  std::uint64_t total() const noexcept;
  bool operator==(const FeatureVector&) const = default;
};

struct BlockDocument {
  int day = 0;
  int block = 0;
  Condition condition = Condition::Self25;
  std::map<std::string, FeatureVector, std::less<>> observations;

  bool has(std::string_view modality_id) const { return observations.find(modality_id) != observations.end(); }
  const FeatureVector& at(std::string_view modality_id) const;
  bool operator==(const BlockDocument&) const = default;
};

struct Day {
  int index = 0;
  std::array<BlockDocument, kBlocksPerDay> blocks;
  bool operator==(const Day&) const = default;
};

struct Dataset {
  std::vector<Day> days;
  std::vector<int> train_days;
  std::vector<int> test_days;

  bool operator==(const Dataset&) const = default;
  std::size_t n_blocks() const noexcept { return days.size() * kBlocksPerDay; }
  /// All blocks of the given days, in day then block order.
  std::vector<BlockDocument> blocks_of(std::span<const int> day_indices) const;
  std::vector<BlockDocument> all_blocks() const;
  const Day& day(int index) const;
};

struct SimulatorParams {
  int n_days = 292;
  int trials_per_block = 40;
  /// Self-monkey block licking means, indexed by Condition.
  std::array<double, 6> licking_mean_per_condition = {0.45, 0.60, 0.75, 0.55, 0.45, 0.35};
  /// Partner licking mean = intercept + slope * partner reward probability.
  double partner_licking_intercept = 0.30;
  double partner_licking_slope = 0.50;
  double licking_noise_sd = 0.05;
  /// Day-level baseline shift shared by all six blocks of a day.
  double licking_day_sd = 0.10;
  /// Per-condition stimulus templates over the 512-word codebook; disjoint support.
  std::array<std::vector<std::uint32_t>, 6> stimulus_base_histograms = default_stimulus_templates();
  int stimulus_noise_tokens = 300;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SimulatorParams&) const = default;

  /// Six templates; template c places `mass` tokens evenly over `support`
  /// consecutive codebook entries starting at c * support.
  static std::array<std::vector<std::uint32_t>, 6> default_stimulus_templates(std::size_t support = 8,
                                                                              std::uint32_t mass = 40);
};

// Encoders ---------------------------------------------------------------

FeatureVector encode_rewards(std::uint32_t n_rewarded, std::uint32_t n_unrewarded,
                             std::string_view modality_id = modality::kSelfReward);

/// Per-day z-score licking encoding: {f_lick, f_no_lick} for each of the six blocks.
std::array<FeatureVector, kBlocksPerDay> encode_licking_day(std::span<const double> block_means,
                                                            std::string_view modality_id = modality::kSelfLicking);

FeatureVector encode_stimulus(Condition condition, const SimulatorParams& params, Rng& rng);

// Simulation and splitting -----------------------------------------------

Dataset simulate_dataset(const SimulatorParams& params);

/// Day-level random partition; train side has floor(fraction * n_days) days.
std::pair<std::vector<int>, std::vector<int>> split_days(std::span<const int> day_indices, double train_fraction,
                                                         std::uint64_t seed);
/// Returns a copy of `dataset` with train/test day lists filled in.
Dataset split_dataset(Dataset dataset, double train_fraction, std::uint64_t seed);

}  // namespace mmlda
