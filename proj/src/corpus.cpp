#include "mmlda/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmlda/error.hpp"

namespace mmlda {

namespace {
constexpr double kFixedProbability = 0.20;
constexpr std::array<double, 3> kVariableLevels = {0.25, 0.50, 0.75};
}  // namespace

RewardProbabilities reward_probabilities(Condition c) noexcept {
  const int i = index_of(c);
  if (i < 3) return {kVariableLevels[static_cast<std::size_t>(i)], kFixedProbability};
  return {kFixedProbability, kVariableLevels[static_cast<std::size_t>(i - 3)]};
}

bool is_self_variable(Condition c) noexcept { return index_of(c) < 3; }

std::string_view to_string(Condition c) noexcept {
  switch (c) {
    case Condition::Self25: return "Self25";
    case Condition::Self50: return "Self50";
    case Condition::Self75: return "Self75";
    case Condition::Partner25: return "Partner25";
    case Condition::Partner50: return "Partner50";
    case Condition::Partner75: return "Partner75";
  }
  return "?";
}

Condition condition_from_string(std::string_view name) {
  for (Condition c : kConditions)
    if (to_string(c) == name) return c;
  throw ValidationError("unknown condition label '" + std::string(name) + "'");
}

std::size_t modality::vocab_size(std::string_view id) {
  if (id == kSelfLicking || id == kPartnerLicking) return kLickingVocab;
  if (id == kSelfReward || id == kPartnerReward) return kRewardVocab;
  if (id == kStimulus) return kStimulusVocab;
  throw ValidationError("unknown modality '" + std::string(id) + "'");
}

std::uint64_t FeatureVector::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

const FeatureVector& BlockDocument::at(std::string_view modality_id) const {
  auto it = observations.find(modality_id);
  if (it == observations.end())
    throw ValidationError("block (day " + std::to_string(day) + ", block " + std::to_string(block) +
                          ") has no observation for modality '" + std::string(modality_id) + "'");
  return it->second;
}

std::vector<BlockDocument> Dataset::blocks_of(std::span<const int> day_indices) const {
  std::vector<BlockDocument> out;
  out.reserve(day_indices.size() * kBlocksPerDay);
  for (int d : day_indices) {
    const Day& dd = day(d);
    out.insert(out.end(), dd.blocks.begin(), dd.blocks.end());
  }
  return out;
}

std::vector<BlockDocument> Dataset::all_blocks() const {
  std::vector<BlockDocument> out;
  out.reserve(n_blocks());
  for (const Day& d : days) out.insert(out.end(), d.blocks.begin(), d.blocks.end());
  return out;
}

const Day& Dataset::day(int index) const {
  auto it = std::find_if(days.begin(), days.end(), [&](const Day& d) { return d.index == index; });
  if (it == days.end()) throw ValidationError("dataset has no day " + std::to_string(index));
  return *it;
}

std::array<std::vector<std::uint32_t>, 6> SimulatorParams::default_stimulus_templates(std::size_t support,
                                                                                      std::uint32_t mass) {
  if (support == 0 || support * 6 > modality::kStimulusVocab)
    throw ValidationError("stimulus template support must be in [1, 85]");
  std::array<std::vector<std::uint32_t>, 6> out;
  for (std::size_t c = 0; c < 6; ++c) {
    out[c].assign(modality::kStimulusVocab, 0);
    for (std::size_t i = 0; i < support; ++i)
      out[c][c * support + i] = mass / static_cast<std::uint32_t>(support) +
                                (i < mass % support ? 1u : 0u);
  }
  return out;
}

void SimulatorParams::validate() const {
  if (n_days < 1) throw ValidationError("n_days must be >= 1");
  if (trials_per_block < 1) throw ValidationError("trials_per_block must be >= 1");
  const auto& m = licking_mean_per_condition;
  if (!(m[0] < m[1] && m[1] < m[2]))
    throw ValidationError("self-variable licking means must be strictly increasing (Self25 < Self50 < Self75)");
  if (!(m[3] > m[4] && m[4] > m[5]))
    throw ValidationError(
        "partner-variable licking means must be strictly decreasing (Partner25 > Partner50 > Partner75)");
  if (licking_noise_sd < 0.0 || licking_day_sd < 0.0) throw ValidationError("licking noise must be >= 0");
  if (stimulus_noise_tokens < 0) throw ValidationError("stimulus_noise_tokens must be >= 0");
  std::vector<int> owner(modality::kStimulusVocab, -1);
  for (std::size_t c = 0; c < 6; ++c) {
    const auto& t = stimulus_base_histograms[c];
    if (t.size() != modality::kStimulusVocab) throw ValidationError("stimulus template must have 512 entries");
    std::uint64_t mass = 0;
    for (std::size_t w = 0; w < t.size(); ++w) {
      if (t[w] == 0) continue;
      mass += t[w];
      if (owner[w] >= 0) throw ValidationError("stimulus templates must have disjoint support");
      owner[w] = static_cast<int>(c);
    }
    if (mass == 0 && stimulus_noise_tokens == 0) throw ValidationError("stimulus template has zero mass");
  }
}

FeatureVector encode_rewards(std::uint32_t n_rewarded, std::uint32_t n_unrewarded, std::string_view modality_id) {
  if (std::uint64_t{n_rewarded} + n_unrewarded == 0) throw ValidationError("reward encoding needs at least one trial");
  return FeatureVector{std::string(modality_id), {n_rewarded, n_unrewarded}};
}

std::array<FeatureVector, kBlocksPerDay> encode_licking_day(std::span<const double> block_means,
                                                            std::string_view modality_id) {
  if (block_means.size() != kBlocksPerDay)
    throw ValidationError("licking encoding needs exactly six block means, got " +
                          std::to_string(block_means.size()));
  const double n = static_cast<double>(kBlocksPerDay);
  const double mean = std::accumulate(block_means.begin(), block_means.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : block_means) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  const auto range = std::minmax_element(block_means.begin(), block_means.end());
  if (*range.first == *range.second || !(sd > 0.0))
    throw ValidationError("degenerate licking day: all six block means are identical");

  std::array<long, kBlocksPerDay> scaled{};
  for (std::size_t i = 0; i < kBlocksPerDay; ++i) scaled[i] = std::lround((block_means[i] - mean) / sd * 1000.0);
  const long lo = *std::min_element(scaled.begin(), scaled.end());
  const long hi = *std::max_element(scaled.begin(), scaled.end()) - lo;

  std::array<FeatureVector, kBlocksPerDay> out;
  for (std::size_t i = 0; i < kBlocksPerDay; ++i) {
    const long lick = scaled[i] - lo;
    out[i] = FeatureVector{std::string(modality_id),
                           {static_cast<std::uint32_t>(lick), static_cast<std::uint32_t>(hi - lick)}};
  }
  return out;
}

FeatureVector encode_stimulus(Condition condition, const SimulatorParams& params, Rng& rng) {
  const auto c = static_cast<std::size_t>(index_of(condition));
  if (c >= 6) throw ValidationError("invalid condition");
  FeatureVector fv{std::string(modality::kStimulus), params.stimulus_base_histograms[c]};
  for (int t = 0; t < params.stimulus_noise_tokens; ++t)
    ++fv.counts[static_cast<std::size_t>(rng() % modality::kStimulusVocab)];
  return fv;
}

namespace {

double partner_licking_mean(const SimulatorParams& p, Condition c) {
  return p.partner_licking_intercept + p.partner_licking_slope * reward_probabilities(c).partner;
}

std::uint32_t binomial(Rng& rng, int n, double p) {
  std::uint32_t k = 0;
  for (int i = 0; i < n; ++i) k += uniform01(rng) < p ? 1u : 0u;
  return k;
}

double normal(Rng& rng, double sd) {
  if (sd == 0.0) return 0.0;
  // Box-Muller on the portable uniform source.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Day simulate_day(const SimulatorParams& params, int day_index) {
  Rng rng(derive_seed(params.seed, {0x5d1a, static_cast<std::uint64_t>(day_index)}));
  std::array<Condition, 6> order = kConditions;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  const double self_day = normal(rng, params.licking_day_sd);
  const double partner_day = normal(rng, params.licking_day_sd);
  std::array<double, 6> self_lick{}, partner_lick{};
  Day day;
  day.index = day_index;
  for (std::size_t b = 0; b < 6; ++b) {
    const Condition c = order[b];
    const auto probs = reward_probabilities(c);
    BlockDocument& doc = day.blocks[b];
    doc.day = day_index;
    doc.block = static_cast<int>(b);
    doc.condition = c;

    const auto n = static_cast<std::uint32_t>(params.trials_per_block);
    const std::uint32_t self_hits = binomial(rng, params.trials_per_block, probs.self);
    const std::uint32_t partner_hits = binomial(rng, params.trials_per_block, probs.partner);
    doc.observations.emplace(modality::kSelfReward, encode_rewards(self_hits, n - self_hits, modality::kSelfReward));
    doc.observations.emplace(modality::kPartnerReward,
                             encode_rewards(partner_hits, n - partner_hits, modality::kPartnerReward));
    doc.observations.emplace(modality::kStimulus, encode_stimulus(c, params, rng));

    self_lick[b] = params.licking_mean_per_condition[static_cast<std::size_t>(index_of(c))] + self_day +
                   normal(rng, params.licking_noise_sd);
    partner_lick[b] = partner_licking_mean(params, c) + partner_day + normal(rng, params.licking_noise_sd);
  }
  const auto self_fv = encode_licking_day(self_lick, modality::kSelfLicking);
  const auto partner_fv = encode_licking_day(partner_lick, modality::kPartnerLicking);
  for (std::size_t b = 0; b < 6; ++b) {
    day.blocks[b].observations.emplace(modality::kSelfLicking, self_fv[b]);
    day.blocks[b].observations.emplace(modality::kPartnerLicking, partner_fv[b]);
  }
  return day;
}

}  // namespace

Dataset simulate_dataset(const SimulatorParams& params) {
  params.validate();
  Dataset ds;
  ds.days.reserve(static_cast<std::size_t>(params.n_days));
  // Each day draws from its own derived stream, so days are independent of order.
  for (int d = 0; d < params.n_days; ++d) ds.days.push_back(simulate_day(params, d));
  return ds;
}

std::pair<std::vector<int>, std::vector<int>> split_days(std::span<const int> day_indices, double train_fraction,
                                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0, 1)");
  const auto n = static_cast<long>(day_indices.size());
  // Floor, with a tolerance for products like 0.8 * 10 that land a hair below an integer.
  const auto n_train = static_cast<long>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (n_train <= 0 || n_train >= n)
    throw ValidationError("split of " + std::to_string(n) + " days at fraction " + std::to_string(train_fraction) +
                          " leaves one side empty");
  std::vector<int> shuffled(day_indices.begin(), day_indices.end());
  Rng rng(derive_seed(seed, {0x5b17}));
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng() % (i + 1)]);
  std::vector<int> train(shuffled.begin(), shuffled.begin() + n_train);
  std::vector<int> test(shuffled.begin() + n_train, shuffled.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

Dataset split_dataset(Dataset dataset, double train_fraction, std::uint64_t seed) {
  std::vector<int> idx;
  idx.reserve(dataset.days.size());
  for (const Day& d : dataset.days) idx.push_back(d.index);
  auto [train, test] = split_days(idx, train_fraction, seed);
  dataset.train_days = std::move(train);
  dataset.test_days = std::move(test);
  return dataset;
}

}  // namespace mmlda
