#include "mmlda/tuning.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <iomanip>

#include "mmlda/error.hpp"

namespace mmlda {

double kl_divergence(std::span<const double> p_true, std::span<const double> p_pred, double floor) {
  if (p_true.size() != p_pred.size())
    throw ValidationError("kl_divergence: supports differ (" + std::to_string(p_true.size()) + " vs " +
                          std::to_string(p_pred.size()) + " outcomes)");
  double kl = 0.0;
  for (std::size_t i = 0; i < p_true.size(); ++i) {
    if (p_true[i] < 0.0 || p_pred[i] < 0.0) throw ValidationError("kl_divergence: negative probability");
    if (p_true[i] == 0.0) continue;
    kl += p_true[i] * std::log(p_true[i] / std::max(p_pred[i], floor));
  }
  return std::max(kl, 0.0);
}

void SearchBudget::validate() const {
  if (n_candidates < 1) throw ValidationError("n_candidates must be >= 1");
  if (min_weight < 1 || min_weight > max_weight) throw ValidationError("weight range must satisfy 1 <= min <= max");
}

std::vector<WeightConfig> weight_candidates(const WeightConfig& baseline, const SearchBudget& budget) {
  budget.validate();
  baseline.validate();
  std::vector<WeightConfig> out{baseline};
  Rng rng(derive_seed(budget.seed, {0x7a9e}));
  const double lo = std::log(static_cast<double>(budget.min_weight));
  const double hi = std::log(static_cast<double>(budget.max_weight));
  while (out.size() < static_cast<std::size_t>(budget.n_candidates)) {
    WeightConfig w;
    for (std::string_view id : modality::kAll) {
      const double x = std::exp(lo + (hi - lo) * uniform01(rng));
      w.set(id, std::clamp(static_cast<std::uint32_t>(std::lround(x)), budget.min_weight, budget.max_weight));
    }
    out.push_back(w);
  }
  return out;
}

double heldout_licking_kl(const ComposedModel& model, std::span<const BlockDocument> heldout,
                          const EvalSettings& settings) {
  if (heldout.empty()) throw ValidationError("held-out set is empty");
  std::vector<std::string> keep;
  for (std::string_view id : modality::kAll)
    if (id != modality::kSelfLicking) keep.emplace_back(id);
  const auto thetas = infer_all(model, heldout, settings, keep);
  double total = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const FeatureVector& obs = heldout[i].at(modality::kSelfLicking);
    const double mass = static_cast<double>(obs.total());
    if (mass <= 0.0) throw ValidationError("held-out block has an empty licking histogram");
    std::vector<double> p_true;
    for (auto c : obs.counts) p_true.push_back(static_cast<double>(c) / mass);
    const double lick = predicted_lick_fraction(model, thetas[i]);
    const std::vector<double> p_pred{lick, 1.0 - lick};
    total += kl_divergence(p_true, p_pred);
  }
  return total / static_cast<double>(heldout.size());
}

TuningResult tune_weights(std::span<const BlockDocument> train_docs, std::span<const BlockDocument> heldout,
                          const TuningTarget& target, const SearchBudget& budget) {
  if (heldout.empty()) throw ValidationError("held-out set is empty");
  if (train_docs.empty()) throw ValidationError("training set is empty");
  std::set<std::pair<int, int>> train_keys;
  for (const auto& d : train_docs) train_keys.emplace(d.day, d.block);
  for (const auto& d : heldout)
    if (train_keys.count({d.day, d.block}))
      throw ValidationError("training and held-out sets overlap (day " + std::to_string(d.day) + ")");

  const std::vector<WeightConfig> candidates = weight_candidates(target.defaults.weights, budget);
  TuningResult result;
  result.trace.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    ModelDefaults d = target.defaults;
    d.weights = candidates[c];
    ComposedModel model = build(architecture_spec(target.architecture, d));
    train(model, train_docs, target.schedule, TrainOptions{target.train_seed, false, {}});
    result.trace[c] = TraceRow{candidates[c], heldout_licking_kl(model, heldout, target.eval)};
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < result.trace.size(); ++c)
    if (result.trace[c].score < result.trace[best].score) best = c;
  result.best = result.trace[best].weights;
  result.best_score = result.trace[best].score;
  return result;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::ostringstream os;
  os << "candidate";
  for (std::string_view id : modality::kAll) os << ",w_" << id;
  os << ",kl\n";
  for (std::size_t c = 0; c < trace.size(); ++c) {
    os << c;
    for (std::string_view id : modality::kAll) os << ',' << trace[c].weights.for_modality(id);
    os << ',' << std::setprecision(12) << trace[c].score << '\n';
  }
  return os.str();
}

}  // namespace mmlda
