#include <doctest.h>

#include <cmath>

#include "mmlda/error.hpp"
#include "mmlda/tuning.hpp"

using namespace mmlda;

namespace {

struct SmallProblem {
  std::vector<BlockDocument> train_docs;
  std::vector<BlockDocument> heldout;
  TuningTarget target;
};

SmallProblem small_problem() {
  SimulatorParams p;
  p.n_days = 8;
  p.stimulus_noise_tokens = 60;
  const Dataset ds = split_dataset(simulate_dataset(p), 0.75, 2);
  SmallProblem s{ds.blocks_of(ds.train_days), ds.blocks_of(ds.test_days), {}};
  s.target.architecture = Architecture::ECM;
  s.target.schedule = TrainingSchedule{5, 1};
  s.target.train_seed = 3;
  s.target.eval.inference = TrainingSchedule{5, 1};
  return s;
}

}  // namespace

TEST_CASE("kl divergence") {
  const std::vector<double> p{0.3, 0.7};
  CHECK(kl_divergence(p, p) == 0.0);
  const std::vector<double> one{1.0, 0.0}, half{0.5, 0.5};
  CHECK(kl_divergence(one, half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const std::vector<double> q{0.75, 0.25};
  CHECK(kl_divergence(q, half) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)).epsilon(1e-12));
  CHECK(kl_divergence(q, half) == doctest::Approx(0.1308).epsilon(1e-3));
  // A sampling zero in the prediction stays finite.
  CHECK(std::isfinite(kl_divergence(half, one)));
  const std::vector<double> three{0.2, 0.3, 0.5};
  CHECK_THROWS_AS(kl_divergence(p, three), ValidationError);
}

TEST_CASE("candidate generation") {
  const WeightConfig base;
  SearchBudget b{6, 4, 50, 500};
  const auto c = weight_candidates(base, b);
  REQUIRE(c.size() == 6);
  CHECK(c[0] == base);
  for (std::size_t i = 1; i < c.size(); ++i)
    for (std::string_view id : modality::kAll) {
      CHECK(c[i].for_modality(id) >= 50u);
      CHECK(c[i].for_modality(id) <= 500u);
    }
  CHECK(weight_candidates(base, b) == c);
  CHECK_THROWS_AS(weight_candidates(base, SearchBudget{0, 1, 50, 500}), ValidationError);
  CHECK_THROWS_AS(weight_candidates(base, SearchBudget{3, 1, 600, 500}), ValidationError);
}

TEST_CASE("tuning returns the argmin of its trace") {
  const SmallProblem s = small_problem();
  const SearchBudget budget{10, 5, 50, 500};
  const TuningResult r = tune_weights(s.train_docs, s.heldout, s.target, budget);
  REQUIRE(r.trace.size() == 10);
  for (const TraceRow& row : r.trace) CHECK(r.best_score <= row.score);
  CHECK(r.best_score <= r.trace[0].score);  // the baseline is always a candidate
  CHECK(tune_weights(s.train_docs, s.heldout, s.target, budget).trace.size() == 10);

  const std::string csv = trace_csv(r.trace);
  CHECK(csv.rfind("candidate,w_As,w_Ap,w_Rs,w_Rp,w_S,kl\n", 0) == 0);
}

TEST_CASE("budget one returns the baseline; bad inputs are rejected") {
  const SmallProblem s = small_problem();
  const TuningResult r = tune_weights(s.train_docs, s.heldout, s.target, SearchBudget{1, 1, 50, 500});
  CHECK(r.best == WeightConfig{});
  CHECK(r.best_score == r.trace[0].score);
  CHECK_THROWS_AS(tune_weights(s.train_docs, {}, s.target, SearchBudget{}), ValidationError);
  CHECK_THROWS_AS(tune_weights(s.train_docs, s.train_docs, s.target, SearchBudget{}), ValidationError);
}
