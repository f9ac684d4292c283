#include <doctest.h>

#include <numeric>
#include <set>

#include "mmlda/composition.hpp"
#include "mmlda/error.hpp"
#include "mmlda/evaluation.hpp"
#include "mmlda/models.hpp"

using namespace mmlda;

namespace {

ModalityConfig licking() { return {"As", 2, 1.0, 200}; }
ModalityConfig reward() { return {"Rs", 2, 1.0, 200}; }

// The two-node subjective value model: zA(licking) under zR(reward + zA).
GraphSpec value_model() {
  NodeSpec a{"zA", 6, 1.0, {licking()}, {}, 1.0, 200};
  NodeSpec r{"zR", 6, 1.0, {reward()}, {"zA"}, 1.0, 200};
  return GraphSpec{"value", {a, r}};
}

std::vector<BlockDocument> small_corpus(int days, std::uint64_t seed = 1) {
  SimulatorParams p;
  p.n_days = days;
  p.seed = seed;
  return simulate_dataset(p).all_blocks();
}

// Cleanly separable data: many trials, no licking noise, clean stimulus.
Dataset clean_dataset(int days) {
  SimulatorParams p;
  p.n_days = days;
  p.trials_per_block = 400;
  p.licking_noise_sd = 0.0;
  p.licking_day_sd = 0.0;
  p.stimulus_noise_tokens = 0;
  p.seed = 4;
  return split_dataset(simulate_dataset(p), 0.8, 4);
}

}  // namespace

TEST_CASE("graph validation") {
  CHECK_NOTHROW(build(value_model()));
  CHECK(build(ipm_spec()).size() == 5);

  SUBCASE("cycle") {
    NodeSpec s{"zS", 6, 1.0, {{"S", 512, 1.0, 300}}, {"zR"}, 1.0, 200};
    NodeSpec r{"zR", 6, 1.0, {reward()}, {"zS"}, 1.0, 200};
    CHECK_THROWS_AS(build(GraphSpec{"loop", {s, r}}), ValidationError);
  }
  SUBCASE("duplicate id") {
    GraphSpec g = value_model();
    g.nodes[1].id = "zA";
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("node without inputs") {
    GraphSpec g = value_model();
    g.nodes[0].observed.clear();
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("modality attached twice") {
    GraphSpec g = value_model();
    g.nodes[1].observed.push_back(licking());
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("unknown child") {
    GraphSpec g = value_model();
    g.nodes[1].children.push_back("zX");
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("two top nodes") {
    GraphSpec g = value_model();
    g.nodes[1].children.clear();
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("two parents") {
    GraphSpec g = value_model();
    g.nodes.push_back(NodeSpec{"zT", 6, 1.0, {{"Rp", 2, 1.0, 200}}, {"zA", "zR"}, 1.0, 200});
    CHECK_THROWS_AS(build(g), ValidationError);
  }
  SUBCASE("bad vocabulary") {
    GraphSpec g = value_model();
    g.nodes[0].observed[0].vocab_size = 1;
    CHECK_THROWS_AS(build(g), ValidationError);
  }
}

TEST_CASE("forward histograms") {
  Rng rng(1);
  const std::vector<double> one{1.0};
  CHECK(sample_histogram(one, 200, rng) == Histogram{200});
  const std::vector<double> hot{0.0, 1.0, 0.0};
  CHECK(sample_histogram(hot, 50, rng) == Histogram{0, 50, 0});
  const std::vector<double> half{0.5, 0.5};
  const Histogram h = sample_histogram(half, 10000, rng);
  CHECK(std::abs(h[0] / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("backward message by hand on a 2x2 toy") {
  // Parent with 2 topics observing a 2-topic child pseudo-modality.
  FrozenUnit parent;
  parent.config.n_topics = 2;
  parent.config.modalities = {ModalityConfig{"child", 2, 1.0, 10}};
  // phi(child = c | parent = p) stored at c * 2 + p.
  parent.phi = {{0.9, 0.3, 0.1, 0.7}};
  const std::vector<double> theta{0.25, 0.75};
  const auto msg = backward_from_theta(parent, "child", theta);
  CHECK(msg[0] == doctest::Approx(0.9 * 0.25 + 0.3 * 0.75));
  CHECK(msg[1] == doctest::Approx(0.1 * 0.25 + 0.7 * 0.75));
  CHECK_THROWS_AS(backward_from_theta(parent, "other", theta), ValidationError);

  parent.phi = {{0.5, 0.5, 0.5, 0.5}};
  const std::vector<double> uniform{0.5, 0.5};
  const auto u = backward_from_theta(parent, "child", uniform);
  CHECK(u[0] == doctest::Approx(0.5));
}

TEST_CASE("messages conserve mass and untrained nodes refuse to send") {
  ComposedModel m = build(value_model());
  const auto docs = small_corpus(4);
  UnitConfig cfg = m.unit_config(0);
  std::vector<UnitDocument> uds;
  for (const auto& d : docs) uds.push_back(observed_unit_document(m, 0, d));
  UnitState s = init_unit(cfg, uds, 3);
  Rng rng(2);
  CHECK_THROWS_AS(forward_message(s, "zA", 200, rng), StateError);

  train(m, docs, TrainingSchedule{5, 2}, TrainOptions{7, false, {}});
  const auto fwd = forward_message(m.state("zA"), "zA", 200, rng);
  for (const auto& h : fwd.histograms) CHECK(std::accumulate(h.begin(), h.end(), 0u) == 200u);
  const auto back = backward_message(m.state("zR"), "zA");
  for (const auto& p : back.per_doc) {
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : p) CHECK(v > 0.0);
  }
  CHECK_THROWS_AS(backward_message(m.state("zR"), "zQ"), ValidationError);
}

TEST_CASE("training visits nodes bottom-up with the scheduled number of sweeps") {
  ComposedModel m = build(ipm_spec());
  const auto docs = small_corpus(3);
  std::vector<std::pair<std::string, int>> events;
  TrainOptions opts{5, false, [&](const TrainEvent& e) {
                      events.emplace_back(std::string(e.node_id), e.pass);
                      check_consistency(*e.state);
                    }};
  train(m, docs, TrainingSchedule{3, 2}, opts);
  CHECK(events.size() == 5u * 3u * 2u);
  for (int pass = 1; pass <= 2; ++pass) {
    std::set<std::string> done;
    for (const auto& [id, p] : events) {
      if (p != pass) continue;
      const NodeSpec& spec = m.node(m.index_of(id));
      for (const auto& c : spec.children) CHECK(done.count(c) == 1);
      done.insert(id);
    }
    CHECK(done.size() == 5);
  }
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.state(i).sweeps == 6u);
}

TEST_CASE("schedule (1,1) runs one sweep per node") {
  ComposedModel m = build(ncm_spec());
  train(m, small_corpus(2), TrainingSchedule{1, 1}, TrainOptions{1, false, {}});
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m.state(i).sweeps == 1u);
    check_consistency(m.state(i));
  }
}

TEST_CASE("training is deterministic and rejects missing modalities") {
  const auto docs = small_corpus(3);
  ComposedModel a = build(ecm_spec());
  ComposedModel b = build(ecm_spec());
  train(a, docs, TrainingSchedule{4, 2}, TrainOptions{11, false, {}});
  train(b, docs, TrainingSchedule{4, 2}, TrainOptions{11, false, {}});
  CHECK(a == b);

  auto broken = docs;
  broken[2].observations.erase(std::string(modality::kPartnerReward));
  ComposedModel c = build(ecm_spec());
  CHECK_THROWS_AS(train(c, broken, TrainingSchedule{1, 1}, TrainOptions{1, false, {}}), ValidationError);
}

TEST_CASE("uniform backward messages reduce a leaf to plain MLDA training") {
  const auto docs = small_corpus(3);
  ComposedModel m = build(ncm_spec());
  const TrainingSchedule sched{6, 3};
  train(m, docs, sched, TrainOptions{21, true, {}});

  const std::size_t leaf = m.index_of(node::kSelfAction);
  std::vector<UnitDocument> uds;
  for (const auto& d : docs) uds.push_back(observed_unit_document(m, leaf, d));
  UnitState plain = init_unit(m.unit_config(leaf), uds, derive_seed(21, {tag_of(node::kSelfAction)}));
  for (int i = 0; i < sched.inner_iterations * sched.global_passes; ++i) gibbs_sweep(plain);
  CHECK(plain.tables == m.state(leaf).tables);
}

TEST_CASE("inference contracts") {
  const Dataset ds = clean_dataset(30);
  const auto train_docs = ds.blocks_of(ds.train_days);
  ComposedModel m = build(ecm_spec());
  train(m, train_docs, TrainingSchedule{60, 3}, TrainOptions{3, false, {}});

  SUBCASE("training document re-presented") {
    const auto th = infer(m, train_docs[5], TrainingSchedule{100, 3}, 9);
    const auto ref = estimate_theta(m.state(node::kSituation), 5);
    double l1 = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) l1 += std::abs(th.find(node::kSituation)->second[k] - ref[k]);
    CHECK(l1 <= 0.15);
  }
  SUBCASE("image-only input defines every node") {
    BlockDocument d = train_docs[0];
    std::erase_if(d.observations, [](const auto& kv) { return kv.first != modality::kStimulus; });
    const auto th = infer(m, d, TrainingSchedule{20, 2}, 1);
    CHECK(th.size() == m.size());
    for (const auto& [id, t] : th) CHECK(std::accumulate(t.begin(), t.end(), 0.0) == doctest::Approx(1.0));
  }
  SUBCASE("reward-only input lands on the condition's dominant training topic") {
    std::map<Condition, std::array<int, 6>> votes;
    for (std::size_t j = 0; j < train_docs.size(); ++j)
      ++votes[train_docs[j].condition][argmax(estimate_theta(m.state(node::kSituation), j))];
    for (Condition c : {Condition::Self75, Condition::Partner75}) {
      const auto& v = votes[c];
      const auto dominant = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
      const auto p = reward_probabilities(c);
      BlockDocument d;
      d.observations.emplace(std::string(modality::kSelfReward),
                             encode_rewards(static_cast<std::uint32_t>(p.self * 400),
                                            static_cast<std::uint32_t>((1 - p.self) * 400), modality::kSelfReward));
      d.observations.emplace(std::string(modality::kPartnerReward),
                             encode_rewards(static_cast<std::uint32_t>(p.partner * 400),
                                            static_cast<std::uint32_t>((1 - p.partner) * 400),
                                            modality::kPartnerReward));
      const auto th = infer(m, d, TrainingSchedule{100, 3}, 5);
      CHECK(argmax(th.find(node::kSituation)->second) == dominant);
    }
  }
  SUBCASE("nothing observed") {
    BlockDocument empty;
    CHECK_THROWS_AS(infer(m, empty, TrainingSchedule{5, 1}, 1), ValidationError);
  }
}

TEST_CASE("NCM on separable data clusters the self-variable conditions") {
  const Dataset ds = clean_dataset(40);
  std::vector<BlockDocument> train_docs = ds.blocks_of(ds.train_days);
  ComposedModel m = build(ncm_spec());
  train(m, train_docs, TrainingSchedule{100, 3}, TrainOptions{2, false, {}});
  Labeling pred, truth;
  for (std::size_t j = 0; j < train_docs.size(); ++j) {
    if (!is_self_variable(train_docs[j].condition)) continue;
    pred.push_back(static_cast<int>(argmax(estimate_theta(m.state(node::kSelfValue), j))));
    truth.push_back(index_of(train_docs[j].condition));
  }
  CHECK(rand_index(pred, truth) > 0.9);
}
