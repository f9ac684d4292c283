#include <doctest.h>

#include <numeric>

#include "mmlda/error.hpp"
#include "mmlda/mlda.hpp"
#include "oracles.hpp"

using namespace mmlda;

namespace {

UnitConfig one_modality(std::size_t K, std::size_t W, double alpha = 1.0, double beta = 1.0) {
  UnitConfig c;
  c.n_topics = K;
  c.alpha = alpha;
  c.modalities.push_back(ModalityConfig{"m", W, beta, 200});
  return c;
}

UnitDocument doc_of(std::vector<Histogram> hs) {
  UnitDocument d;
  for (auto& h : hs) d.histograms.emplace_back(std::move(h));
  return d;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Separable two-topic corpus: words {0,1} only in even docs, {2,3} only in odd docs.
std::vector<UnitDocument> separable_corpus(int n_docs) {
  std::vector<UnitDocument> docs;
  for (int j = 0; j < n_docs; ++j) {
    UnitDocument d;
    d.histograms.push_back(j % 2 == 0 ? Histogram{10, 10, 0, 0} : Histogram{0, 0, 10, 10});
    d.histograms.push_back(j % 2 == 0 ? Histogram{20, 0} : Histogram{0, 20});
    docs.push_back(std::move(d));
  }
  return docs;
}

UnitConfig separable_config() {
  UnitConfig c;
  c.n_topics = 2;
  c.alpha = 0.1;
  c.modalities = {ModalityConfig{"a", 4, 0.1, 20}, ModalityConfig{"b", 2, 0.1, 20}};
  return c;
}

}  // namespace

TEST_CASE("rescale keeps proportions with largest-remainder rounding") {
  const Histogram a{30, 10};
  const Histogram b{1, 1, 1};
  const Histogram c{8, 32};
  CHECK(rescale(a, 200) == Histogram{150, 50});
  CHECK(rescale(b, 200) == Histogram{67, 67, 66});
  CHECK(rescale(c, 200) == Histogram{40, 160});
  const Histogram z{0, 0};
  CHECK_THROWS_AS(rescale(z, 200), ValidationError);

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    Histogram h(7);
    for (auto& v : h) v = static_cast<std::uint32_t>(rng() % 50);
    h[0] += 1;
    const std::uint32_t w = 1 + static_cast<std::uint32_t>(rng() % 400);
    const Histogram r = rescale(h, w);
    const double mass = std::accumulate(h.begin(), h.end(), 0.0);
    CHECK(std::accumulate(r.begin(), r.end(), 0u) == w);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(r[i] - h[i] * w / mass) < 1.0);
  }
}

TEST_CASE("theta and phi follow the posterior-mean formulas") {
  UnitConfig c = one_modality(2, 3);
  std::vector<UnitDocument> docs{doc_of({{4, 0, 0}}), doc_of({{0, 0, 0}})};
  UnitState s = init_unit(c, docs, 1);
  // Force every token of doc 0 onto topic 0.
  for (auto& z : s.tables.assignments[0]) z = 0;
  s.tables.doc_topic = {4, 0, 0, 0};
  s.tables.word_topic[0] = {4, 0, 0, 0, 0, 0};
  s.tables.topic_total[0] = {4, 0};
  check_consistency(s);
  const auto t0 = estimate_theta(s, 0);
  CHECK(t0[0] == doctest::Approx(5.0 / 6.0));
  CHECK(t0[1] == doctest::Approx(1.0 / 6.0));
  const auto t1 = estimate_theta(s, 1);
  CHECK(t1[0] == doctest::Approx(0.5));
  const auto phi = estimate_phi(s, 0);  // W x K
  CHECK(phi[0 * 2 + 0] == doctest::Approx(5.0 / 7.0));
  CHECK(phi[1 * 2 + 0] == doctest::Approx(1.0 / 7.0));
  CHECK(phi[0 * 2 + 1] == doctest::Approx(1.0 / 3.0));

  UnitConfig c3 = one_modality(3, 3);
  std::vector<UnitDocument> d3{doc_of({{0, 0, 9}})};
  UnitState s3 = init_unit(c3, d3, 1);
  for (auto& z : s3.tables.assignments[0]) z = 0;
  s3.tables.doc_topic = {9, 0, 0};
  s3.tables.word_topic[0] = {0, 0, 0, 0, 0, 0, 9, 0, 0};
  s3.tables.topic_total[0] = {9, 0, 0};
  check_consistency(s3);
  const auto p3 = estimate_phi(s3, 0);
  CHECK(p3[2 * 3 + 0] == doctest::Approx(10.0 / 12.0));
  CHECK(p3[0 * 3 + 0] == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("consistency check catches corrupted tables") {
  UnitState s = init_unit(one_modality(2, 3), std::vector<UnitDocument>{doc_of({{2, 1, 1}})}, 4);
  check_consistency(s);
  s.tables.doc_topic[0] += 1;
  CHECK_THROWS_AS(check_consistency(s), StateError);
}

TEST_CASE("K = 1 assigns everything to topic 0") {
  UnitState s = init_unit(one_modality(1, 3), std::vector<UnitDocument>{doc_of({{2, 1, 3}})}, 9);
  for (int i = 0; i < 5; ++i) gibbs_sweep(s);
  for (auto z : s.tables.assignments[0]) CHECK(z == 0);
  check_consistency(s);
}

TEST_CASE("Gibbs marginals match exact enumeration of the collapsed posterior") {
  // 2 topics, 3 words, 2 documents, 6 tokens.
  const UnitConfig c = one_modality(2, 3);
  const std::vector<UnitDocument> docs{doc_of({{2, 1, 0}}), doc_of({{0, 1, 2}})};
  std::vector<oracle::ToyToken> toy;
  for (int j = 0; j < 2; ++j)
    for (int w = 0; w < 3; ++w)
      for (std::uint32_t n = 0; n < (*docs[j].histograms[0])[w]; ++n) toy.push_back({j, 0, w});

  UnitState s = init_unit(c, docs, 11);
  // The sampler's token order must line up with the oracle's.
  std::size_t idx = 0;
  for (std::size_t j = 0; j < 2; ++j)
    for (const Token& t : s.tokens[j]) REQUIRE(static_cast<int>(t.word) == toy[idx++].word);

  // Label switching makes per-token marginals symmetric; compare the
  // label-invariant pairwise co-assignment probabilities as well.
  const auto exact = oracle::collapsed_marginals(toy, 2, 2, 1.0, {3}, {1.0});
  for (int i = 0; i < 5000; ++i) gibbs_sweep(s);
  const int n = static_cast<int>(toy.size());
  std::vector<std::vector<double>> freq(n, std::vector<double>(2, 0.0));
  const int samples = 50000;
  for (int it = 0; it < samples; ++it) {
    gibbs_sweep(s);
    idx = 0;
    for (std::size_t j = 0; j < 2; ++j)
      for (auto z : s.tables.assignments[j]) freq[idx++][z] += 1.0 / samples;
  }
  for (int i = 0; i < n; ++i) {
    const double tv = 0.5 * (std::abs(freq[i][0] - exact[i][0]) + std::abs(freq[i][1] - exact[i][1]));
    CHECK(tv < 0.05);
  }
}

TEST_CASE("uniform bias is exactly neutral") {
  SUBCASE("single unit") {
    const auto docs = separable_corpus(6);
    UnitState a = init_unit(separable_config(), docs, 21);
    UnitState b = a;
    const TopicBias uniform(docs.size(), std::vector<double>(2, 0.5));
    for (int i = 0; i < 1000; ++i) {
      gibbs_sweep(a);
      gibbs_sweep(b, &uniform);
    }
    CHECK(a.tables == b.tables);
  }
}

TEST_CASE("a strong bias pulls tokens towards the favoured topic") {
  const auto docs = separable_corpus(4);
  UnitState s = init_unit(separable_config(), docs, 2);
  const TopicBias bias(docs.size(), std::vector<double>{1.0, 1e-6});
  for (int i = 0; i < 20; ++i) gibbs_sweep(s, &bias);
  for (std::size_t j = 0; j < docs.size(); ++j) CHECK(estimate_theta(s, j)[0] > 0.95);
}

TEST_CASE("seeded determinism") {
  const auto docs = separable_corpus(8);
  UnitState a = init_unit(separable_config(), docs, 99);
  UnitState b = init_unit(separable_config(), docs, 99);
  for (int i = 0; i < 50; ++i) {
    gibbs_sweep(a);
    gibbs_sweep(b);
  }
  CHECK(a == b);
}

TEST_CASE("invariants hold after every sweep of a long fuzz run") {
  Rng rng(42);
  UnitConfig c;
  c.n_topics = 4;
  c.alpha = 0.5;
  c.modalities = {ModalityConfig{"x", 5, 0.3, 30}, ModalityConfig{"y", 3, 2.0, 20}};
  std::vector<UnitDocument> docs;
  for (int j = 0; j < 10; ++j) {
    UnitDocument d;
    Histogram x(5), y(3);
    for (auto& v : x) v = static_cast<std::uint32_t>(rng() % 6);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng() % 6);
    d.histograms.emplace_back(x);
    if (j % 3 == 0) d.histograms.emplace_back(std::nullopt);
    else d.histograms.emplace_back(y);
    docs.push_back(std::move(d));
  }
  UnitState s = init_unit(c, docs, 5);
  TopicBias bias(docs.size(), std::vector<double>(4));
  for (int it = 0; it < 1000; ++it) {
    for (auto& row : bias)
      for (double& v : row) v = 0.05 + uniform01(rng);
    gibbs_sweep(s, it % 2 ? &bias : nullptr);
    check_consistency(s);
    for (std::size_t j = 0; j < docs.size(); ++j) CHECK(sum(estimate_theta(s, j)) == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t m = 0; m < 2; ++m) {
      const auto phi = estimate_phi(s, m);
      const std::size_t W = c.modalities[m].vocab_size;
      for (std::size_t k = 0; k < 4; ++k) {
        double col = 0.0;
        for (std::size_t w = 0; w < W; ++w) col += phi[w * 4 + k];
        CHECK(col == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("replace_modality swaps one modality's tokens and keeps the tables consistent") {
  const auto docs = separable_corpus(4);
  UnitState s = init_unit(separable_config(), docs, 8);
  for (int i = 0; i < 10; ++i) gibbs_sweep(s);
  std::vector<std::optional<Histogram>> fresh(4, Histogram{3, 3});
  replace_modality(s, 1, fresh);
  check_consistency(s);
  for (const auto& toks : s.tokens) {
    int n1 = 0;
    for (const Token& t : toks) n1 += t.modality == 1;
    CHECK(n1 == 6);
  }
}

TEST_CASE("inference on unseen documents") {
  const auto docs = separable_corpus(20);
  UnitState s = init_unit(separable_config(), docs, 13);
  for (int i = 0; i < 200; ++i) gibbs_sweep(s);
  const FrozenUnit f = freeze(s);

  SUBCASE("a training document re-presented recovers its theta") {
    const auto r = infer_unseen(f, docs[3], InferenceOptions{200, 1, std::nullopt});
    const auto t = estimate_theta(s, 3);
    CHECK(std::abs(r.theta[0] - t[0]) + std::abs(r.theta[1] - t[1]) < 0.1);
  }
  SUBCASE("exclusive words select their topic and predict the other modality") {
    UnitDocument partial;
    partial.histograms = {Histogram{0, 0, 5, 5}, std::nullopt};
    const auto r = infer_unseen(f, partial, InferenceOptions{200, 2, std::nullopt});
    const std::size_t k = r.theta[0] > r.theta[1] ? 0 : 1;
    // The topic owning words 2/3 is the one whose phi puts its mass there.
    CHECK(f.phi_at(0, 2, k) > 0.4);
    const auto pred = predict_modality(f, partial, 1, InferenceOptions{200, 2, std::nullopt});
    CHECK(sum(pred) == doctest::Approx(1.0));
    CHECK(pred[1] > 0.9);
  }
  SUBCASE("nothing observed is an error, as is predicting an observed modality") {
    UnitDocument empty;
    empty.histograms = {std::nullopt, std::nullopt};
    CHECK_THROWS_AS(infer_unseen(f, empty, {}), ValidationError);
    CHECK_THROWS_AS(predict_modality(f, docs[0], 1, {}), ValidationError);
  }
}

TEST_CASE("prediction with K = 1 or a one-hot theta returns a phi column") {
  const auto docs = separable_corpus(4);
  UnitConfig c1 = separable_config();
  c1.n_topics = 1;
  UnitState s1 = init_unit(c1, docs, 3);
  gibbs_sweep(s1);
  const FrozenUnit f1 = freeze(s1);
  UnitDocument partial;
  partial.histograms = {Histogram{1, 0, 0, 0}, std::nullopt};
  const auto pred = predict_modality(f1, partial, 1, InferenceOptions{10, 1, std::nullopt});
  CHECK(pred[0] == doctest::Approx(f1.phi_at(1, 0, 0)).epsilon(1e-12));
  CHECK(infer_unseen(f1, partial, InferenceOptions{10, 1, std::nullopt}).theta == std::vector<double>{1.0});

  UnitState s2 = init_unit(separable_config(), docs, 3);
  gibbs_sweep(s2);
  const FrozenUnit f2 = freeze(s2);
  const std::vector<double> onehot{0.0, 1.0};
  const auto mixed = mix_phi(f2, 1, onehot);
  CHECK(mixed[0] == doctest::Approx(f2.phi_at(1, 0, 1)).epsilon(1e-12));
  CHECK(mixed[1] == doctest::Approx(f2.phi_at(1, 1, 1)).epsilon(1e-12));
}

TEST_CASE("config validation") {
  UnitConfig c = one_modality(2, 1);
  CHECK_THROWS_AS(c.validate(), ValidationError);
  UnitConfig none;
  CHECK_THROWS_AS(none.validate(), ValidationError);
  UnitConfig zero = one_modality(0, 3);
  CHECK_THROWS_AS(zero.validate(), ValidationError);
}
