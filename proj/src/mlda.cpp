#include "mmlda/mlda.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mmlda/error.hpp"

namespace mmlda {

void ModalityConfig::validate() const {
  if (vocab_size < 2) throw ValidationError("modality '" + id + "': vocab_size must be >= 2");
  if (!(beta > 0.0)) throw ValidationError("modality '" + id + "': beta must be positive");
  if (weight < 1) throw ValidationError("modality '" + id + "': weight must be >= 1");
}

void UnitConfig::validate() const {
  if (n_topics < 1) throw ValidationError("n_topics must be >= 1");
  if (n_topics > std::numeric_limits<TopicIndex>::max()) throw ValidationError("n_topics too large");
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (modalities.empty()) throw ValidationError("unit needs at least one modality");
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    modalities[i].validate();
    for (std::size_t j = 0; j < i; ++j)
      if (modalities[j].id == modalities[i].id) throw ValidationError("duplicate modality '" + modalities[i].id + "'");
  }
}

std::size_t UnitConfig::modality_index(std::string_view id) const {
  for (std::size_t i = 0; i < modalities.size(); ++i)
    if (modalities[i].id == id) return i;
  throw ValidationError("unit has no modality '" + std::string(id) + "'");
}

Histogram rescale(std::span<const std::uint32_t> counts, std::uint32_t weight) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw ValidationError("cannot rescale a zero-mass vector");
  Histogram out(counts.size());
  std::vector<std::uint64_t> remainder(counts.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::uint64_t scaled = std::uint64_t{counts[i]} * weight;
    out[i] = static_cast<std::uint32_t>(scaled / total);
    remainder[i] = scaled % total;
    assigned += out[i];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < weight; ++r, ++assigned) ++out[order[r]];
  return out;
}

FeatureVector rescale(const FeatureVector& v, std::uint32_t weight) {
  return FeatureVector{v.modality, rescale(v.counts, weight)};
}

namespace {

std::vector<Token> expand(const UnitConfig& cfg, const UnitDocument& doc) {
  if (doc.histograms.size() != cfg.modalities.size())
    throw ValidationError("document has " + std::to_string(doc.histograms.size()) + " modality slots, unit expects " +
                          std::to_string(cfg.modalities.size()));
  std::vector<Token> out;
  for (std::size_t m = 0; m < doc.histograms.size(); ++m) {
    if (!doc.histograms[m]) continue;
    const Histogram& h = *doc.histograms[m];
    if (h.size() != cfg.modalities[m].vocab_size)
      throw ValidationError("modality '" + cfg.modalities[m].id + "' histogram has " + std::to_string(h.size()) +
                            " entries, expected " + std::to_string(cfg.modalities[m].vocab_size));
    for (std::uint32_t w = 0; w < h.size(); ++w)
      out.insert(out.end(), h[w], Token{static_cast<std::uint16_t>(m), w});
  }
  return out;
}

TopicIndex random_topic(Rng& rng, std::size_t k) { return static_cast<TopicIndex>(rng() % k); }

void add(CountTables& t, std::size_t j, const Token& tok, TopicIndex z, std::size_t k) {
  ++t.doc_topic[j * k + z];
  ++t.word_topic[tok.modality][tok.word * k + z];
  ++t.topic_total[tok.modality][z];
}

/// Rescales a bias row so its maximum is exactly 1; a constant row becomes all ones.
std::vector<double> normalized_bias(std::span<const double> b, std::size_t k) {
  if (b.size() != k) throw ValidationError("bias has " + std::to_string(b.size()) + " entries, expected " +
                                           std::to_string(k));
  double hi = 0.0;
  for (double x : b) {
    if (!(x > 0.0)) throw ValidationError("bias entries must be strictly positive");
    hi = std::max(hi, x);
  }
  std::vector<double> out(b.begin(), b.end());
  for (double& x : out) x /= hi;
  return out;
}

/// Index of the first cumulative weight exceeding u * total.
std::size_t draw(std::span<const double> cumulative, Rng& rng) {
  const double target = uniform01(rng) * cumulative.back();
  std::size_t k = 0;
  while (k + 1 < cumulative.size() && cumulative[k] <= target) ++k;
  return k;
}

}  // namespace

UnitState init_unit(UnitConfig config, std::span<const UnitDocument> docs, std::uint64_t seed) {
  config.validate();
  UnitState s;
  s.config = std::move(config);
  s.seed = seed;
  s.rng.seed(seed);
  const std::size_t k = s.config.n_topics;
  auto& t = s.tables;
  t.n_topics = k;
  t.doc_topic.assign(docs.size() * k, 0);
  for (const auto& m : s.config.modalities) {
    t.word_topic.emplace_back(m.vocab_size * k, 0);
    t.topic_total.emplace_back(k, 0);
  }
  s.tokens.reserve(docs.size());
  t.assignments.reserve(docs.size());
  for (std::size_t j = 0; j < docs.size(); ++j) {
    s.tokens.push_back(expand(s.config, docs[j]));
    auto& z = t.assignments.emplace_back(s.tokens.back().size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = random_topic(s.rng, k);
      add(t, j, s.tokens[j][i], z[i], k);
    }
  }
  return s;
}

void gibbs_sweep(UnitState& state, const TopicBias* bias) {
  const std::size_t k = state.config.n_topics;
  const std::size_t n_docs = state.n_docs();
  if (bias && bias->size() != n_docs)
    throw ValidationError("bias covers " + std::to_string(bias->size()) + " documents, unit has " +
                          std::to_string(n_docs));
  auto& t = state.tables;
  const double alpha = state.config.alpha;
  std::vector<double> beta, vbeta;
  for (const auto& m : state.config.modalities) {
    beta.push_back(m.beta);
    vbeta.push_back(static_cast<double>(m.vocab_size) * m.beta);
  }
  std::vector<double> cumulative(k);
  std::vector<double> b(k, 1.0);

  for (std::size_t j = 0; j < n_docs; ++j) {
    if (bias) b = normalized_bias((*bias)[j], k);
    std::uint32_t* ndk = &t.doc_topic[j * k];
    auto& zs = t.assignments[j];
    const auto& toks = state.tokens[j];
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const Token tok = toks[i];
      std::uint32_t* nwk = &t.word_topic[tok.modality][tok.word * k];
      std::uint32_t* nk = t.topic_total[tok.modality].data();
      const TopicIndex old = zs[i];
      --ndk[old];
      --nwk[old];
      --nk[old];
      double acc = 0.0;
      const double bm = beta[tok.modality], vb = vbeta[tok.modality];
      for (std::size_t z = 0; z < k; ++z) {
        acc += (ndk[z] + alpha) * (nwk[z] + bm) / (nk[z] + vb) * b[z];
        cumulative[z] = acc;
      }
      const auto nz = static_cast<TopicIndex>(draw(cumulative, state.rng));
      zs[i] = nz;
      ++ndk[nz];
      ++nwk[nz];
      ++nk[nz];
    }
  }
  ++state.sweeps;
}

void replace_modality(UnitState& state, std::size_t m, std::span<const std::optional<Histogram>> per_doc) {
  if (m >= state.config.modalities.size()) throw ValidationError("modality index out of range");
  if (per_doc.size() != state.n_docs())
    throw ValidationError("replacement covers " + std::to_string(per_doc.size()) + " documents, unit has " +
                          std::to_string(state.n_docs()));
  const std::size_t k = state.config.n_topics;
  auto& t = state.tables;
  const std::size_t vocab = state.config.modalities[m].vocab_size;
  for (std::size_t j = 0; j < state.n_docs(); ++j) {
    auto& toks = state.tokens[j];
    auto& zs = t.assignments[j];
    std::vector<Token> new_toks;
    std::vector<TopicIndex> new_zs;
    new_toks.reserve(toks.size());
    new_zs.reserve(toks.size());
    bool inserted = false;
    auto insert_new = [&] {
      inserted = true;
      if (!per_doc[j]) return;
      const Histogram& h = *per_doc[j];
      if (h.size() != vocab) throw ValidationError("replacement histogram has wrong vocabulary size");
      for (std::uint32_t w = 0; w < h.size(); ++w)
        for (std::uint32_t c = 0; c < h[w]; ++c) {
          const Token tok{static_cast<std::uint16_t>(m), w};
          const TopicIndex z = random_topic(state.rng, k);
          new_toks.push_back(tok);
          new_zs.push_back(z);
          add(t, j, tok, z, k);
        }
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const Token tok = toks[i];
      if (tok.modality == m) {
        --t.doc_topic[j * k + zs[i]];
        --t.word_topic[m][tok.word * k + zs[i]];
        --t.topic_total[m][zs[i]];
        continue;
      }
      if (!inserted && tok.modality > m) insert_new();
      new_toks.push_back(tok);
      new_zs.push_back(zs[i]);
    }
    if (!inserted) insert_new();
    toks = std::move(new_toks);
    zs = std::move(new_zs);
  }
}

void check_consistency(const UnitState& state) {
  const std::size_t k = state.config.n_topics;
  const auto& t = state.tables;
  if (t.assignments.size() != state.n_docs() || t.doc_topic.size() != state.n_docs() * k)
    throw StateError("count tables do not match the document count");
  std::vector<std::uint32_t> doc_topic(t.doc_topic.size(), 0);
  std::vector<std::vector<std::uint32_t>> word_topic, topic_total;
  for (const auto& m : state.config.modalities) {
    word_topic.emplace_back(m.vocab_size * k, 0);
    topic_total.emplace_back(k, 0);
  }
  for (std::size_t j = 0; j < state.n_docs(); ++j) {
    if (t.assignments[j].size() != state.tokens[j].size())
      throw StateError("document " + std::to_string(j) + ": assignment count differs from token count");
    for (std::size_t i = 0; i < state.tokens[j].size(); ++i) {
      const Token tok = state.tokens[j][i];
      const TopicIndex z = t.assignments[j][i];
      if (z >= k) throw StateError("assignment out of topic range");
      ++doc_topic[j * k + z];
      ++word_topic[tok.modality][tok.word * k + z];
      ++topic_total[tok.modality][z];
    }
    std::uint64_t row = 0;
    for (std::size_t z = 0; z < k; ++z) row += t.doc_topic[j * k + z];
    if (row != state.tokens[j].size())
      throw StateError("document " + std::to_string(j) + ": sum_k n_kj differs from its token count");
  }
  if (doc_topic != t.doc_topic) throw StateError("n_kj disagrees with assignments");
  if (word_topic != t.word_topic) throw StateError("n_mwk disagrees with assignments");
  if (topic_total != t.topic_total) throw StateError("n_mk disagrees with assignments");
  for (std::size_t m = 0; m < word_topic.size(); ++m)
    for (std::size_t z = 0; z < k; ++z) {
      std::uint64_t col = 0;
      for (std::size_t w = 0; w < state.config.modalities[m].vocab_size; ++w) col += t.word_topic[m][w * k + z];
      if (col != t.topic_total[m][z]) throw StateError("sum_w n_mwk differs from n_mk");
    }
}

std::vector<double> estimate_theta(const UnitState& state, std::size_t doc) {
  if (doc >= state.n_docs()) throw ValidationError("document index out of range");
  const std::size_t k = state.config.n_topics;
  const double alpha = state.config.alpha;
  const std::uint32_t* ndk = &state.tables.doc_topic[doc * k];
  const double n_j = static_cast<double>(std::accumulate(ndk, ndk + k, std::uint64_t{0}));
  std::vector<double> theta(k);
  for (std::size_t z = 0; z < k; ++z) theta[z] = (ndk[z] + alpha) / (n_j + static_cast<double>(k) * alpha);
  return theta;
}

std::vector<double> estimate_phi(const UnitState& state, std::size_t m) {
  if (m >= state.config.modalities.size()) throw ValidationError("modality index out of range");
  const std::size_t k = state.config.n_topics;
  const auto& mc = state.config.modalities[m];
  const double vb = static_cast<double>(mc.vocab_size) * mc.beta;
  std::vector<double> phi(mc.vocab_size * k);
  for (std::size_t w = 0; w < mc.vocab_size; ++w)
    for (std::size_t z = 0; z < k; ++z)
      phi[w * k + z] = (state.tables.word_topic[m][w * k + z] + mc.beta) / (state.tables.topic_total[m][z] + vb);
  return phi;
}

FrozenUnit freeze(const UnitState& state) {
  FrozenUnit f{state.config, {}};
  for (std::size_t m = 0; m < state.config.modalities.size(); ++m) f.phi.push_back(estimate_phi(state, m));
  return f;
}

InferenceResult infer_unseen(const FrozenUnit& unit, const UnitDocument& doc, const InferenceOptions& opts) {
  const std::size_t k = unit.config.n_topics;
  const std::vector<Token> toks = expand(unit.config, doc);
  if (toks.empty()) throw ValidationError("inference needs at least one observed token");
  if (opts.iterations < 1) throw ValidationError("inference needs at least one iteration");
  const std::vector<double> b = opts.bias ? normalized_bias(*opts.bias, k) : std::vector<double>(k, 1.0);
  const double alpha = unit.config.alpha;

  Rng rng(opts.seed);
  InferenceResult r;
  r.assignments.resize(toks.size());
  std::vector<std::uint32_t> ndk(k, 0);
  for (auto& z : r.assignments) {
    z = random_topic(rng, k);
    ++ndk[z];
  }
  std::vector<double> cumulative(k);
  r.theta.assign(k, 0.0);
  const int keep_from = opts.iterations / 2;
  const double denom = static_cast<double>(toks.size()) + static_cast<double>(k) * alpha;
  for (int it = 0; it < opts.iterations; ++it) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const Token tok = toks[i];
      const double* phi = &unit.phi[tok.modality][tok.word * k];
      --ndk[r.assignments[i]];
      double acc = 0.0;
      for (std::size_t z = 0; z < k; ++z) {
        acc += (ndk[z] + alpha) * phi[z] * b[z];
        cumulative[z] = acc;
      }
      const auto nz = static_cast<TopicIndex>(draw(cumulative, rng));
      r.assignments[i] = nz;
      ++ndk[nz];
    }
    if (it >= keep_from)
      for (std::size_t z = 0; z < k; ++z) r.theta[z] += (ndk[z] + alpha) / denom;
  }
  const double kept = static_cast<double>(opts.iterations - keep_from);
  for (double& x : r.theta) x /= kept;
  return r;
}

std::vector<double> mix_phi(const FrozenUnit& unit, std::size_t target_m, std::span<const double> theta) {
  const std::size_t k = unit.config.n_topics;
  if (target_m >= unit.config.modalities.size()) throw ValidationError("modality index out of range");
  if (theta.size() != k) throw ValidationError("theta has the wrong number of topics");
  const std::size_t vocab = unit.config.modalities[target_m].vocab_size;
  std::vector<double> out(vocab, 0.0);
  for (std::size_t w = 0; w < vocab; ++w)
    for (std::size_t z = 0; z < k; ++z) out[w] += unit.phi_at(target_m, w, z) * theta[z];
  return out;
}

std::vector<double> predict_modality(const FrozenUnit& unit, const UnitDocument& partial, std::size_t target_m,
                                     const InferenceOptions& opts) {
  if (target_m >= partial.histograms.size()) throw ValidationError("modality index out of range");
  if (partial.histograms[target_m])
    throw ValidationError("target modality '" + unit.config.modalities[target_m].id + "' is observed");
  const InferenceResult r = infer_unseen(unit, partial, opts);
  return mix_phi(unit, target_m, r.theta);
}

}  // namespace mmlda
