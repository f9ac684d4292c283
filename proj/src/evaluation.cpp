#include "mmlda/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mmlda/atomic_file.hpp"
#include "mmlda/error.hpp"
#include "mmlda/parallel.hpp"

namespace mmlda {

double rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw ValidationError("labelings differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.size() < 2) throw ValidationError("rand index needs at least two elements");
  std::uint64_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j, ++pairs)
      agree += ((a[i] == a[j]) == (b[i] == b[j])) ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

double rand_chance_level(int k) {
  if (k < 2) throw ValidationError("chance level needs k >= 2");
  const double kk = static_cast<double>(k);
  return (1.0 + (kk - 1.0) * (kk - 1.0)) / (kk * kk);
}

Labeling ground_truth(std::span<const BlockDocument> docs) {
  Labeling out;
  out.reserve(docs.size());
  for (const BlockDocument& d : docs) out.push_back(index_of(d.condition));
  return out;
}

std::uint64_t block_seed(std::uint64_t seed, const BlockDocument& doc) {
  return derive_seed(seed, {static_cast<std::uint64_t>(doc.day), static_cast<std::uint64_t>(doc.block)});
}

std::vector<NodeThetas> infer_all(const ComposedModel& model, std::span<const BlockDocument> docs,
                                  const EvalSettings& settings,
                                  std::optional<std::vector<std::string>> keep_modalities) {
  if (!model.trained()) throw StateError("model is not trained");
  std::vector<NodeThetas> out(docs.size());
  parallel_for(docs.size(), settings.threads, [&](std::size_t i) {
    const std::uint64_t s = block_seed(settings.seed, docs[i]);
    if (!keep_modalities) {
      out[i] = infer(model, docs[i], settings.inference, s);
      return;
    }
    BlockDocument partial = docs[i];
    std::erase_if(partial.observations, [&](const auto& kv) {
      return std::find(keep_modalities->begin(), keep_modalities->end(), kv.first) == keep_modalities->end();
    });
    out[i] = infer(model, partial, settings.inference, s);
  });
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ValidationError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Labeling classify_from_thetas(std::span<const NodeThetas> thetas) {
  Labeling out;
  out.reserve(thetas.size());
  for (const NodeThetas& t : thetas) {
    auto it = t.find(node::kSelfValue);
    if (it == t.end()) throw ValidationError("model has no self subjective-value node");
    out.push_back(static_cast<int>(argmax(it->second)));
  }
  return out;
}

Labeling classify_subjective_value(const ComposedModel& model, std::span<const BlockDocument> docs,
                                   const EvalSettings& settings) {
  if (!model.trained()) throw StateError("model is not trained");
  if (!model.has_node(node::kSelfValue)) throw ValidationError("model has no self subjective-value node");
  return classify_from_thetas(infer_all(model, docs, settings));
}

namespace {

std::pair<std::size_t, std::size_t> locate_modality(const ComposedModel& model, std::string_view id) {
  for (std::size_t i = 0; i < model.size(); ++i)
    for (std::size_t m = 0; m < model.node(i).observed.size(); ++m)
      if (model.node(i).observed[m].id == id) return {i, m};
  throw ValidationError("model has no modality '" + std::string(id) + "'");
}

std::pair<double, double> mean_sem(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::uint32_t binomial(Rng& rng, int n, double p) {
  std::uint32_t k = 0;
  for (int i = 0; i < n; ++i) k += uniform01(rng) < p ? 1u : 0u;
  return k;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

double predicted_lick_fraction(const ComposedModel& model, const NodeThetas& thetas) {
  const auto [node, m] = locate_modality(model, modality::kSelfLicking);
  const std::vector<double> p = mix_phi(model.frozen(node), m, thetas.at(model.node(node).id));
  return p[0];
}

InterpolationResult predict_licking_interpolation(const ComposedModel& model, std::span<const BlockDocument> docs,
                                                  const EvalSettings& settings) {
  const auto thetas = infer_all(model, docs, settings, std::vector<std::string>{std::string(modality::kStimulus)});
  InterpolationResult r;
  std::array<std::vector<double>, 6> by_condition;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const double f = predicted_lick_fraction(model, thetas[i]);
    r.per_block.push_back(f);
    by_condition[static_cast<std::size_t>(index_of(docs[i].condition))].push_back(f);
  }
  for (std::size_t c = 0; c < 6; ++c) {
    const auto [mean, sem] = mean_sem(by_condition[c]);
    r.per_condition[c] = ConditionSummary{kConditions[c], mean, sem, by_condition[c].size()};
  }
  return r;
}

LickingPrediction predict_licking_extrapolation(const ComposedModel& model, double self_p, double partner_p,
                                                int n_trials, const EvalSettings& settings) {
  if (!(self_p >= 0.0 && self_p <= 1.0 && partner_p >= 0.0 && partner_p <= 1.0))
    throw ValidationError("reward probabilities must lie in [0, 1]");
  if (n_trials < 1) throw ValidationError("n_trials must be >= 1");
  if (settings.extrapolation_replicates < 1) throw ValidationError("need at least one replicate");
  if (!model.trained()) throw StateError("model is not trained");
  const auto n = static_cast<std::size_t>(settings.extrapolation_replicates);
  LickingPrediction out;
  out.replicates.resize(n);
  parallel_for(n, settings.threads, [&](std::size_t r) {
    Rng rng(derive_seed(settings.seed, {0xe7a0u, r}));
    const std::uint32_t self_hits = binomial(rng, n_trials, self_p);
    const std::uint32_t partner_hits = binomial(rng, n_trials, partner_p);
    const auto trials = static_cast<std::uint32_t>(n_trials);
    BlockDocument doc;
    doc.day = -1;
    doc.block = static_cast<int>(r);
    doc.observations.emplace(modality::kSelfReward,
                             encode_rewards(self_hits, trials - self_hits, modality::kSelfReward));
    doc.observations.emplace(modality::kPartnerReward,
                             encode_rewards(partner_hits, trials - partner_hits, modality::kPartnerReward));
    const NodeThetas th = infer(model, doc, settings.inference, derive_seed(settings.seed, {0xe7a1u, r}));
    out.replicates[r] = predicted_lick_fraction(model, th);
  });
  std::tie(out.mean, out.sem) = mean_sem(out.replicates);
  return out;
}

std::vector<ExtrapolationRow> extrapolation_sweep(const ComposedModel& model, const EvalSettings& settings) {
  constexpr double kFixed = 0.20;
  std::vector<ExtrapolationRow> rows;
  for (const char* type : {"self_variable", "partner_variable"}) {
    const bool self_var = std::string_view(type) == "self_variable";
    for (int g = 0; g <= 20; ++g) {
      const double p = g / 20.0;
      ExtrapolationRow row{type, self_var ? p : kFixed, self_var ? kFixed : p, {}};
      row.prediction =
          predict_licking_extrapolation(model, row.self_p, row.partner_p, settings.extrapolation_trials, settings);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("spearman needs two equal-length series (n >= 2)");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------

std::size_t JointModel::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].id == id) return i;
  throw ValidationError("joint model has no variable '" + std::string(id) + "'");
}

void JointModel::validate() const {
  std::size_t roots = 0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Variable& v = vars[i];
    if (v.states == 0) throw ValidationError("variable '" + v.id + "' has no states");
    const std::size_t cols = v.parent ? vars.at(*v.parent).states : 1;
    if (v.parent && *v.parent >= i) throw ValidationError("variables must follow their parent");
    if (!v.parent) ++roots;
    if (v.table.size() != v.states * cols) throw ValidationError("variable '" + v.id + "' has a malformed table");
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t a = 0; a < v.states; ++a) {
        if (v.table[a * cols + c] < 0.0) throw ValidationError("negative probability in '" + v.id + "'");
        s += v.table[a * cols + c];
      }
      if (std::abs(s - 1.0) > 1e-9) throw ValidationError("table of '" + v.id + "' is not normalized");
    }
  }
  if (roots != 1) throw ValidationError("joint model must have exactly one root");
}

namespace {

// Row-major matrix helpers.
std::vector<double> matmul(const std::vector<double>& a, std::size_t ar, std::size_t ac, const std::vector<double>& b,
                           std::size_t bc) {
  std::vector<double> out(ar * bc, 0.0);
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t k = 0; k < ac; ++k) {
      const double x = a[i * ac + k];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < bc; ++j) out[i * bc + j] += x * b[k * bc + j];
    }
  return out;
}

std::vector<std::size_t> path_to_root(const JointModel& jm, std::size_t v) {
  std::vector<std::size_t> path{v};
  while (jm.vars[path.back()].parent) path.push_back(*jm.vars[path.back()].parent);
  return path;
}

/// P(x | anc) as an x.states x anc.states matrix; anc must be an ancestor of x (or x).
std::vector<double> conditional(const JointModel& jm, std::size_t anc, std::size_t x) {
  std::vector<std::size_t> down;
  for (std::size_t v = x; v != anc; v = *jm.vars[v].parent) down.push_back(v);
  const std::size_t na = jm.vars[anc].states;
  std::vector<double> m(na * na, 0.0);
  for (std::size_t i = 0; i < na; ++i) m[i * na + i] = 1.0;
  std::size_t rows = na;
  for (auto it = down.rbegin(); it != down.rend(); ++it) {
    const auto& v = jm.vars[*it];
    m = matmul(v.table, v.states, rows, m, na);
    rows = v.states;
  }
  return m;
}

std::vector<double> marginal(const JointModel& jm, std::size_t v) {
  const std::size_t root = path_to_root(jm, v).back();
  return matmul(conditional(jm, root, v), jm.vars[v].states, jm.vars[root].states, jm.vars[root].table, 1);
}

}  // namespace

std::vector<PairwiseJoint> pairwise_joints(const JointModel& jm, std::string_view target) {
  jm.validate();
  const std::size_t t = jm.index_of(target);
  const auto t_path = path_to_root(jm, t);
  std::vector<PairwiseJoint> out;
  for (std::size_t v = 0; v < jm.vars.size(); ++v) {
    if (v == t) continue;
    const auto v_path = path_to_root(jm, v);
    std::size_t lca = v_path.back();
    for (std::size_t a : v_path)
      if (std::find(t_path.begin(), t_path.end(), a) != t_path.end()) {
        lca = a;
        break;
      }
    const std::size_t nl = jm.vars[lca].states;
    const std::vector<double> p_lca = marginal(jm, lca);
    const std::vector<double> cv = conditional(jm, lca, v);
    const std::vector<double> ct = conditional(jm, lca, t);
    PairwiseJoint pj{jm.vars[v].id, jm.vars[t].id, jm.vars[v].states, jm.vars[t].states, {}};
    pj.p.assign(pj.rows * pj.cols, 0.0);
    for (std::size_t a = 0; a < pj.rows; ++a)
      for (std::size_t b = 0; b < pj.cols; ++b)
        for (std::size_t l = 0; l < nl; ++l) pj.p[a * pj.cols + b] += p_lca[l] * cv[a * nl + l] * ct[b * nl + l];
    out.push_back(std::move(pj));
  }
  return out;
}

JointModel day_joint_model(const ComposedModel& model, std::span<const double> top_theta) {
  const auto arch = architecture_of(model.spec());
  if (!arch || *arch == Architecture::NCM)
    throw ValidationError("factorized joints are defined for IPM and ECM only (got '" + model.spec().name + "')");
  const std::size_t top = model.top();
  if (top_theta.size() != model.node(top).n_topics) throw ValidationError("top theta has the wrong size");

  JointModel jm;
  std::map<std::size_t, std::size_t> var_of_node;
  const auto& order = model.bottom_up();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t i = *it;
    const NodeSpec& spec = model.node(i);
    JointModel::Variable z{spec.id, spec.n_topics, std::nullopt, {}};
    if (auto p = model.parent(i)) {
      z.parent = var_of_node.at(*p);
      const FrozenUnit& parent = model.frozen(*p);
      z.table = parent.phi[parent.config.modality_index(spec.id)];
    } else {
      z.table.assign(top_theta.begin(), top_theta.end());
    }
    var_of_node[i] = jm.vars.size();
    jm.vars.push_back(std::move(z));
    for (std::size_t m = 0; m < spec.observed.size(); ++m)
      jm.vars.push_back(JointModel::Variable{"w" + spec.observed[m].id, spec.observed[m].vocab_size,
                                             var_of_node[i], model.frozen(i).phi[m]});
  }
  return jm;
}

std::vector<PairwiseJoint> factorized_joint(const ComposedModel& model, std::span<const double> top_theta) {
  return pairwise_joints(day_joint_model(model, top_theta), node::kSelfValue);
}

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h;
}

double nmi(const PairwiseJoint& joint) {
  std::vector<double> pa(joint.rows, 0.0), pb(joint.cols, 0.0);
  for (std::size_t i = 0; i < joint.rows; ++i)
    for (std::size_t j = 0; j < joint.cols; ++j) {
      pa[i] += joint.at(i, j);
      pb[j] += joint.at(i, j);
    }
  const double ha = entropy_bits(pa), hb = entropy_bits(pb);
  if (ha + hb <= 0.0) return 0.0;
  const double mi = ha + hb - entropy_bits(joint.p);
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired, WilcoxonMethod method) {
  std::vector<double> diffs;
  for (const auto& [x, y] : paired)
    if (x - y != 0.0) diffs.push_back(x - y);
  if (diffs.empty()) throw ValidationError("wilcoxon: all differences are zero");
  if (diffs.size() < 6)
    throw ValidationError("wilcoxon: needs at least 6 non-zero differences, got " + std::to_string(diffs.size()));

  std::vector<double> abs_d(diffs.size());
  std::transform(diffs.begin(), diffs.end(), abs_d.begin(), [](double d) { return std::abs(d); });
  const std::vector<double> ranks = average_ranks(abs_d);

  WilcoxonResult r;
  r.n = diffs.size();
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0) r.w_plus += ranks[i];

  const double n = static_cast<double>(r.n);
  const double mu = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::map<double, int> groups;
    for (double rk : ranks) ++groups[rk];
    for (const auto& [rk, t] : groups) tie_term += static_cast<double>(t) * t * t - t;
  }
  const double sigma = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0);
  const double dev = r.w_plus - mu;
  r.z = sigma > 0.0 ? std::copysign(std::max(0.0, std::abs(dev) - 0.5), dev) / sigma : 0.0;
  if (r.z == 0.0) r.z = 0.0;  // no negative zero

  const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && r.n < 20);
  if (!exact) {
    r.p = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
    return r;
  }
  if (r.n > 24) throw ValidationError("wilcoxon: exact enumeration limited to 24 non-zero differences");
  r.exact = true;
  const double observed = std::abs(dev) - 1e-9;
  const std::uint64_t patterns = std::uint64_t{1} << r.n;
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < r.n; ++i)
      if (mask >> i & 1u) w += ranks[i];
    if (std::abs(w - mu) >= observed) ++extreme;
  }
  r.p = static_cast<double>(extreme) / static_cast<double>(patterns);
  return r;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

NmiTable nmi_table(const ComposedModel& model, std::span<const BlockDocument> docs,
                   std::span<const NodeThetas> thetas) {
  if (docs.size() != thetas.size()) throw ValidationError("thetas are not aligned with documents");
  const std::string top_id = model.node(model.top()).id;
  std::map<int, std::vector<std::size_t>> by_day;
  for (std::size_t i = 0; i < docs.size(); ++i) by_day[docs[i].day].push_back(i);

  NmiTable table;
  table.architecture = model.spec().name;
  std::map<std::string, std::vector<double>> values;
  std::vector<std::string> order;
  for (const auto& [day, idx] : by_day) {
    std::vector<double> prior(model.node(model.top()).n_topics, 0.0);
    for (std::size_t i : idx) {
      const auto& th = thetas[i].at(top_id);
      for (std::size_t k = 0; k < prior.size(); ++k) prior[k] += th[k] / static_cast<double>(idx.size());
    }
    table.days.push_back(day);
    for (const PairwiseJoint& pj : factorized_joint(model, prior)) {
      if (!values.count(pj.a)) order.push_back(pj.a);
      values[pj.a].push_back(nmi(pj));
    }
  }
  for (const std::string& v : order) {
    NmiRecord rec{v, values[v], 0.0, 0.0, 0.0, std::nullopt};
    rec.median = quantile(rec.per_day, 0.5);
    rec.q1 = quantile(rec.per_day, 0.25);
    rec.q3 = quantile(rec.per_day, 0.75);
    table.records.push_back(std::move(rec));
  }
  return table;
}

void compare_nmi(NmiTable& a, const NmiTable& b) {
  if (a.days != b.days) throw ValidationError("NMI tables cover different days");
  for (NmiRecord& ra : a.records) {
    auto it = std::find_if(b.records.begin(), b.records.end(), [&](const NmiRecord& r) { return r.variable == ra.variable; });
    if (it == b.records.end()) continue;
    std::vector<std::pair<double, double>> paired;
    for (std::size_t d = 0; d < ra.per_day.size(); ++d) paired.emplace_back(ra.per_day[d], it->per_day[d]);
    try {
      ra.comparison = wilcoxon_signed_rank(paired, WilcoxonMethod::Auto);
    } catch (const ValidationError&) {
      ra.comparison.reset();
    }
  }
}

std::string topic_vectors_csv(const ComposedModel& model, std::span<const BlockDocument> docs,
                              std::span<const NodeThetas> thetas, std::string_view node_id) {
  if (!model.has_node(node_id)) throw ValidationError("model has no node '" + std::string(node_id) + "'");
  if (docs.size() != thetas.size()) throw ValidationError("thetas are not aligned with documents");
  const std::size_t k = model.node(model.index_of(node_id)).n_topics;
  std::ostringstream os;
  os << "day,block,condition";
  for (std::size_t z = 0; z < k; ++z) os << ",theta_" << z;
  os << '\n';
  for (std::size_t i = 0; i < docs.size(); ++i) {
    os << docs[i].day << ',' << docs[i].block << ',' << to_string(docs[i].condition);
    const auto it = thetas[i].find(node_id);
    if (it == thetas[i].end()) throw ValidationError("missing theta for node '" + std::string(node_id) + "'");
    for (double x : it->second) os << ',' << fmt(x);
    os << '\n';
  }
  return os.str();
}

void export_topic_vectors(const std::filesystem::path& path, const ComposedModel& model,
                          std::span<const BlockDocument> docs, std::span<const NodeThetas> thetas,
                          std::string_view node_id) {
  const std::string csv = topic_vectors_csv(model, docs, thetas, node_id);
  write_file_atomically(path, [&](std::ostream& out) { out << csv; });
}

std::string interpolation_csv(const InterpolationResult& r) {
  std::ostringstream os;
  os << "condition,mean,sem,n\n";
  for (const auto& c : r.per_condition) os << to_string(c.condition) << ',' << fmt(c.mean) << ',' << fmt(c.sem) << ',' << c.n << '\n';
  return os.str();
}

std::string extrapolation_csv(std::span<const ExtrapolationRow> rows) {
  std::ostringstream os;
  os << "block_type,self_p,partner_p,mean,sem\n";
  for (const auto& r : rows)
    os << r.block_type << ',' << fmt(r.self_p) << ',' << fmt(r.partner_p) << ',' << fmt(r.prediction.mean) << ','
       << fmt(r.prediction.sem) << '\n';
  return os.str();
}

}  // namespace mmlda
