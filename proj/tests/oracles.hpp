#pragma once
// Reference computations used by the tests, written independently of the library.
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct ToyToken {
  int doc;
  int modality;
  int word;
};

/// Exact per-token topic marginals of the collapsed LDA/MLDA posterior,
/// by enumerating all K^N assignments of N tokens.
inline std::vector<std::vector<double>> collapsed_marginals(const std::vector<ToyToken>& tokens, int n_docs, int K,
                                                            double alpha, const std::vector<int>& vocab,
                                                            const std::vector<double>& beta) {
  const int n = static_cast<int>(tokens.size());
  const int M = static_cast<int>(vocab.size());
  std::vector<std::vector<double>> marg(n, std::vector<double>(K, 0.0));
  long total = 1;
  for (int i = 0; i < n; ++i) total *= K;
  std::vector<double> logw(total);
  std::vector<int> z(n);
  double best = -1e300;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      z[i] = static_cast<int>(c % K);
      c /= K;
    }
    double lw = 0.0;
    for (int j = 0; j < n_docs; ++j) {
      int nj = 0;
      for (int k = 0; k < K; ++k) {
        int nkj = 0;
        for (int i = 0; i < n; ++i) nkj += tokens[i].doc == j && z[i] == k;
        nj += nkj;
        lw += std::lgamma(nkj + alpha);
      }
      lw -= std::lgamma(nj + K * alpha);
    }
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k) {
        int nmk = 0;
        for (int w = 0; w < vocab[m]; ++w) {
          int nmwk = 0;
          for (int i = 0; i < n; ++i) nmwk += tokens[i].modality == m && tokens[i].word == w && z[i] == k;
          nmk += nmwk;
          lw += std::lgamma(nmwk + beta[m]);
        }
        lw -= std::lgamma(nmk + vocab[m] * beta[m]);
      }
    logw[code] = lw;
    best = std::max(best, lw);
  }
  double norm = 0.0;
  for (long code = 0; code < total; ++code) {
    const double w = std::exp(logw[code] - best);
    norm += w;
    long c = code;
    for (int i = 0; i < n; ++i) {
      marg[i][c % K] += w;
      c /= K;
    }
  }
  for (auto& row : marg)
    for (double& v : row) v /= norm;
  return marg;
}

/// Two-sided exact Wilcoxon signed-rank p-value by enumerating all 2^n sign patterns.
/// `ranks` are the absolute-difference ranks; `w_plus` the observed positive rank sum.
inline double wilcoxon_exact(const std::vector<double>& ranks, double w_plus) {
  const int n = static_cast<int>(ranks.size());
  double total = 0.0;
  for (double r : ranks) total += r;
  const double mean = total / 2.0;
  const double observed = std::abs(w_plus - mean);
  long extreme = 0;
  const long patterns = 1L << n;
  for (long s = 0; s < patterns; ++s) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      if (s & (1L << i)) w += ranks[i];
    if (std::abs(w - mean) >= observed - 1e-12) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(patterns);
}

}  // namespace oracle
