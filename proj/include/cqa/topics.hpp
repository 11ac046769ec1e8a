#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cqa/embeddings.hpp"

namespace cqa {

struct LdaModel {
  int K = 0;
  double alpha = 0.5;
  double beta = 0.01;
  Vocabulary vocab;
  std::vector<int> topic_word_counts;  // K x V row-major
  std::vector<int64_t> topic_totals;   // K; row sums of topic_word_counts
  // (sweep, log-likelihood) recorded every 10 training sweeps
  std::vector<std::pair<int, double>> ll_history;

  int word_count(int k, int w) const {
    return topic_word_counts[static_cast<size_t>(k) * vocab.size() + w];
  }
};

struct TopicDistribution {
  std::vector<double> p;    // K entries, >= 0, summing to 1
  bool degenerate = false;  // set for empty or all-OOV input
};

// Collapsed Gibbs sampling with the full conditional
//   P(z_i = k | .) ~ (n_dk + alpha) (n_kw + beta) / (n_k + V beta).
// Deterministic for a fixed seed; the model keeps the counts of the final
// sweep. Throws ConfigError for an empty corpus or K < 2.
LdaModel train_lda(const std::vector<std::vector<std::string>>& docs, int K,
                   double alpha, double beta, int iterations, uint64_t seed);

// Gibbs over the new document with the topic-word counts held fixed; returns
// the smoothed empirical distribution (n_dk + alpha) / (n_d + K alpha),
// averaged over the second half of the sweeps. All-OOV input returns the
// uniform distribution with the degenerate flag set.
TopicDistribution infer_topics(const LdaModel& model,
                               const std::vector<std::string>& tokens,
                               int infer_iterations, uint64_t seed);

double topic_similarity(const TopicDistribution& p, const TopicDistribution& q);

// Corpus log-likelihood sum_d sum_i log sum_k theta_dk phi_kw under the
// smoothed estimates; the trainer records this every 10 sweeps.
double lda_log_likelihood(const LdaModel& model,
                          const std::vector<std::vector<int>>& doc_ids,
                          const std::vector<std::vector<int>>& doc_topic_counts);

// Model file: header "K V alpha beta", then K rows of V counts. The vocabulary
// is written next to it as "<path>.vocab", one word per line in index order.
void save_lda(const std::string& path, const LdaModel& model);
LdaModel load_lda(const std::string& path);

}  // namespace cqa
