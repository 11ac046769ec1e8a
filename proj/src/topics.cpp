#include "cqa/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"

namespace cqa {

double lda_log_likelihood(const LdaModel& model,
                          const std::vector<std::vector<int>>& doc_ids,
                          const std::vector<std::vector<int>>& doc_topic_counts) {
  const int K = model.K;
  const int V = model.vocab.size();
  double ll = 0.0;
  std::vector<double> theta(K);
  for (size_t d = 0; d < doc_ids.size(); ++d) {
    const auto& ids = doc_ids[d];
    if (ids.empty()) continue;
    const double nd = static_cast<double>(ids.size());
    for (int k = 0; k < K; ++k)
      theta[k] = (doc_topic_counts[d][k] + model.alpha) / (nd + K * model.alpha);
    for (int w : ids) {
      double p = 0.0;
      for (int k = 0; k < K; ++k) {
        const double phi = (model.word_count(k, w) + model.beta) /
                           (model.topic_totals[k] + V * model.beta);
        p += theta[k] * phi;
      }
      ll += std::log(p);
    }
  }
  return ll;
}

LdaModel train_lda(const std::vector<std::vector<std::string>>& docs, int K,
                   double alpha, double beta, int iterations, uint64_t seed) {
  if (K < 2) throw ConfigError("lda: K must be >= 2");
  if (alpha <= 0.0 || beta <= 0.0) throw ConfigError("lda: alpha and beta must be positive");
  bool any_token = false;
  for (const auto& d : docs)
    if (!d.empty()) {
      any_token = true;
      break;
    }
  if (docs.empty() || !any_token) throw ConfigError("lda: empty corpus");

  LdaModel model;
  model.K = K;
  model.alpha = alpha;
  model.beta = beta;
  model.vocab = build_vocabulary(docs, 1);
  const int V = model.vocab.size();

  std::vector<std::vector<int>> doc_ids(docs.size());
  for (size_t d = 0; d < docs.size(); ++d) {
    doc_ids[d].reserve(docs[d].size());
    for (const auto& tok : docs[d]) doc_ids[d].push_back(model.vocab.lookup(tok));
  }

  model.topic_word_counts.assign(static_cast<size_t>(K) * V, 0);
  model.topic_totals.assign(K, 0);
  std::vector<std::vector<int>> doc_topic(docs.size(), std::vector<int>(K, 0));
  std::vector<std::vector<int>> z(docs.size());

  Rng rng(seed);
  for (size_t d = 0; d < doc_ids.size(); ++d) {
    z[d].resize(doc_ids[d].size());
    for (size_t i = 0; i < doc_ids[d].size(); ++i) {
      const int k = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
      z[d][i] = k;
      ++doc_topic[d][k];
      ++model.topic_word_counts[static_cast<size_t>(k) * V + doc_ids[d][i]];
      ++model.topic_totals[k];
    }
  }

  const double v_beta = V * beta;
  std::vector<double> cum(K);
  for (int sweep = 1; sweep <= iterations; ++sweep) {
    for (size_t d = 0; d < doc_ids.size(); ++d) {
      auto& nd = doc_topic[d];
      for (size_t i = 0; i < doc_ids[d].size(); ++i) {
        const int w = doc_ids[d][i];
        const int old_k = z[d][i];
        --nd[old_k];
        --model.topic_word_counts[static_cast<size_t>(old_k) * V + w];
        --model.topic_totals[old_k];

        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          total += (nd[k] + alpha) *
                   (model.topic_word_counts[static_cast<size_t>(k) * V + w] + beta) /
                   (model.topic_totals[k] + v_beta);
          cum[k] = total;
        }
        const double u = rng.uniform() * total;
        int new_k = K - 1;
        for (int k = 0; k < K; ++k)
          if (u < cum[k]) {
            new_k = k;
            break;
          }

        z[d][i] = new_k;
        ++nd[new_k];
        ++model.topic_word_counts[static_cast<size_t>(new_k) * V + w];
        ++model.topic_totals[new_k];
      }
    }
    if (sweep % 10 == 0)
      model.ll_history.emplace_back(sweep,
                                    lda_log_likelihood(model, doc_ids, doc_topic));
  }
  return model;
}

TopicDistribution infer_topics(const LdaModel& model,
                               const std::vector<std::string>& tokens,
                               int infer_iterations, uint64_t seed) {
  const int K = model.K;
  const int V = model.vocab.size();
  TopicDistribution dist;
  dist.p.assign(K, 1.0 / K);

  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const int w = model.vocab.lookup(tok);
    if (w >= 0) ids.push_back(w);
  }
  if (ids.empty()) {
    dist.degenerate = true;
    return dist;
  }

  Rng rng(seed);
  std::vector<int> z(ids.size());
  std::vector<int> nd(K, 0);
  for (size_t i = 0; i < ids.size(); ++i) {
    const int k = static_cast<int>(rng.below(static_cast<uint64_t>(K)));
    z[i] = k;
    ++nd[k];
  }

  const double v_beta = V * model.beta;
  const double denom = static_cast<double>(ids.size()) + K * model.alpha;
  std::vector<double> cum(K);
  std::vector<double> avg(K, 0.0);
  int samples = 0;

  auto accumulate = [&] {
    for (int k = 0; k < K; ++k) avg[k] += (nd[k] + model.alpha) / denom;
    ++samples;
  };

  if (infer_iterations <= 0) {
    accumulate();
  } else {
    for (int sweep = 0; sweep < infer_iterations; ++sweep) {
      for (size_t i = 0; i < ids.size(); ++i) {
        const int w = ids[i];
        --nd[z[i]];
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          total += (nd[k] + model.alpha) * (model.word_count(k, w) + model.beta) /
                   (model.topic_totals[k] + v_beta);
          cum[k] = total;
        }
        const double u = rng.uniform() * total;
        int new_k = K - 1;
        for (int k = 0; k < K; ++k)
          if (u < cum[k]) {
            new_k = k;
            break;
          }
        z[i] = new_k;
        ++nd[new_k];
      }
      if (sweep >= infer_iterations / 2) accumulate();
    }
  }

  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    dist.p[k] = avg[k] / samples;
    total += dist.p[k];
  }
  for (int k = 0; k < K; ++k) dist.p[k] /= total;
  return dist;
}

double topic_similarity(const TopicDistribution& p, const TopicDistribution& q) {
  return cosine_similarity(p.p, q.p);
}

void save_lda(const std::string& path, const LdaModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lda model: " + path);
  const int V = model.vocab.size();
  out << model.K << ' ' << V << ' ' << model.alpha << ' ' << model.beta << '\n';
  for (int k = 0; k < model.K; ++k) {
    for (int w = 0; w < V; ++w) {
      if (w) out << ' ';
      out << model.word_count(k, w);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);

  std::ofstream vout(path + ".vocab");
  if (!vout) throw IoError("cannot write lda vocabulary: " + path + ".vocab");
  for (const auto& word : model.vocab.words) vout << word << '\n';
  if (!vout) throw IoError("write failed: " + path + ".vocab");
}

LdaModel load_lda(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lda model: " + path);
  LdaModel model;
  int V = 0;
  if (!(in >> model.K >> V >> model.alpha >> model.beta) || model.K < 2 || V <= 0)
    throw FormatError("bad lda header in " + path);
  model.topic_word_counts.resize(static_cast<size_t>(model.K) * V);
  for (auto& c : model.topic_word_counts) {
    if (!(in >> c)) throw FormatError("truncated lda counts in " + path);
    if (c < 0) throw FormatError("negative lda count in " + path);
  }
  long long extra;
  if (in >> extra) throw FormatError("lda file has trailing counts in " + path);

  std::ifstream vin(path + ".vocab");
  if (!vin) throw IoError("cannot open lda vocabulary: " + path + ".vocab");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(vin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  if (static_cast<int>(words.size()) != V)
    throw FormatError("lda vocabulary size does not match header V in " + path);

  model.vocab.min_count = 0;
  model.vocab.words = std::move(words);
  model.vocab.counts.assign(V, 0);
  for (int w = 0; w < V; ++w)
    model.vocab.index[model.vocab.words[w]] = w;

  model.topic_totals.assign(model.K, 0);
  for (int k = 0; k < model.K; ++k) {
    int64_t total = 0;
    for (int w = 0; w < V; ++w) {
      const int c = model.word_count(k, w);
      total += c;
      model.vocab.counts[w] += c;
    }
    model.topic_totals[k] = total;
  }
  return model;
}

}  // namespace cqa
