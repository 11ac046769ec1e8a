#include "cqa/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"

namespace cqa {

static_assert(std::endian::native == std::endian::little,
              "binary embedding io assumes a little-endian host");

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            int min_count) {
  std::unordered_map<std::string, int64_t> freq;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++freq[tok];

  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [word, count] : freq)
    if (count >= min_count) kept.emplace_back(word, count);
  if (kept.empty())
    throw ConfigError("vocabulary is empty after min_count=" +
                      std::to_string(min_count) + " cutoff");

  // Descending frequency, ties lexicographic.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary vocab;
  vocab.min_count = min_count;
  vocab.words.reserve(kept.size());
  vocab.counts.reserve(kept.size());
  for (const auto& [word, count] : kept) {
    vocab.index[word] = static_cast<int>(vocab.words.size());
    vocab.words.push_back(word);
    vocab.counts.push_back(count);
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Training

namespace {

constexpr int kNegTableSize = 1 << 21;

std::vector<int> build_negative_table(const Vocabulary& vocab) {
  std::vector<int> table(kNegTableSize);
  double total = 0.0;
  for (int64_t c : vocab.counts) total += std::pow(static_cast<double>(c), 0.75);
  int i = 0;
  double cum = std::pow(static_cast<double>(vocab.counts[0]), 0.75) / total;
  for (int t = 0; t < kNegTableSize; ++t) {
    table[t] = i;
    if (static_cast<double>(t) / kNegTableSize > cum && i < vocab.size() - 1) {
      ++i;
      cum += std::pow(static_cast<double>(vocab.counts[i]), 0.75) / total;
    }
  }
  return table;
}

struct TrainShared {
  const std::vector<std::vector<int>>* docs;
  const std::vector<int>* neg_table;
  const Vocabulary* vocab;
  EmbeddingConfig config;
  float* input;
  float* output;
  int64_t total_tokens;
  double expected_pairs;  // lr decay horizon
  std::atomic<int64_t> pair_counter{0};
};

void train_range(TrainShared& sh, size_t doc_begin, size_t doc_end, uint64_t seed) {
  const int dim = sh.config.dim;
  const int window = sh.config.window;
  const int negatives = sh.config.negative_samples;
  const float lr0 = sh.config.initial_learning_rate;
  const float lr_floor = 1e-4f * lr0;
  Rng rng(seed);
  std::vector<float> grad(dim);
  std::vector<int> sent;

  for (int epoch = 0; epoch < sh.config.epochs; ++epoch) {
    for (size_t d = doc_begin; d < doc_end; ++d) {
      const auto& doc = (*sh.docs)[d];
      sent.clear();
      if (sh.config.subsample > 0.0) {
        const double thresh = sh.config.subsample * static_cast<double>(sh.total_tokens);
        for (int w : doc) {
          double cn = static_cast<double>((*sh.vocab).counts[w]);
          double keep = (std::sqrt(cn / thresh) + 1.0) * thresh / cn;
          if (keep >= 1.0 || rng.uniform() < keep) sent.push_back(w);
        }
      } else {
        sent.assign(doc.begin(), doc.end());
      }
      const int n = static_cast<int>(sent.size());
      for (int pos = 0; pos < n; ++pos) {
        const int center = sent[pos];
        const int b = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(window)));
        for (int off = -b; off <= b; ++off) {
          if (off == 0) continue;
          const int cpos = pos + off;
          if (cpos < 0 || cpos >= n) continue;
          const int context = sent[cpos];

          const int64_t done = sh.pair_counter.fetch_add(1, std::memory_order_relaxed);
          float lr = lr0 * (1.0f - static_cast<float>(done / sh.expected_pairs));
          if (lr < lr_floor) lr = lr_floor;

          float* v = sh.input + static_cast<size_t>(center) * dim;
          std::fill(grad.begin(), grad.end(), 0.0f);
          for (int s = 0; s <= negatives; ++s) {
            int target;
            float label;
            if (s == 0) {
              target = context;
              label = 1.0f;
            } else {
              target = (*sh.neg_table)[rng.below(kNegTableSize)];
              if (target == context) continue;
              label = 0.0f;
            }
            float* u = sh.output + static_cast<size_t>(target) * dim;
            float f = 0.0f;
            for (int i = 0; i < dim; ++i) f += v[i] * u[i];
            const float sigma = 1.0f / (1.0f + std::exp(-f));
            const float g = (label - sigma) * lr;
            for (int i = 0; i < dim; ++i) grad[i] += g * u[i];
            for (int i = 0; i < dim; ++i) u[i] += g * v[i];
          }
          for (int i = 0; i < dim; ++i) v[i] += grad[i];
        }
      }
    }
  }
}

}  // namespace

EmbeddingModel train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const EmbeddingConfig& config) {
  if (config.dim <= 0) throw ConfigError("embedding dim must be >= 1");
  if (config.window <= 0) throw ConfigError("embedding window must be >= 1");
  if (config.negative_samples < 1)
    throw ConfigError("negative_samples must be >= 1");
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");

  EmbeddingModel model;
  model.config = config;
  model.dim = config.dim;
  model.vocab = build_vocabulary(corpus, config.min_count);
  const int V = model.vocab.size();
  const int dim = config.dim;

  std::vector<std::vector<int>> docs;
  docs.reserve(corpus.size());
  int64_t total_tokens = 0;
  for (const auto& sentence : corpus) {
    std::vector<int> ids;
    ids.reserve(sentence.size());
    for (const auto& tok : sentence) {
      int id = model.vocab.lookup(tok);
      if (id >= 0) ids.push_back(id);
    }
    total_tokens += static_cast<int64_t>(ids.size());
    if (!ids.empty()) docs.push_back(std::move(ids));
  }

  // Input rows uniform in [-0.5/dim, 0.5/dim]; output rows zero.
  model.input_vectors.resize(static_cast<size_t>(V) * dim);
  model.output_vectors.assign(static_cast<size_t>(V) * dim, 0.0f);
  Rng init_rng(config.seed);
  for (float& x : model.input_vectors)
    x = (init_rng.uniform_float() - 0.5f) / static_cast<float>(dim);

  if (config.epochs == 0 || total_tokens == 0) return model;

  const std::vector<int> neg_table = build_negative_table(model.vocab);
  TrainShared sh;
  sh.docs = &docs;
  sh.neg_table = &neg_table;
  sh.vocab = &model.vocab;
  sh.config = config;
  sh.input = model.input_vectors.data();
  sh.output = model.output_vectors.data();
  sh.total_tokens = total_tokens;
  // Expected pairs per position is window+1 (window radius is uniform on
  // 1..window, each side), so the decay horizon is epochs * tokens * (window+1).
  sh.expected_pairs = static_cast<double>(config.epochs) *
                      static_cast<double>(total_tokens) * (config.window + 1);

  const int threads = std::max(1, config.threads);
  if (threads == 1 || docs.size() < 2) {
    train_range(sh, 0, docs.size(), config.seed * 1000003ull + 1);
  } else {
    // Lock-free parallel mode: concurrent unsynchronized updates, results
    // intentionally nondeterministic.
    std::vector<std::thread> pool;
    const size_t per = (docs.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const size_t lo = std::min(docs.size(), t * per);
      const size_t hi = std::min(docs.size(), lo + per);
      if (lo >= hi) break;
      pool.emplace_back(
          [&sh, lo, hi, t, &config] { train_range(sh, lo, hi, config.seed * 1000003ull + 1 + t); });
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

CentroidResult centroid(const EmbeddingModel& model,
                        const std::vector<std::string>& tokens) {
  CentroidResult result;
  result.v.assign(model.dim, 0.0f);
  std::vector<double> acc(model.dim, 0.0);
  int found = 0;
  for (const auto& tok : tokens) {
    const float* vec = model.vector_for(tok);
    if (!vec) continue;
    ++found;
    for (int i = 0; i < model.dim; ++i) acc[i] += vec[i];
  }
  if (found == 0) {
    result.degenerate = true;
    return result;
  }
  for (int i = 0; i < model.dim; ++i)
    result.v[i] = static_cast<float>(acc[i] / found);
  return result;
}

// ---------------------------------------------------------------------------
// Reference objective/gradients for the gradient check

namespace {
inline double log_sigmoid(double x) {
  // log(1/(1+e^-x)) = -log1p(e^-x), stable on both sides
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}
inline double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

double sgns_objective(const std::vector<double>& center,
                      const std::vector<double>& context,
                      const std::vector<std::vector<double>>& negatives) {
  const size_t dim = center.size();
  double dot = 0.0;
  for (size_t i = 0; i < dim; ++i) dot += center[i] * context[i];
  double obj = log_sigmoid(dot);
  for (const auto& neg : negatives) {
    double nd = 0.0;
    for (size_t i = 0; i < dim; ++i) nd += center[i] * neg[i];
    obj += log_sigmoid(-nd);
  }
  return obj;
}

void sgns_gradients(const std::vector<double>& center,
                    const std::vector<double>& context,
                    const std::vector<std::vector<double>>& negatives,
                    std::vector<double>& grad_center,
                    std::vector<double>& grad_context,
                    std::vector<std::vector<double>>& grad_negatives) {
  const size_t dim = center.size();
  grad_center.assign(dim, 0.0);
  grad_context.assign(dim, 0.0);
  grad_negatives.assign(negatives.size(), std::vector<double>(dim, 0.0));

  double dot = 0.0;
  for (size_t i = 0; i < dim; ++i) dot += center[i] * context[i];
  const double pos_coef = 1.0 - sigmoid_d(dot);
  for (size_t i = 0; i < dim; ++i) {
    grad_center[i] += pos_coef * context[i];
    grad_context[i] = pos_coef * center[i];
  }
  for (size_t n = 0; n < negatives.size(); ++n) {
    double nd = 0.0;
    for (size_t i = 0; i < dim; ++i) nd += center[i] * negatives[n][i];
    const double neg_coef = sigmoid_d(nd);
    for (size_t i = 0; i < dim; ++i) {
      grad_center[i] -= neg_coef * negatives[n][i];
      grad_negatives[n][i] = -neg_coef * center[i];
    }
  }
}

// ---------------------------------------------------------------------------
// File formats

namespace {

Vocabulary vocab_from_words(std::vector<std::string> words) {
  Vocabulary vocab;
  vocab.min_count = 0;
  vocab.words = std::move(words);
  vocab.counts.assign(vocab.words.size(), 0);
  for (size_t i = 0; i < vocab.words.size(); ++i)
    vocab.index[vocab.words[i]] = static_cast<int>(i);
  return vocab;
}

void check_finite(const EmbeddingModel& model, const std::string& path) {
  for (float x : model.input_vectors)
    if (!std::isfinite(x))
      throw FormatError("non-finite vector value in " + path);
}

}  // namespace

void save_word2vec_text(const std::string& path, const EmbeddingModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings: " + path);
  out << model.vocab.size() << ' ' << model.dim << '\n';
  char buf[64];
  for (int w = 0; w < model.vocab.size(); ++w) {
    out << model.vocab.words[w];
    const float* v = model.row(w);
    for (int i = 0; i < model.dim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v[i]));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

EmbeddingModel load_word2vec_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings: " + path);
  long long v_count = 0;
  int dim = 0;
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty embedding file: " + path);
  {
    std::istringstream hs(header);
    if (!(hs >> v_count >> dim) || v_count <= 0 || dim <= 0)
      throw FormatError("bad embedding header in " + path);
  }
  std::vector<std::string> words;
  words.reserve(static_cast<size_t>(v_count));
  std::vector<float> vectors;
  vectors.reserve(static_cast<size_t>(v_count) * dim);
  std::string word;
  for (long long w = 0; w < v_count; ++w) {
    if (!(in >> word))
      throw FormatError("embedding file ends early: expected " +
                        std::to_string(v_count) + " rows in " + path);
    words.push_back(word);
    for (int i = 0; i < dim; ++i) {
      float x;
      if (!(in >> x))
        throw FormatError("truncated vector row for word '" + word + "' in " + path);
      vectors.push_back(x);
    }
  }
  std::string extra;
  if (in >> extra)
    throw FormatError("embedding file has more rows than header declares in " + path);

  EmbeddingModel model;
  model.dim = dim;
  model.vocab = vocab_from_words(std::move(words));
  model.input_vectors = std::move(vectors);
  check_finite(model, path);
  return model;
}

void save_word2vec_binary(const std::string& path, const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings: " + path);
  out << model.vocab.size() << ' ' << model.dim << '\n';
  for (int w = 0; w < model.vocab.size(); ++w) {
    out << model.vocab.words[w] << ' ';
    out.write(reinterpret_cast<const char*>(model.row(w)),
              static_cast<std::streamsize>(model.dim) * sizeof(float));
  }
  if (!out) throw IoError("write failed: " + path);
}

EmbeddingModel load_word2vec_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings: " + path);
  long long v_count = 0;
  int dim = 0;
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty embedding file: " + path);
  {
    std::istringstream hs(header);
    if (!(hs >> v_count >> dim) || v_count <= 0 || dim <= 0)
      throw FormatError("bad embedding header in " + path);
  }
  std::vector<std::string> words;
  words.reserve(static_cast<size_t>(v_count));
  std::vector<float> vectors(static_cast<size_t>(v_count) * dim);
  for (long long w = 0; w < v_count; ++w) {
    std::string word;
    int c;
    // The standard tool terminates each vector with '\n'; skip it and any
    // other leading whitespace before the next word.
    while ((c = in.get()) != EOF && (c == '\n' || c == '\r' || c == ' ')) {
    }
    while (c != EOF && c != ' ') {
      word.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (word.empty())
      throw FormatError("embedding file ends early: expected " +
                        std::to_string(v_count) + " entries in " + path);
    words.push_back(std::move(word));
    in.read(reinterpret_cast<char*>(vectors.data() + static_cast<size_t>(w) * dim),
            static_cast<std::streamsize>(dim) * sizeof(float));
    if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float)))
      throw FormatError("truncated vector data in " + path);
  }

  EmbeddingModel model;
  model.dim = dim;
  model.vocab = vocab_from_words(std::move(words));
  model.input_vectors = std::move(vectors);
  check_finite(model, path);
  return model;
}

}  // namespace cqa
