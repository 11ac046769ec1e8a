#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cqa {

struct Vocabulary {
  std::vector<std::string> words;   // index -> word, frequency desc, ties lexicographic
  std::vector<int64_t> counts;      // index -> corpus frequency
  std::unordered_map<std::string, int> index;
  int min_count = 1;

  int size() const { return static_cast<int>(words.size()); }
  int lookup(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
  }
};

// Keeps exactly the words with frequency >= min_count; throws ConfigError when
// nothing survives the cutoff.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            int min_count);

struct EmbeddingConfig {
  int dim = 100;
  int window = 5;
  int min_count = 5;
  int negative_samples = 5;
  int epochs = 5;
  float initial_learning_rate = 0.025f;
  double subsample = 0.0;  // frequent-word subsampling threshold; 0 disables
  int threads = 1;         // >1 switches to the lock-free nondeterministic mode
  uint64_t seed = 1;
};

struct EmbeddingModel {
  Vocabulary vocab;
  int dim = 0;
  std::vector<float> input_vectors;   // V x dim row-major; the word vectors
  std::vector<float> output_vectors;  // V x dim; training side, empty after load
  EmbeddingConfig config;

  const float* row(int i) const {
    return input_vectors.data() + static_cast<size_t>(i) * dim;
  }
  // nullptr when the word is out of vocabulary
  const float* vector_for(const std::string& word) const {
    int i = vocab.lookup(word);
    return i < 0 ? nullptr : row(i);
  }
};

// Skip-gram with negative sampling. Per-position window sampled uniformly from
// 1..window, negatives from the unigram^(3/4) distribution, learning rate
// decaying linearly to 1e-4 * initial over the expected total pair count.
// Single-threaded runs are bit-reproducible for a fixed seed.
EmbeddingModel train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const EmbeddingConfig& config);

struct CentroidResult {
  std::vector<float> v;
  bool degenerate = false;  // set when no token was in vocabulary
};

// Arithmetic mean of the input vectors of in-vocabulary tokens; OOV tokens are
// skipped, never randomized.
CentroidResult centroid(const EmbeddingModel& model,
                        const std::vector<std::string>& tokens);

template <class VecA, class VecB>
double cosine_similarity(const VecA& u, const VecB& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    nu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
    nv += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// 1 - u.v / (|u||v|); 1 when either norm is zero.
template <class VecA, class VecB>
double cosine_distance(const VecA& u, const VecB& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine_distance: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    nu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
    nv += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  }
  if (nu == 0.0 || nv == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Reference objective and gradients of one negative-sampling step:
//   L = log s(v.u) + sum_i log s(-v.u'_i)
// The trainer applies the same update in fused form; these are exposed so the
// analytic gradient can be checked against finite differences.
double sgns_objective(const std::vector<double>& center,
                      const std::vector<double>& context,
                      const std::vector<std::vector<double>>& negatives);
void sgns_gradients(const std::vector<double>& center,
                    const std::vector<double>& context,
                    const std::vector<std::vector<double>>& negatives,
                    std::vector<double>& grad_center,
                    std::vector<double>& grad_context,
                    std::vector<std::vector<double>>& grad_negatives);

// word2vec-compatible file formats. Text: "V dim" header then one
// "word f1 .. fdim" line per word. Binary: same header line, then per entry
// the word bytes, one 0x20, and dim little-endian float32 values; the loader
// also accepts the trailing newline the standard tool emits.
void save_word2vec_text(const std::string& path, const EmbeddingModel& model);
EmbeddingModel load_word2vec_text(const std::string& path);
void save_word2vec_binary(const std::string& path, const EmbeddingModel& model);
EmbeddingModel load_word2vec_binary(const std::string& path);

}  // namespace cqa
