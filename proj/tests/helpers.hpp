#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cqa/embeddings.hpp"

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("cqa_test_" + std::to_string(counter.fetch_add(1)) + "_" +
            std::to_string(static_cast<unsigned>(std::random_device{}())));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Embedding model with hand-picked vectors; count 1 per word.
inline cqa::EmbeddingModel toy_embedding(const std::vector<std::string>& words,
                                         const std::vector<std::vector<float>>& vecs) {
  cqa::EmbeddingModel m;
  m.dim = vecs.empty() ? 0 : static_cast<int>(vecs[0].size());
  for (size_t i = 0; i < words.size(); ++i) {
    m.vocab.words.push_back(words[i]);
    m.vocab.counts.push_back(1);
    m.vocab.index[words[i]] = static_cast<int>(i);
    for (float x : vecs[i]) m.input_vectors.push_back(x);
  }
  return m;
}
