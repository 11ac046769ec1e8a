#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cqa/embeddings.hpp"
#include "cqa/errors.hpp"
#include "cqa/rng.hpp"
#include "helpers.hpp"

using namespace cqa;

namespace {

// Two families of words that only co-occur within their own family.
std::vector<std::vector<std::string>> two_cluster_corpus(uint64_t seed, int sentences) {
  const std::vector<std::string> a = {"apple", "pear", "plum", "grape", "melon"};
  const std::vector<std::string> b = {"bolt", "nut", "screw", "washer", "rivet"};
  Rng rng(seed);
  std::vector<std::vector<std::string>> corpus;
  for (int s = 0; s < sentences; ++s) {
    const auto& fam = (s % 2 == 0) ? a : b;
    std::vector<std::string> sent;
    for (int i = 0; i < 8; ++i) sent.push_back(fam[rng.below(fam.size())]);
    corpus.push_back(sent);
  }
  return corpus;
}

double mean_cos(const EmbeddingModel& m, const std::vector<std::string>& u,
                const std::vector<std::string>& v, bool same) {
  double total = 0.0;
  int n = 0;
  for (size_t i = 0; i < u.size(); ++i)
    for (size_t j = same ? i + 1 : 0; j < v.size(); ++j) {
      std::vector<float> x(m.vector_for(u[i]), m.vector_for(u[i]) + m.dim);
      std::vector<float> y(m.vector_for(v[j]), m.vector_for(v[j]) + m.dim);
      total += cosine_similarity(x, y);
      ++n;
    }
  return total / n;
}

}  // namespace

TEST_SUITE("embeddings") {

TEST_CASE("vocabulary respects min_count and frequency order") {
  const auto vocab = build_vocabulary({{"a", "a", "b"}}, 2);
  CHECK(vocab.size() == 1);
  CHECK(vocab.lookup("a") == 0);
  CHECK(vocab.lookup("b") == -1);

  const auto full = build_vocabulary({{"a", "a", "b"}}, 1);
  CHECK(full.size() == 2);
  CHECK(full.lookup("a") == 0);  // most frequent first
  CHECK(full.lookup("b") == 1);
  CHECK(full.counts[0] == 2);

  // equal counts fall back to lexicographic order
  const auto ties = build_vocabulary({{"zeta", "echo"}}, 1);
  CHECK(ties.words[0] == "echo");
  CHECK(ties.words[1] == "zeta");

  CHECK_THROWS_AS(build_vocabulary({{"x"}}, 5), ConfigError);
}

TEST_CASE("sgns gradients match finite differences") {
  Rng rng(3);
  const int dim = 5;
  auto rand_vec = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
    return v;
  };
  std::vector<double> center = rand_vec(), context = rand_vec();
  std::vector<std::vector<double>> negatives = {rand_vec(), rand_vec(), rand_vec()};

  std::vector<double> gc, gx;
  std::vector<std::vector<double>> gn;
  sgns_gradients(center, context, negatives, gc, gx, gn);

  const double h = 1e-6;
  auto fd = [&](std::vector<double>& slot, int i) {
    const double keep = slot[i];
    slot[i] = keep + h;
    const double up = sgns_objective(center, context, negatives);
    slot[i] = keep - h;
    const double down = sgns_objective(center, context, negatives);
    slot[i] = keep;
    return (up - down) / (2.0 * h);
  };
  for (int i = 0; i < dim; ++i) {
    CHECK(std::abs(gc[i] - fd(center, i)) < 1e-4);
    CHECK(std::abs(gx[i] - fd(context, i)) < 1e-4);
    for (size_t t = 0; t < negatives.size(); ++t)
      CHECK(std::abs(gn[t][i] - fd(negatives[t], i)) < 1e-4);
  }
}

TEST_CASE("epochs 0 leaves the initialization untouched") {
  EmbeddingConfig cfg;
  cfg.dim = 8;
  cfg.min_count = 1;
  cfg.epochs = 0;
  cfg.seed = 11;
  const auto m = train_skipgram({{"a", "b"}, {"b", "a"}}, cfg);
  REQUIRE(m.vocab.size() == 2);
  bool any_nonzero = false;
  for (float x : m.input_vectors) {
    CHECK(std::abs(x) <= 0.5f / 8 + 1e-9f);
    if (x != 0.0f) any_nonzero = true;
  }
  CHECK(any_nonzero);
  for (float x : m.output_vectors) CHECK(x == 0.0f);
}

TEST_CASE("a single-token corpus yields no training pairs") {
  EmbeddingConfig cfg;
  cfg.dim = 6;
  cfg.min_count = 1;
  cfg.seed = 4;
  cfg.epochs = 0;
  const auto untouched = train_skipgram({{"hello"}}, cfg);
  cfg.epochs = 5;
  const auto trained = train_skipgram({{"hello"}}, cfg);
  CHECK(untouched.input_vectors == trained.input_vectors);
}

TEST_CASE("single-threaded training is bit-reproducible") {
  const auto corpus = two_cluster_corpus(1, 40);
  EmbeddingConfig cfg;
  cfg.dim = 12;
  cfg.window = 3;
  cfg.min_count = 1;
  cfg.epochs = 2;
  cfg.seed = 9;
  const auto m1 = train_skipgram(corpus, cfg);
  const auto m2 = train_skipgram(corpus, cfg);
  CHECK(m1.input_vectors == m2.input_vectors);
  CHECK(m1.output_vectors == m2.output_vectors);

  cfg.seed = 10;
  const auto m3 = train_skipgram(corpus, cfg);
  CHECK(m1.input_vectors != m3.input_vectors);
}

TEST_CASE("co-occurring words end up closer than non-co-occurring ones") {
  const auto corpus = two_cluster_corpus(2, 200);
  EmbeddingConfig cfg;
  cfg.dim = 16;
  cfg.window = 3;
  cfg.min_count = 1;
  cfg.epochs = 8;
  cfg.seed = 5;
  const auto m = train_skipgram(corpus, cfg);
  const std::vector<std::string> a = {"apple", "pear", "plum", "grape", "melon"};
  const std::vector<std::string> b = {"bolt", "nut", "screw", "washer", "rivet"};
  const double within = 0.5 * (mean_cos(m, a, a, true) + mean_cos(m, b, b, true));
  const double cross = mean_cos(m, a, b, false);
  CHECK(within > cross);
}

TEST_CASE("centroid averages in-vocabulary vectors only") {
  const auto m = toy_embedding({"a", "b"}, {{1.0f, 0.0f}, {0.0f, 1.0f}});
  const auto single = centroid(m, {"a"});
  CHECK(!single.degenerate);
  CHECK(single.v == std::vector<float>{1.0f, 0.0f});

  const auto mixed = centroid(m, {"a", "b"});
  CHECK(mixed.v == std::vector<float>{0.5f, 0.5f});

  const auto skip_oov = centroid(m, {"a", "zzz"});
  CHECK(skip_oov.v == std::vector<float>{1.0f, 0.0f});
  CHECK(!skip_oov.degenerate);

  const auto oov = centroid(m, {"zzz"});
  CHECK(oov.degenerate);
  CHECK(oov.v == std::vector<float>(2, 0.0f));

  // k copies of one word average to exactly that word's vector
  const auto copies = centroid(m, {"b", "b", "b", "b"});
  CHECK(copies.v == std::vector<float>{0.0f, 1.0f});
}

TEST_CASE("cosine similarity and distance") {
  const std::vector<double> p{3.0, 4.0};
  CHECK(cosine_distance(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, diag{1.0, 1.0};
  CHECK(cosine_distance(e1, e2) == doctest::Approx(1.0));
  CHECK(cosine_distance(e1, diag) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  CHECK(cosine_similarity(e1, diag) == doctest::Approx(1.0 / std::sqrt(2.0)));

  const std::vector<double> zero{0.0, 0.0};
  CHECK(cosine_similarity(zero, e1) == 0.0);
  CHECK(cosine_distance(zero, e1) == 1.0);

  const std::vector<double> three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(cosine_similarity(p, three), std::invalid_argument);
  CHECK_THROWS_AS(cosine_distance(p, three), std::invalid_argument);

  // invariant under positive rescaling of either argument
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> u(6), v(6);
    for (double& x : u) x = rng.uniform() * 2.0 - 1.0;
    for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
    std::vector<double> u2 = u, v2 = v;
    for (double& x : u2) x *= 2.5;
    for (double& x : v2) x *= 0.3;
    CHECK(cosine_distance(u, v) == doctest::Approx(cosine_distance(u2, v2)).epsilon(1e-12));
  }
}

TEST_CASE("text format round-trips float32 exactly") {
  TempDir dir;
  const auto corpus = two_cluster_corpus(3, 30);
  EmbeddingConfig cfg;
  cfg.dim = 3;
  cfg.min_count = 1;
  cfg.epochs = 1;
  cfg.seed = 2;
  const auto m = train_skipgram(corpus, cfg);
  save_word2vec_text(dir.file("emb.txt"), m);
  const auto loaded = load_word2vec_text(dir.file("emb.txt"));
  CHECK(loaded.dim == 3);
  CHECK(loaded.vocab.words == m.vocab.words);
  CHECK(loaded.input_vectors == m.input_vectors);  // %.9g preserves float32
}

TEST_CASE("binary format round-trips and tolerates trailing newlines") {
  TempDir dir;
  const auto m = toy_embedding({"a", "b"}, {{0.25f, -1.5f}, {3.0f, 0.125f}});
  save_word2vec_binary(dir.file("emb.bin"), m);
  const auto loaded = load_word2vec_binary(dir.file("emb.bin"));
  CHECK(loaded.vocab.words == m.vocab.words);
  CHECK(loaded.input_vectors == m.input_vectors);

  // the reference tool puts a newline after each vector; the reader skips it
  std::string blob = "2 2\n";
  auto put = [&](const std::string& word, float x, float y) {
    blob += word;
    blob += ' ';
    const float vals[2] = {x, y};
    blob.append(reinterpret_cast<const char*>(vals), sizeof vals);
    blob += '\n';
  };
  put("a", 0.25f, -1.5f);
  put("b", 3.0f, 0.125f);
  write_file(dir.file("ref.bin"), blob);
  const auto ref = load_word2vec_binary(dir.file("ref.bin"));
  CHECK(ref.vocab.words == m.vocab.words);
  CHECK(ref.input_vectors == m.input_vectors);
}

TEST_CASE("format errors") {
  TempDir dir;
  write_file(dir.file("short.txt"),
             "5 10\nw1 1 2 3 4 5 6 7 8 9 10\nw2 1 2 3 4 5 6 7 8 9 10\n"
             "w3 1 2 3 4 5 6 7 8 9 10\nw4 1 2 3 4 5 6 7 8 9 10\n");
  CHECK_THROWS_AS(load_word2vec_text(dir.file("short.txt")), FormatError);

  write_file(dir.file("badrow.txt"), "1 3\nw1 1 2\n");
  CHECK_THROWS_AS(load_word2vec_text(dir.file("badrow.txt")), FormatError);

  write_file(dir.file("header.txt"), "banana\n");
  CHECK_THROWS_AS(load_word2vec_text(dir.file("header.txt")), FormatError);

  write_file(dir.file("trunc.bin"), std::string("2 4\nw1 \x00\x00", 9));
  CHECK_THROWS_AS(load_word2vec_binary(dir.file("trunc.bin")), FormatError);

  CHECK_THROWS_AS(load_word2vec_text(dir.file("missing.txt")), IoError);
}

}  // TEST_SUITE
