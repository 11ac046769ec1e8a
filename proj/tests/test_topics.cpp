#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"
#include "cqa/topics.hpp"
#include "helpers.hpp"

using namespace cqa;

namespace {

struct TwoTopicCorpus {
  std::vector<std::vector<std::string>> docs;
  std::vector<int> true_topic;  // generator topic per doc
  std::vector<std::string> topic0_words, topic1_words;
};

// Half of each document comes from a shared vocabulary: with fully disjoint
// topics the sampler settles before the first history entry, the shared words
// keep the chain (and the likelihood) moving past sweep 10.
TwoTopicCorpus make_two_topic(int n_docs, uint64_t seed) {
  TwoTopicCorpus out;
  std::vector<std::string> common;
  for (int w = 0; w < 10; ++w) {
    out.topic0_words.push_back("alpha" + std::to_string(w));
    out.topic1_words.push_back("omega" + std::to_string(w));
    common.push_back("common" + std::to_string(w));
  }
  Rng rng(seed);
  for (int d = 0; d < n_docs; ++d) {
    const int topic = d % 2;
    const auto& words = topic == 0 ? out.topic0_words : out.topic1_words;
    std::vector<std::string> doc;
    for (int i = 0; i < 12; ++i) {
      if (rng.uniform() < 0.5)
        doc.push_back(common[rng.below(common.size())]);
      else
        doc.push_back(words[rng.below(words.size())]);
    }
    out.docs.push_back(doc);
    out.true_topic.push_back(topic);
  }
  return out;
}

// Which model topic owns the topic-0 vocabulary.
int topic0_id(const LdaModel& m, const std::vector<std::string>& topic0_words) {
  int64_t mass0 = 0, mass1 = 0;
  for (const auto& w : topic0_words) {
    const int id = m.vocab.lookup(w);
    if (id < 0) continue;
    mass0 += m.word_count(0, id);
    mass1 += m.word_count(1, id);
  }
  return mass0 >= mass1 ? 0 : 1;
}

void check_count_consistency(const LdaModel& m,
                             const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, int64_t> freq;
  int64_t total = 0;
  for (const auto& doc : docs)
    for (const auto& w : doc)
      if (m.vocab.lookup(w) >= 0) {
        ++freq[w];
        ++total;
      }
  for (const auto& [word, count] : freq) {
    const int id = m.vocab.lookup(word);
    int64_t sum = 0;
    for (int k = 0; k < m.K; ++k) sum += m.word_count(k, id);
    CHECK(sum == count);
  }
  int64_t total_assigned = 0;
  for (int k = 0; k < m.K; ++k) {
    int64_t row = 0;
    for (int w = 0; w < m.vocab.size(); ++w) row += m.word_count(k, w);
    CHECK(row == m.topic_totals[k]);
    total_assigned += row;
  }
  CHECK(total_assigned == total);
}

}  // namespace

TEST_SUITE("topics") {

TEST_CASE("rejects degenerate configurations") {
  CHECK_THROWS_AS(train_lda({{"a"}}, 1, 0.5, 0.01, 10, 1), ConfigError);
  CHECK_THROWS_AS(train_lda({}, 2, 0.5, 0.01, 10, 1), ConfigError);
  CHECK_THROWS_AS(train_lda({{"a"}}, 2, 0.0, 0.01, 10, 1), ConfigError);
  CHECK_THROWS_AS(train_lda({{"a"}}, 2, 0.5, 0.0, 10, 1), ConfigError);
}

TEST_CASE("zero iterations is valid and counts stay consistent") {
  const auto corpus = make_two_topic(20, 2);
  const auto m = train_lda(corpus.docs, 2, 0.5, 0.01, 0, 3);
  CHECK(m.ll_history.empty());
  check_count_consistency(m, corpus.docs);
}

TEST_CASE("counts remain consistent after training") {
  const auto corpus = make_two_topic(30, 4);
  const auto m = train_lda(corpus.docs, 3, 0.5, 0.01, 50, 5);
  check_count_consistency(m, corpus.docs);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto corpus = make_two_topic(25, 6);
  const auto m1 = train_lda(corpus.docs, 2, 0.5, 0.01, 30, 7);
  const auto m2 = train_lda(corpus.docs, 2, 0.5, 0.01, 30, 7);
  CHECK(m1.topic_word_counts == m2.topic_word_counts);
  CHECK(m1.ll_history == m2.ll_history);
}

TEST_CASE("log-likelihood is recorded every 10 sweeps and improves") {
  const auto corpus = make_two_topic(100, 8);
  const auto m = train_lda(corpus.docs, 2, 0.5, 0.01, 200, 9);
  REQUIRE(m.ll_history.size() == 20);
  for (size_t i = 0; i < m.ll_history.size(); ++i)
    CHECK(m.ll_history[i].first == static_cast<int>(10 * (i + 1)));
  CHECK(m.ll_history.back().second > m.ll_history.front().second);
}

TEST_CASE("recovers the two generating topics") {
  const auto corpus = make_two_topic(100, 10);
  const auto m = train_lda(corpus.docs, 2, 0.5, 0.01, 200, 11);
  const int id0 = topic0_id(m, corpus.topic0_words);
  int agree = 0;
  for (size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto dist = infer_topics(m, corpus.docs[d], 30, 100 + d);
    const int dominant = dist.p[0] >= dist.p[1] ? 0 : 1;
    const int mapped = dominant == id0 ? 0 : 1;
    if (mapped == corpus.true_topic[d]) ++agree;
  }
  CHECK(agree >= 95);

  // a document of pure topic-0 vocabulary lands on the matching topic
  const auto pure = infer_topics(m, corpus.topic0_words, 30, 13);
  CHECK(!pure.degenerate);
  CHECK((pure.p[id0] > pure.p[1 - id0]));
}

TEST_CASE("inference returns a proper distribution") {
  const auto corpus = make_two_topic(20, 14);
  const auto m = train_lda(corpus.docs, 2, 0.5, 0.01, 30, 15);

  const auto dist = infer_topics(m, corpus.docs[0], 20, 16);
  double sum = 0.0;
  for (double p : dist.p) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // deterministic for a fixed seed
  const auto again = infer_topics(m, corpus.docs[0], 20, 16);
  CHECK(dist.p == again.p);

  // empty and all-OOV inputs give the uniform distribution, flagged
  for (const auto& tokens : {std::vector<std::string>{}, std::vector<std::string>{"zzz"}}) {
    const auto deg = infer_topics(m, tokens, 20, 17);
    CHECK(deg.degenerate);
    for (double p : deg.p) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("one-word documents still form distributions") {
  const auto m = train_lda({{"a"}, {"b"}, {"a"}, {"b"}}, 2, 0.5, 0.01, 10, 18);
  const auto dist = infer_topics(m, {"a"}, 10, 19);
  double sum = 0.0;
  for (double p : dist.p) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("topic similarity") {
  TopicDistribution p, q;
  p.p = {0.3, 0.7};
  CHECK(topic_similarity(p, p) == doctest::Approx(1.0));
  q.p = {0.7, 0.3};
  TopicDistribution h0, h1;
  h0.p = {1.0, 0.0};
  h1.p = {0.0, 1.0};
  CHECK(topic_similarity(h0, h1) == 0.0);
  TopicDistribution even;
  even.p = {0.5, 0.5};
  CHECK(topic_similarity(even, h0) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("model file round-trip with vocabulary sidecar") {
  TempDir dir;
  const auto corpus = make_two_topic(20, 20);
  const auto m = train_lda(corpus.docs, 2, 0.5, 0.01, 20, 21);
  save_lda(dir.file("lda.txt"), m);
  CHECK(std::filesystem::exists(dir.file("lda.txt") + ".vocab"));
  const auto loaded = load_lda(dir.file("lda.txt"));
  CHECK(loaded.K == m.K);
  CHECK(loaded.alpha == doctest::Approx(m.alpha));
  CHECK(loaded.beta == doctest::Approx(m.beta));
  CHECK(loaded.vocab.words == m.vocab.words);
  CHECK(loaded.topic_word_counts == m.topic_word_counts);
  CHECK(loaded.topic_totals == m.topic_totals);

  // inference agrees between the trained and the reloaded model
  const auto a = infer_topics(m, corpus.docs[3], 20, 22);
  const auto b = infer_topics(loaded, corpus.docs[3], 20, 22);
  CHECK(a.p == b.p);

  write_file(dir.file("bad.txt"), "nonsense header\n");
  CHECK_THROWS_AS(load_lda(dir.file("bad.txt")), FormatError);
  CHECK_THROWS_AS(load_lda(dir.file("missing.txt")), IoError);
}

}  // TEST_SUITE
