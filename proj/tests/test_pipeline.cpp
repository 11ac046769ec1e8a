#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "cqa/errors.hpp"
#include "cqa/pipeline.hpp"
#include "cqa/rng.hpp"
#include "helpers.hpp"

using namespace cqa;

namespace {

std::vector<std::vector<std::string>> tokenize_sentences(
    const std::vector<std::string>& sentences) {
  TokenizerConfig cfg;  // keep everything; the synthetic text has no stopwords
  std::vector<std::vector<std::string>> corpus;
  for (const std::string& s : sentences) corpus.push_back(preprocess(s, cfg));
  return corpus;
}

EmbeddingModel small_embeddings(const SynthConfig& synth, uint64_t seed) {
  EmbeddingConfig cfg;
  cfg.dim = 16;
  cfg.window = 4;
  cfg.min_count = 2;
  cfg.epochs = 3;
  cfg.seed = seed;
  return train_skipgram(tokenize_sentences(synth_unannotated(synth)), cfg);
}

TrainedModels small_models(const std::vector<Thread>& train, const SynthConfig& synth,
                           uint64_t seed) {
  TrainedModels models;
  models.embeddings = small_embeddings(synth, seed);
  models.clusters = kmeans(models.embeddings, 8, 20, seed + 1);
  models.lda = train_lda(lda_documents(train), 4, 0.5, 0.01, 30, seed + 2);
  return models;
}

PipelineConfig fast_config() {
  PipelineConfig config;
  config.seed = 42;
  config.fixed_c = 0.55;  // skip cross-validation in the small tests
  config.lda_infer_sweeps = 10;
  return config;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config defaults and derived values") {
  PipelineConfig config;
  CHECK(config.enabled_groups().size() == 9);
  CHECK(config.effective_tagset() == universal_tagset());
  config.lda_topics = 100;
  CHECK(config.effective_lda_alpha() == doctest::Approx(0.5));
  config.lda_alpha = 0.25;
  CHECK(config.effective_lda_alpha() == doctest::Approx(0.25));
  config.groups = {FeatureGroup::Metadata};
  CHECK(config.enabled_groups().size() == 1);
}

TEST_CASE("config file round-trip") {
  TempDir dir;
  PipelineConfig config;
  config.seed = 9;
  config.subtask = "C";
  config.paths.dataset = "data.jsonl";
  config.paths.embeddings = "emb.txt";
  config.embedding.dim = 32;
  config.embedding.negative_samples = 7;
  config.embedding.subsample = 1e-4;
  config.kmeans_k = 50;
  config.lda_topics = 25;
  config.lda_alpha = 0.3;
  config.groups = {FeatureGroup::Metadata, FeatureGroup::RawVectors};
  config.tagset = {"NOUN", "VERB"};
  config.train.cost_grid = {0.1, 0.55};
  config.train.folds = 3;
  config.fixed_c = 0.55;
  config.test_fraction = 0.25;
  config.include_empty_queries = true;
  save_pipeline_config(dir.file("config.json"), config);
  const auto loaded = load_pipeline_config(dir.file("config.json"));
  CHECK(loaded.seed == 9);
  CHECK(loaded.subtask == "C");
  CHECK(loaded.paths.dataset == "data.jsonl");
  CHECK(loaded.paths.embeddings == "emb.txt");
  CHECK(loaded.embedding.dim == 32);
  CHECK(loaded.embedding.negative_samples == 7);
  CHECK(loaded.embedding.subsample == doctest::Approx(1e-4));
  CHECK(loaded.kmeans_k == 50);
  CHECK(loaded.lda_topics == 25);
  CHECK(loaded.lda_alpha == doctest::Approx(0.3));
  CHECK(loaded.groups == config.groups);
  CHECK(loaded.tagset == config.tagset);
  CHECK(loaded.train.cost_grid == config.train.cost_grid);
  CHECK(loaded.train.folds == 3);
  CHECK(loaded.fixed_c == doctest::Approx(0.55));
  CHECK(loaded.test_fraction == doctest::Approx(0.25));
  CHECK(loaded.include_empty_queries);
}

TEST_CASE("config validation") {
  TempDir dir;
  write_file(dir.file("unknown.json"), R"({"seed": 1, "bogus_key": 2})");
  CHECK_THROWS_AS(load_pipeline_config(dir.file("unknown.json")), ConfigError);
  write_file(dir.file("subtask.json"), R"({"subtask": "B"})");
  CHECK_THROWS_AS(load_pipeline_config(dir.file("subtask.json")), ConfigError);
  write_file(dir.file("fraction.json"), R"({"test_fraction": 1.5})");
  CHECK_THROWS_AS(load_pipeline_config(dir.file("fraction.json")), ConfigError);
  write_file(dir.file("group.json"), R"({"groups": ["NoSuchGroup"]})");
  CHECK_THROWS_AS(load_pipeline_config(dir.file("group.json")), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config(dir.file("missing.json")), IoError);
}

TEST_CASE("split_threads is a deterministic partition") {
  SynthConfig synth;
  synth.n_threads = 20;
  const auto threads = synth_threads(synth);
  std::vector<Thread> train, test;
  split_threads(threads, 0.3, 99, train, test);
  CHECK(test.size() == 6);
  CHECK(train.size() == 14);

  std::unordered_set<std::string> ids;
  for (const auto& t : threads) ids.insert(t.question.id);
  std::unordered_set<std::string> seen;
  for (const auto& t : train) CHECK(seen.insert(t.question.id).second);
  for (const auto& t : test) CHECK(seen.insert(t.question.id).second);
  CHECK(seen == ids);

  std::vector<Thread> train2, test2;
  split_threads(threads, 0.3, 99, train2, test2);
  for (size_t i = 0; i < test.size(); ++i)
    CHECK(test[i].question.id == test2[i].question.id);

  // tiny fractions still put at least one thread aside
  split_threads(threads, 0.01, 99, train, test);
  CHECK(test.size() == 1);
  CHECK_THROWS_AS(split_threads(threads, 1.0, 99, train, test), ConfigError);
}

TEST_CASE("synthetic subtask A corpus has the promised shape") {
  SynthConfig synth;  // 50 threads, seed 7
  const auto threads = synth_threads(synth);
  REQUIRE(threads.size() == 50);
  std::unordered_set<std::string> qids;
  const std::set<std::string> known_categories = {"travel", "housing", "jobs", "food"};
  for (const Thread& t : threads) {
    CHECK(qids.insert(t.question.id).second);
    CHECK(t.comments.size() >= 5);
    CHECK(known_categories.count(t.question.category) == 1);
    bool any_good = false, any_other = false;
    std::unordered_set<std::string> cids;
    for (const Comment& c : t.comments) {
      CHECK(cids.insert(c.id).second);
      REQUIRE(c.gold_label.has_value());
      (is_good(*c.gold_label) ? any_good : any_other) = true;
    }
    CHECK(any_good);
    CHECK(any_other);
  }

  // a fixed seed reproduces the dataset byte for byte
  TempDir dir;
  save_subtask_a(dir.file("one.jsonl"), threads);
  save_subtask_a(dir.file("two.jsonl"), synth_threads(synth));
  CHECK(read_file(dir.file("one.jsonl")) == read_file(dir.file("two.jsonl")));
}

TEST_CASE("synthetic subtask C corpus") {
  SynthConfig synth;
  synth.n_threads = 12;
  synth.related_per_question = 5;
  const auto sets = synth_related(synth);
  REQUIRE(sets.size() == 12);
  for (const auto& set : sets) {
    CHECK(set.related.size() == 5);
    std::set<int> ranks;
    for (const auto& entry : set.related) {
      ranks.insert(entry.search_rank);
      CHECK(entry.labels.size() == entry.thread.comments.size());
      for (const Comment& c : entry.thread.comments)
        CHECK(entry.labels.count(c.id) == 1);
    }
    CHECK(ranks == std::set<int>{1, 2, 3, 4, 5});
  }
}

TEST_CASE("synthetic unannotated corpus") {
  SynthConfig synth;
  synth.unannotated_sentences = 120;
  const auto sentences = synth_unannotated(synth);
  REQUIRE(sentences.size() == 120);
  for (const auto& s : sentences) CHECK(!s.empty());
  CHECK(synth_unannotated(synth) == sentences);
}

TEST_CASE("category collection and lda documents") {
  SynthConfig synth;
  synth.n_threads = 25;
  const auto threads = synth_threads(synth);
  const auto cats = collect_categories(threads);
  CHECK(std::is_sorted(cats.begin(), cats.end()));
  CHECK(std::adjacent_find(cats.begin(), cats.end()) == cats.end());
  for (const auto& c : cats)
    CHECK(std::set<std::string>{"travel", "housing", "jobs", "food"}.count(c) == 1);

  auto copy = threads;
  TokenizerConfig tok = default_tokenizer_config();
  preprocess_dataset(copy, tok);
  const auto docs = lda_documents(copy);
  size_t expected = copy.size();
  for (const auto& t : copy) expected += t.comments.size();
  CHECK(docs.size() == expected);
  // first document of each thread is subject + body
  CHECK(docs[0].size() ==
        copy[0].question.subject_tokens.size() + copy[0].question.body_tokens.size());
}

TEST_CASE("matrix labels") {
  FeatureMatrix m;
  m.thread_ids = {"q", "q"};
  m.comment_ids = {"a", "b"};
  m.labels = {Label::Good, Label::PotentiallyUseful};
  m.rows = {{0.0}, {1.0}};
  CHECK(matrix_labels(m) == std::vector<int>{1, -1});
  m.labels[1] = std::nullopt;
  CHECK_THROWS_AS(matrix_labels(m), IntegrityError);
}

TEST_CASE("fit_classifier honours fixed_c and runs CV otherwise") {
  const auto schema = build_schema({FeatureGroup::Metadata}, 0, universal_tagset(), {});
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    std::vector<double> row(schema.size());
    for (double& x : row) x = sign * (1.0 + rng.uniform());
    rows.push_back(row);
    y.push_back(i % 2 == 0 ? 1 : -1);
  }

  PipelineConfig config;
  config.fixed_c = 0.55;
  const auto fixed = fit_classifier(rows, y, schema, config);
  CHECK(fixed.model.cost_c == doctest::Approx(0.55));
  CHECK(fixed.cv.table.empty());
  CHECK(fixed.model.schema_hash == schema.hash());
  CHECK(fixed.model.scaler.min.size() == schema.size());

  config.fixed_c = 0.0;
  config.train.cost_grid = {0.1, 1.0};
  const auto searched = fit_classifier(rows, y, schema, config);
  CHECK(searched.cv.table.size() == 2);
  CHECK(searched.model.cost_c == searched.cv.best_c);
}

TEST_CASE("planted centroid signal is recoverable from qc similarity") {
  SynthConfig synth;
  synth.n_threads = 40;
  synth.unannotated_sentences = 600;
  const auto emb = small_embeddings(synth, 1);

  auto threads = synth_threads(synth);
  TokenizerConfig tok = default_tokenizer_config();
  preprocess_dataset(threads, tok);

  std::vector<double> sims;
  std::vector<bool> gold;
  for (const Thread& t : threads)
    for (const Comment& c : t.comments) {
      sims.push_back(qc_similarity(t.question, c, emb)[0]);
      gold.push_back(is_good(*c.gold_label));
    }

  double best = 0.0;
  for (double threshold = -1.0; threshold <= 1.0; threshold += 0.02) {
    int correct = 0;
    for (size_t i = 0; i < sims.size(); ++i)
      if ((sims[i] >= threshold) == gold[i]) ++correct;
    best = std::max(best, static_cast<double>(correct) / sims.size());
  }
  CHECK(best > 0.9);
}

TEST_CASE("full pipeline is deterministic and beats chance") {
  SynthConfig synth;
  synth.n_threads = 40;
  synth.unannotated_sentences = 600;
  auto threads = synth_threads(synth);
  TokenizerConfig tok = default_tokenizer_config();
  preprocess_dataset(threads, tok);

  PipelineConfig config = fast_config();
  std::vector<Thread> train, test;
  split_threads(threads, config.test_fraction, config.seed + 5, train, test);
  const TrainedModels models = small_models(train, synth, config.seed);

  const PipelineResult r1 = run_pipeline(train, test, models, config);
  const PipelineResult r2 = run_pipeline(train, test, models, config);
  CHECK(r1.report.map == r2.report.map);
  CHECK(r1.model.weights == r2.model.weights);
  CHECK(r1.report.map > 0.6);
  CHECK(r1.train_pairs > 0);
  CHECK(r1.test_pairs > 0);
  CHECK(r1.ranked.size() == test.size());
}

TEST_CASE("removing the planted metadata group hurts the ranking") {
  SynthConfig synth;
  synth.n_threads = 40;
  synth.unannotated_sentences = 600;
  synth.signal = "metadata";
  auto threads = synth_threads(synth);
  TokenizerConfig tok = default_tokenizer_config();
  preprocess_dataset(threads, tok);

  PipelineConfig config = fast_config();
  std::vector<Thread> train, test;
  split_threads(threads, config.test_fraction, config.seed + 5, train, test);
  const TrainedModels models = small_models(train, synth, config.seed);

  const auto rows = ablation_run(train, test, models, config,
                                 {{FeatureGroup::Metadata}});
  REQUIRE(rows.size() == 2);
  const auto& all_row = rows[0].removed.empty() ? rows[0] : rows[1];
  const auto& removed_row = rows[0].removed.empty() ? rows[1] : rows[0];
  CHECK(removed_row.removed == std::set<FeatureGroup>{FeatureGroup::Metadata});
  CHECK(all_row.map > removed_row.map);

  // every row ranks the same comments, only the columns differ
  CHECK(all_row.accuracy >= 0.0);
}

TEST_CASE("subtask C pipeline smoke") {
  SynthConfig synth;
  synth.n_threads = 30;
  synth.unannotated_sentences = 600;
  auto train = synth_threads(synth);

  SynthConfig csynth = synth;
  csynth.n_threads = 12;
  csynth.seed = synth.seed + 20;
  auto sets = synth_related(csynth);

  TokenizerConfig tok = default_tokenizer_config();
  preprocess_dataset(train, tok);
  preprocess_dataset(sets, tok);

  PipelineConfig config = fast_config();
  config.subtask = "C";
  const TrainedModels models = small_models(train, synth, config.seed);

  const PipelineResult result = run_pipeline_c(train, sets, models, config);
  CHECK(result.ranked.size() == sets.size());
  CHECK(result.report.map >= 0.0);
  CHECK(result.report.map <= 1.0);
  size_t pairs = 0;
  for (const auto& set : sets)
    for (const auto& entry : set.related) pairs += entry.thread.comments.size();
  CHECK(result.test_pairs == pairs);

  // search rank influences the default product combination
  const PipelineResult flat = run_pipeline_c(train, sets, models, config,
                                             weighted_sum_combiner(0.0));
  CHECK(flat.report.map != result.report.map);
}

}  // TEST_SUITE
