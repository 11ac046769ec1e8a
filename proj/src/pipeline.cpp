#include "cqa/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cqa/errors.hpp"
#include "cqa/rng.hpp"
#include "cqa/topics.hpp"

namespace cqa {

std::set<FeatureGroup> PipelineConfig::enabled_groups() const {
  if (groups.empty())
    return std::set<FeatureGroup>(all_feature_groups().begin(),
                                  all_feature_groups().end());
  return groups;
}

std::vector<std::string> PipelineConfig::effective_tagset() const {
  return tagset.empty() ? universal_tagset() : tagset;
}

double PipelineConfig::effective_lda_alpha() const {
  return lda_alpha > 0.0 ? lda_alpha : 50.0 / lda_topics;
}

// ---------------------------------------------------------------------------
// Config file

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::vector<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
  }
}

template <class T>
void maybe(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("bad config json in " + path + ": " + e.what());
  }

  PipelineConfig config;
  try {
    reject_unknown(j,
                   {"seed", "subtask", "paths", "embedding", "kmeans_k",
                    "kmeans_max_iters", "lda_topics", "lda_alpha", "lda_beta",
                    "lda_train_sweeps", "lda_infer_sweeps", "groups", "tagset",
                    "train", "fixed_c", "test_fraction", "include_empty_queries"},
                   path);
    maybe(j, "seed", config.seed);
    maybe(j, "subtask", config.subtask);
    if (config.subtask != "A" && config.subtask != "C")
      throw ConfigError("subtask must be \"A\" or \"C\"");
    if (j.contains("paths")) {
      const json& p = j["paths"];
      reject_unknown(p,
                     {"dataset", "train_dataset", "test_dataset",
                      "unannotated_corpus", "stopwords", "embeddings", "clusters",
                      "lda", "features", "schema", "model", "predictions",
                      "report"},
                     path + " paths");
      maybe(p, "dataset", config.paths.dataset);
      maybe(p, "train_dataset", config.paths.train_dataset);
      maybe(p, "test_dataset", config.paths.test_dataset);
      maybe(p, "unannotated_corpus", config.paths.unannotated_corpus);
      maybe(p, "stopwords", config.paths.stopwords);
      maybe(p, "embeddings", config.paths.embeddings);
      maybe(p, "clusters", config.paths.clusters);
      maybe(p, "lda", config.paths.lda);
      maybe(p, "features", config.paths.features);
      maybe(p, "schema", config.paths.schema);
      maybe(p, "model", config.paths.model);
      maybe(p, "predictions", config.paths.predictions);
      maybe(p, "report", config.paths.report);
    }
    if (j.contains("embedding")) {
      const json& e = j["embedding"];
      reject_unknown(e,
                     {"dim", "window", "min_count", "negative_samples", "epochs",
                      "initial_learning_rate", "subsample", "threads"},
                     path + " embedding");
      maybe(e, "dim", config.embedding.dim);
      maybe(e, "window", config.embedding.window);
      maybe(e, "min_count", config.embedding.min_count);
      maybe(e, "negative_samples", config.embedding.negative_samples);
      maybe(e, "epochs", config.embedding.epochs);
      maybe(e, "initial_learning_rate", config.embedding.initial_learning_rate);
      maybe(e, "subsample", config.embedding.subsample);
      maybe(e, "threads", config.embedding.threads);
    }
    maybe(j, "kmeans_k", config.kmeans_k);
    maybe(j, "kmeans_max_iters", config.kmeans_max_iters);
    maybe(j, "lda_topics", config.lda_topics);
    maybe(j, "lda_alpha", config.lda_alpha);
    maybe(j, "lda_beta", config.lda_beta);
    maybe(j, "lda_train_sweeps", config.lda_train_sweeps);
    maybe(j, "lda_infer_sweeps", config.lda_infer_sweeps);
    if (j.contains("groups"))
      for (const auto& g : j["groups"])
        config.groups.insert(parse_feature_group(g.get<std::string>()));
    if (j.contains("tagset"))
      config.tagset = j["tagset"].get<std::vector<std::string>>();
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t,
                     {"cost_grid", "folds", "tolerance", "max_iterations",
                      "regularize_bias"},
                     path + " train");
      maybe(t, "cost_grid", config.train.cost_grid);
      maybe(t, "folds", config.train.folds);
      maybe(t, "tolerance", config.train.tolerance);
      maybe(t, "max_iterations", config.train.max_iterations);
      maybe(t, "regularize_bias", config.train.regularize_bias);
    }
    maybe(j, "fixed_c", config.fixed_c);
    maybe(j, "test_fraction", config.test_fraction);
    maybe(j, "include_empty_queries", config.include_empty_queries);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config value in " + path + ": " + e.what());
  }
  if (config.test_fraction < 0.0 || config.test_fraction >= 1.0)
    throw ConfigError("test_fraction must be in [0, 1)");
  return config;
}

void save_pipeline_config(const std::string& path, const PipelineConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["subtask"] = config.subtask;
  json p;
  p["dataset"] = config.paths.dataset;
  p["train_dataset"] = config.paths.train_dataset;
  p["test_dataset"] = config.paths.test_dataset;
  p["unannotated_corpus"] = config.paths.unannotated_corpus;
  p["stopwords"] = config.paths.stopwords;
  p["embeddings"] = config.paths.embeddings;
  p["clusters"] = config.paths.clusters;
  p["lda"] = config.paths.lda;
  p["features"] = config.paths.features;
  p["schema"] = config.paths.schema;
  p["model"] = config.paths.model;
  p["predictions"] = config.paths.predictions;
  p["report"] = config.paths.report;
  j["paths"] = std::move(p);
  json e;
  e["dim"] = config.embedding.dim;
  e["window"] = config.embedding.window;
  e["min_count"] = config.embedding.min_count;
  e["negative_samples"] = config.embedding.negative_samples;
  e["epochs"] = config.embedding.epochs;
  e["initial_learning_rate"] = config.embedding.initial_learning_rate;
  e["subsample"] = config.embedding.subsample;
  e["threads"] = config.embedding.threads;
  j["embedding"] = std::move(e);
  j["kmeans_k"] = config.kmeans_k;
  j["kmeans_max_iters"] = config.kmeans_max_iters;
  j["lda_topics"] = config.lda_topics;
  j["lda_alpha"] = config.lda_alpha;
  j["lda_beta"] = config.lda_beta;
  j["lda_train_sweeps"] = config.lda_train_sweeps;
  j["lda_infer_sweeps"] = config.lda_infer_sweeps;
  j["groups"] = json::array();
  for (FeatureGroup g : all_feature_groups())
    if (config.groups.count(g)) j["groups"].push_back(feature_group_name(g));
  j["tagset"] = config.tagset;
  json t;
  t["cost_grid"] = config.train.cost_grid;
  t["folds"] = config.train.folds;
  t["tolerance"] = config.train.tolerance;
  t["max_iterations"] = config.train.max_iterations;
  t["regularize_bias"] = config.train.regularize_bias;
  j["train"] = std::move(t);
  j["fixed_c"] = config.fixed_c;
  j["test_fraction"] = config.test_fraction;
  j["include_empty_queries"] = config.include_empty_queries;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Orchestration

void split_threads(const std::vector<Thread>& threads, double test_fraction,
                   uint64_t seed, std::vector<Thread>& train,
                   std::vector<Thread>& test) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ConfigError("test_fraction must be in [0, 1)");
  train.clear();
  test.clear();
  const size_t n = threads.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  size_t n_test = static_cast<size_t>(test_fraction * n);
  if (test_fraction > 0.0 && n_test == 0 && n > 1) n_test = 1;
  for (size_t i = 0; i < n; ++i) {
    if (i < n_test)
      test.push_back(threads[order[i]]);
    else
      train.push_back(threads[order[i]]);
  }
}

std::vector<std::string> collect_categories(const std::vector<Thread>& threads) {
  std::set<std::string> cats;
  for (const Thread& t : threads) cats.insert(t.question.category);
  return std::vector<std::string>(cats.begin(), cats.end());
}

FeatureMatrix extract_matrix(const std::vector<Thread>& threads,
                             const ModelBundle& bundle,
                             const FeatureSchema& schema) {
  FeatureMatrix matrix;
  for (const Thread& t : threads) {
    for (const Comment& c : t.comments) {
      const FeatureVector fv = assemble(t.question, c, bundle, schema);
      matrix.thread_ids.push_back(t.question.id);
      matrix.comment_ids.push_back(c.id);
      matrix.labels.push_back(c.gold_label);
      matrix.rows.push_back(to_dense(fv, schema));
    }
  }
  return matrix;
}

TrainedModels train_models(const std::vector<Thread>& train_threads,
                           const std::vector<std::vector<std::string>>& embedding_corpus,
                           const PipelineConfig& config) {
  // One master seed drives every stage.
  TrainedModels models;

  std::vector<std::vector<std::string>> corpus = embedding_corpus;
  if (corpus.empty()) {
    for (const Thread& t : train_threads) {
      corpus.push_back(t.question.subject_tokens);
      corpus.push_back(t.question.body_tokens);
      for (const Comment& c : t.comments) corpus.push_back(c.tokens);
    }
  }

  EmbeddingConfig ec = config.embedding;
  ec.seed = config.seed;
  models.embeddings = train_skipgram(corpus, ec);

  models.clusters = kmeans(models.embeddings, config.kmeans_k,
                           config.kmeans_max_iters, config.seed + 1);

  models.lda = train_lda(lda_documents(train_threads), config.lda_topics,
                         config.effective_lda_alpha(), config.lda_beta,
                         config.lda_train_sweeps, config.seed + 2);
  return models;
}

std::vector<std::vector<std::string>> lda_documents(
    const std::vector<Thread>& threads) {
  std::vector<std::vector<std::string>> docs;
  for (const Thread& t : threads) {
    std::vector<std::string> qdoc = t.question.subject_tokens;
    qdoc.insert(qdoc.end(), t.question.body_tokens.begin(),
                t.question.body_tokens.end());
    docs.push_back(std::move(qdoc));
    for (const Comment& c : t.comments) docs.push_back(c.tokens);
  }
  return docs;
}

ClassifierFit fit_classifier(const std::vector<std::vector<double>>& raw_rows,
                             const std::vector<int>& y, const FeatureSchema& schema,
                             const PipelineConfig& config) {
  ClassifierFit fit;
  const ScalerParams scaler = fit_scaler(raw_rows);
  std::vector<std::vector<double>> rows;
  rows.reserve(raw_rows.size());
  for (const auto& row : raw_rows) rows.push_back(apply_scaler(scaler, row));

  TrainOptions opts = config.train;
  opts.seed = config.seed + 3;

  double chosen_c = config.fixed_c;
  if (chosen_c <= 0.0) {
    fit.cv = cross_validate_c(rows, y, opts);
    chosen_c = fit.cv.best_c;
  }
  fit.model = train_logreg(rows, y, chosen_c, opts);
  fit.model.scaler = scaler;
  fit.model.schema_hash = schema.hash();
  return fit;
}

std::vector<int> matrix_labels(const FeatureMatrix& matrix) {
  std::vector<int> y;
  y.reserve(matrix.labels.size());
  for (size_t i = 0; i < matrix.labels.size(); ++i) {
    if (!matrix.labels[i])
      throw IntegrityError("comment " + matrix.comment_ids[i] +
                           " has no gold label but training requires one");
    y.push_back(is_good(*matrix.labels[i]) ? 1 : -1);
  }
  return y;
}

PipelineResult run_pipeline(const std::vector<Thread>& train_threads,
                            const std::vector<Thread>& test_threads,
                            const TrainedModels& models,
                            const PipelineConfig& config) {
  if (train_threads.empty()) throw IntegrityError("no training threads");
  if (test_threads.empty()) throw IntegrityError("no test threads");

  const FeatureSchema schema =
      build_schema(config.enabled_groups(), models.embeddings.dim,
                   config.effective_tagset(), collect_categories(train_threads));
  ModelBundle bundle;
  bundle.embeddings = &models.embeddings;
  bundle.clusters = &models.clusters;
  bundle.lda = &models.lda;
  bundle.lda_infer_sweeps = config.lda_infer_sweeps;
  bundle.seed = config.seed + 4;

  const FeatureMatrix train_matrix = extract_matrix(train_threads, bundle, schema);
  const std::vector<int> y = matrix_labels(train_matrix);

  const ClassifierFit fit = fit_classifier(train_matrix.rows, y, schema, config);

  PipelineResult result;
  result.model = fit.model;
  result.cv = fit.cv;
  result.train_pairs = train_matrix.rows.size();

  for (const Thread& t : test_threads) {
    std::vector<ScoredComment> scored;
    scored.reserve(t.comments.size());
    for (const Comment& c : t.comments) {
      const FeatureVector fv = assemble(t.question, c, bundle, schema);
      const std::vector<double> x = apply_scaler(fit.model.scaler, to_dense(fv, schema));
      scored.push_back(
          {c.id, predict_proba(fit.model, x), c.gold_label, c.rank_in_thread});
      ++result.test_pairs;
    }
    result.ranked.push_back(rank_thread(t.question.id, std::move(scored)));
  }
  result.report = evaluate(result.ranked, config.include_empty_queries);
  return result;
}

PipelineResult run_pipeline_c(const std::vector<Thread>& train_threads,
                              const std::vector<RelatedQuestionSet>& test_sets,
                              const TrainedModels& models,
                              const PipelineConfig& config,
                              const SubtaskCCombiner& combiner) {
  if (train_threads.empty()) throw IntegrityError("no training threads");
  if (test_sets.empty()) throw IntegrityError("no test question sets");

  const FeatureSchema schema =
      build_schema(config.enabled_groups(), models.embeddings.dim,
                   config.effective_tagset(), collect_categories(train_threads));
  ModelBundle bundle;
  bundle.embeddings = &models.embeddings;
  bundle.clusters = &models.clusters;
  bundle.lda = &models.lda;
  bundle.lda_infer_sweeps = config.lda_infer_sweeps;
  bundle.seed = config.seed + 4;

  const FeatureMatrix train_matrix = extract_matrix(train_threads, bundle, schema);
  const std::vector<int> y = matrix_labels(train_matrix);
  const ClassifierFit fit = fit_classifier(train_matrix.rows, y, schema, config);

  PipelineResult result;
  result.model = fit.model;
  result.cv = fit.cv;
  result.train_pairs = train_matrix.rows.size();

  for (const RelatedQuestionSet& set : test_sets) {
    // Classifier probabilities come from the comment's own thread (subtask A
    // applied to the related question); the search rank ties it back to the
    // original question.
    std::vector<RankedComment> pooled;
    for (const RelatedEntry& entry : set.related) {
      for (const Comment& c : entry.thread.comments) {
        const FeatureVector fv = assemble(entry.thread.question, c, bundle, schema);
        const std::vector<double> x =
            apply_scaler(fit.model.scaler, to_dense(fv, schema));
        const double prob = predict_proba(fit.model, x);
        RankedComment rc;
        rc.comment_id = c.id;
        rc.score = combiner(prob, entry.search_rank);
        rc.predicted_good = prob >= 0.5;
        rc.gold_label = entry.labels.at(c.id);
        rc.original_rank = static_cast<int>(pooled.size()) + 1;
        pooled.push_back(std::move(rc));
        ++result.test_pairs;
      }
    }
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const RankedComment& a, const RankedComment& b) {
                       if (a.score != b.score) return a.score > b.score;
                       return a.original_rank < b.original_rank;
                     });
    result.ranked.push_back({set.original_question.id, std::move(pooled)});
  }
  result.report = evaluate(result.ranked, config.include_empty_queries);
  return result;
}

std::vector<AblationRow> ablation_run(
    const std::vector<Thread>& train_threads,
    const std::vector<Thread>& test_threads, const TrainedModels& models,
    const PipelineConfig& config,
    const std::vector<std::set<FeatureGroup>>& removal_sets) {
  if (train_threads.empty()) throw IntegrityError("no training threads");
  if (test_threads.empty()) throw IntegrityError("no test threads");

  const std::set<FeatureGroup> enabled = config.enabled_groups();
  const std::vector<std::string> categories = collect_categories(train_threads);
  const FeatureSchema full_schema =
      build_schema(enabled, models.embeddings.dim, config.effective_tagset(),
                   categories);
  ModelBundle bundle;
  bundle.embeddings = &models.embeddings;
  bundle.clusters = &models.clusters;
  bundle.lda = &models.lda;
  bundle.lda_infer_sweeps = config.lda_infer_sweeps;
  bundle.seed = config.seed + 4;

  // Features are extracted once on the full schema; each row then trains on a
  // column subset.
  const FeatureMatrix train_matrix = extract_matrix(train_threads, bundle, full_schema);
  const FeatureMatrix test_matrix = extract_matrix(test_threads, bundle, full_schema);
  const std::vector<int> y = matrix_labels(train_matrix);

  std::vector<std::set<FeatureGroup>> all_rows;
  all_rows.emplace_back();  // the "All" row
  all_rows.insert(all_rows.end(), removal_sets.begin(), removal_sets.end());

  std::vector<AblationRow> table;
  for (const auto& removed : all_rows) {
    for (FeatureGroup g : removed)
      if (!enabled.count(g))
        throw ConfigError(std::string("cannot remove disabled group ") +
                          feature_group_name(g));
    std::vector<size_t> keep;
    for (size_t i = 0; i < full_schema.columns.size(); ++i)
      if (!removed.count(full_schema.columns[i].first)) keep.push_back(i);
    if (keep.empty())
      throw ConfigError("removal set leaves no feature columns");

    auto subset = [&keep](const std::vector<double>& row) {
      std::vector<double> out;
      out.reserve(keep.size());
      for (size_t i : keep) out.push_back(row[i]);
      return out;
    };
    std::vector<std::vector<double>> train_rows;
    train_rows.reserve(train_matrix.rows.size());
    for (const auto& row : train_matrix.rows) train_rows.push_back(subset(row));

    std::set<FeatureGroup> sub_enabled;
    for (FeatureGroup g : enabled)
      if (!removed.count(g)) sub_enabled.insert(g);
    const FeatureSchema sub_schema =
        build_schema(sub_enabled, models.embeddings.dim, config.effective_tagset(),
                     categories);
    const ClassifierFit fit = fit_classifier(train_rows, y, sub_schema, config);

    // Regroup test rows by thread and rank.
    std::vector<RankedThread> ranked;
    size_t r = 0;
    for (const Thread& t : test_threads) {
      std::vector<ScoredComment> scored;
      scored.reserve(t.comments.size());
      for (const Comment& c : t.comments) {
        const std::vector<double> x = apply_scaler(fit.model.scaler, subset(test_matrix.rows[r]));
        scored.push_back(
            {c.id, predict_proba(fit.model, x), c.gold_label, c.rank_in_thread});
        ++r;
      }
      ranked.push_back(rank_thread(t.question.id, std::move(scored)));
    }
    const EvalReport report = evaluate(ranked, config.include_empty_queries);
    table.push_back({removed, report.map, report.accuracy});
  }
  return table;
}

std::vector<AblationRow> ablation_run_c(
    const std::vector<Thread>& train_threads,
    const std::vector<RelatedQuestionSet>& test_sets,
    const TrainedModels& models, const PipelineConfig& config,
    const std::vector<std::set<FeatureGroup>>& removal_sets,
    const SubtaskCCombiner& combiner) {
  if (train_threads.empty()) throw IntegrityError("no training threads");
  if (test_sets.empty()) throw IntegrityError("no test question sets");

  const std::set<FeatureGroup> enabled = config.enabled_groups();
  const std::vector<std::string> categories = collect_categories(train_threads);
  const FeatureSchema full_schema =
      build_schema(enabled, models.embeddings.dim, config.effective_tagset(),
                   categories);
  ModelBundle bundle;
  bundle.embeddings = &models.embeddings;
  bundle.clusters = &models.clusters;
  bundle.lda = &models.lda;
  bundle.lda_infer_sweeps = config.lda_infer_sweeps;
  bundle.seed = config.seed + 4;

  const FeatureMatrix train_matrix = extract_matrix(train_threads, bundle, full_schema);
  const std::vector<int> y = matrix_labels(train_matrix);

  struct TestRow {
    size_t set;
    int search_rank;
    std::string comment_id;
    Label gold;
    std::vector<double> x;
  };
  std::vector<TestRow> test_rows;
  for (size_t s = 0; s < test_sets.size(); ++s)
    for (const RelatedEntry& entry : test_sets[s].related)
      for (const Comment& c : entry.thread.comments) {
        const FeatureVector fv = assemble(entry.thread.question, c, bundle, full_schema);
        test_rows.push_back(
            {s, entry.search_rank, c.id, entry.labels.at(c.id), to_dense(fv, full_schema)});
      }

  std::vector<std::set<FeatureGroup>> all_rows;
  all_rows.emplace_back();
  all_rows.insert(all_rows.end(), removal_sets.begin(), removal_sets.end());

  std::vector<AblationRow> table;
  for (const auto& removed : all_rows) {
    for (FeatureGroup g : removed)
      if (!enabled.count(g))
        throw ConfigError(std::string("cannot remove disabled group ") +
                          feature_group_name(g));
    std::vector<size_t> keep;
    for (size_t i = 0; i < full_schema.columns.size(); ++i)
      if (!removed.count(full_schema.columns[i].first)) keep.push_back(i);
    if (keep.empty())
      throw ConfigError("removal set leaves no feature columns");

    auto subset = [&keep](const std::vector<double>& row) {
      std::vector<double> out;
      out.reserve(keep.size());
      for (size_t i : keep) out.push_back(row[i]);
      return out;
    };
    std::vector<std::vector<double>> train_rows;
    train_rows.reserve(train_matrix.rows.size());
    for (const auto& row : train_matrix.rows) train_rows.push_back(subset(row));

    std::set<FeatureGroup> sub_enabled;
    for (FeatureGroup g : enabled)
      if (!removed.count(g)) sub_enabled.insert(g);
    const FeatureSchema sub_schema =
        build_schema(sub_enabled, models.embeddings.dim, config.effective_tagset(),
                     categories);
    const ClassifierFit fit = fit_classifier(train_rows, y, sub_schema, config);

    std::vector<std::vector<RankedComment>> pooled(test_sets.size());
    for (const TestRow& tr : test_rows) {
      const std::vector<double> x = apply_scaler(fit.model.scaler, subset(tr.x));
      const double prob = predict_proba(fit.model, x);
      RankedComment rc;
      rc.comment_id = tr.comment_id;
      rc.score = combiner(prob, tr.search_rank);
      rc.predicted_good = prob >= 0.5;
      rc.gold_label = tr.gold;
      rc.original_rank = static_cast<int>(pooled[tr.set].size()) + 1;
      pooled[tr.set].push_back(std::move(rc));
    }
    std::vector<RankedThread> ranked;
    for (size_t s = 0; s < test_sets.size(); ++s) {
      std::stable_sort(pooled[s].begin(), pooled[s].end(),
                       [](const RankedComment& a, const RankedComment& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.original_rank < b.original_rank;
                       });
      ranked.push_back({test_sets[s].original_question.id, std::move(pooled[s])});
    }
    const EvalReport report = evaluate(ranked, config.include_empty_queries);
    table.push_back({removed, report.map, report.accuracy});
  }
  return table;
}

}  // namespace cqa
