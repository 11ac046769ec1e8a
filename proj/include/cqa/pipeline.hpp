#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cqa/corpus.hpp"
#include "cqa/embeddings.hpp"
#include "cqa/features.hpp"
#include "cqa/model.hpp"
#include "cqa/ranking.hpp"

namespace cqa {

// One configuration drives every stage; the CLI exposes the same keys as
// flags. Stopwords are kept when preprocessing the unannotated embedding
// corpus and removed from task data.
struct PipelineConfig {
  uint64_t seed = 42;
  std::string subtask = "A";  // "A" or "C"

  struct Paths {
    std::string dataset;          // single file, split by test_fraction
    std::string train_dataset;    // explicit split, overrides dataset
    std::string test_dataset;
    std::string unannotated_corpus;  // one sentence per line, plain text
    std::string stopwords;           // empty = bundled list
    std::string embeddings;
    std::string clusters;
    std::string lda;
    std::string features;
    std::string schema;
    std::string model;
    std::string predictions;
    std::string report;
  } paths;

  EmbeddingConfig embedding;

  int kmeans_k = 1000;
  int kmeans_max_iters = 100;

  int lda_topics = 100;
  double lda_alpha = 0.0;  // 0 = 50/K
  double lda_beta = 0.01;
  int lda_train_sweeps = 500;
  int lda_infer_sweeps = 50;

  std::set<FeatureGroup> groups;  // empty = all
  std::vector<std::string> tagset;  // empty = universal 12-tag set

  TrainOptions train;
  double fixed_c = 0.0;  // 0 = choose by cross-validation

  double test_fraction = 0.3;
  bool include_empty_queries = false;

  std::set<FeatureGroup> enabled_groups() const;
  std::vector<std::string> effective_tagset() const;
  double effective_lda_alpha() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const std::string& path, const PipelineConfig& config);

// Models shared by every ablation row.
struct TrainedModels {
  EmbeddingModel embeddings;
  ClusterModel clusters;
  LdaModel lda;
};

struct PipelineResult {
  EvalReport report;
  LogRegModel model;
  CvResult cv;  // empty table when fixed_c was used
  std::vector<RankedThread> ranked;
  size_t train_pairs = 0;
  size_t test_pairs = 0;
};

// Deterministic split of one dataset into train/test thread lists.
void split_threads(const std::vector<Thread>& threads, double test_fraction,
                   uint64_t seed, std::vector<Thread>& train,
                   std::vector<Thread>& test);

// Sorted unique question categories, the MetaCategories column source.
std::vector<std::string> collect_categories(const std::vector<Thread>& threads);

// LDA training documents: question subject+body as one document, then each
// comment as its own document.
std::vector<std::vector<std::string>> lda_documents(const std::vector<Thread>& threads);

// One row per (question, comment) pair in dataset order.
FeatureMatrix extract_matrix(const std::vector<Thread>& threads,
                             const ModelBundle& bundle,
                             const FeatureSchema& schema);

TrainedModels train_models(const std::vector<Thread>& train_threads,
                           const std::vector<std::vector<std::string>>& embedding_corpus,
                           const PipelineConfig& config);

// +1 for Good, -1 otherwise; throws IntegrityError on a missing label.
std::vector<int> matrix_labels(const FeatureMatrix& matrix);

struct ClassifierFit {
  LogRegModel model;  // carries the scaler and the schema hash
  CvResult cv;        // empty table when fixed_c was used
};

// Scale (min-max on these rows), pick C by cross-validation unless
// config.fixed_c is positive, then train on everything.
ClassifierFit fit_classifier(const std::vector<std::vector<double>>& raw_rows,
                             const std::vector<int>& y,
                             const FeatureSchema& schema,
                             const PipelineConfig& config);

// Full subtask-A pipeline on in-memory threads: features, scaling, classifier,
// ranking, evaluation.
PipelineResult run_pipeline(const std::vector<Thread>& train_threads,
                            const std::vector<Thread>& test_threads,
                            const TrainedModels& models,
                            const PipelineConfig& config);

// Subtask C: the classifier is trained on subtask-A style threads, each
// related comment is scored within its own thread, and the score is combined
// with the related question's search reciprocal rank; one ranked list per
// original question.
PipelineResult run_pipeline_c(const std::vector<Thread>& train_threads,
                              const std::vector<RelatedQuestionSet>& test_sets,
                              const TrainedModels& models,
                              const PipelineConfig& config,
                              const SubtaskCCombiner& combiner = product_combiner());

// One row per removal set plus the implicit "All" row; every row is trained
// and evaluated identically except for the removed columns.
std::vector<AblationRow> ablation_run(const std::vector<Thread>& train_threads,
                                      const std::vector<Thread>& test_threads,
                                      const TrainedModels& models,
                                      const PipelineConfig& config,
                                      const std::vector<std::set<FeatureGroup>>& removal_sets);

// Same harness for subtask C: the classifier is trained on subtask-A threads
// and each row is evaluated on the pooled related-comment ranking.
std::vector<AblationRow> ablation_run_c(const std::vector<Thread>& train_threads,
                                        const std::vector<RelatedQuestionSet>& test_sets,
                                        const TrainedModels& models,
                                        const PipelineConfig& config,
                                        const std::vector<std::set<FeatureGroup>>& removal_sets,
                                        const SubtaskCCombiner& combiner = product_combiner());

// Synthetic desk-scale data with a planted signal. "centroid" plants the
// label signal in the vocabulary mixture (centroid similarity separates
// labels); "metadata" keeps the vocabulary label-neutral and plants the signal
// in length, question marks and rank instead.
struct SynthConfig {
  int n_threads = 50;
  uint64_t seed = 7;
  int unannotated_sentences = 2000;
  std::string signal = "centroid";  // or "metadata"
  bool with_pos = false;            // emit POS annotations
  int related_per_question = 5;     // subtask C only
};

std::vector<Thread> synth_threads(const SynthConfig& config);
std::vector<RelatedQuestionSet> synth_related(const SynthConfig& config);
// Plain sentences (already space-joined) for embedding training.
std::vector<std::string> synth_unannotated(const SynthConfig& config);

}  // namespace cqa
