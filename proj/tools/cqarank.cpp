// Command-line front end. One JSON config drives every stage; each config key
// has a matching flag, and each subcommand runs a single pipeline stage.
//
// Exit codes: 0 success, 2 usage/config errors, 3 data integrity errors,
// 4 numerical failures.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cqa/clustering.hpp"
#include "cqa/corpus.hpp"
#include "cqa/embeddings.hpp"
#include "cqa/errors.hpp"
#include "cqa/features.hpp"
#include "cqa/model.hpp"
#include "cqa/pipeline.hpp"
#include "cqa/ranking.hpp"
#include "cqa/topics.hpp"

namespace {

using cqa::FeatureGroup;
using cqa::PipelineConfig;

bool file_exists(const std::string& path) {
  std::ifstream f(path);
  return f.good();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  for (std::string& p : parts) {
    const size_t a = p.find_first_not_of(" \t");
    const size_t b = p.find_last_not_of(" \t");
    p = a == std::string::npos ? "" : p.substr(a, b - a + 1);
  }
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  return parts;
}

// CQA_RANK_THREADS caps every parallel stage; unset or 0 means no cap.
int capped_threads(int requested) {
  const char* s = std::getenv("CQA_RANK_THREADS");
  if (!s || !*s) return requested;
  const int cap = std::atoi(s);
  if (cap > 0 && requested > cap) return cap;
  return requested;
}

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty())
    throw cqa::ConfigError(std::string("paths.") + key +
                           " is not set (config file or flag)");
  return value;
}

cqa::TokenizerConfig tokenizer_for(const PipelineConfig& config,
                                   bool keep_stopwords) {
  cqa::TokenizerConfig tc = cqa::default_tokenizer_config();
  if (keep_stopwords)
    tc.stopword_set.clear();
  else if (!config.paths.stopwords.empty())
    tc.stopword_set = cqa::load_stopwords(config.paths.stopwords);
  return tc;
}

cqa::EmbeddingModel load_embeddings_any(const std::string& path) {
  return ends_with(path, ".bin") ? cqa::load_word2vec_binary(path)
                                 : cqa::load_word2vec_text(path);
}

void save_embeddings_any(const std::string& path, const cqa::EmbeddingModel& model,
                         const std::string& format) {
  const bool binary =
      format == "binary" || (format.empty() && ends_with(path, ".bin"));
  if (binary)
    cqa::save_word2vec_binary(path, model);
  else
    cqa::save_word2vec_text(path, model);
}

std::set<FeatureGroup> parse_groups_arg(const std::string& arg) {
  if (arg == "all" || arg == "primary-submission") return cqa::preset_groups(arg);
  std::set<FeatureGroup> groups;
  for (const std::string& name : split_on(arg, ','))
    groups.insert(cqa::parse_feature_group(name));
  if (groups.empty()) throw cqa::ConfigError("empty feature group list");
  return groups;
}

std::vector<double> parse_cost_grid(const std::string& arg) {
  std::vector<double> grid;
  for (const std::string& part : split_on(arg, ',')) {
    try {
      size_t used = 0;
      const double c = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      grid.push_back(c);
    } catch (const std::exception&) {
      throw cqa::ConfigError("bad cost grid entry '" + part + "'");
    }
  }
  if (grid.empty()) throw cqa::ConfigError("empty cost grid");
  return grid;
}

// "dim:window:min_count:negative", all integers.
std::array<int, 4> parse_grid_entry(const std::string& entry) {
  const std::vector<std::string> fields = split_on(entry, ':');
  if (fields.size() != 4)
    throw cqa::ConfigError("bad grid entry '" + entry +
                           "': expected dim:window:min_count:negative");
  std::array<int, 4> out{};
  for (size_t i = 0; i < 4; ++i) {
    try {
      size_t used = 0;
      out[i] = std::stoi(fields[i], &used);
      if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
    } catch (const std::exception&) {
      throw cqa::ConfigError("bad grid entry '" + entry +
                             "': expected dim:window:min_count:negative");
    }
  }
  return out;
}

// model.txt -> model_d100_w5_mc5_neg5.txt
std::string stamped_path(const std::string& base, int dim, int window,
                         int min_count, int negative) {
  char stamp[64];
  std::snprintf(stamp, sizeof(stamp), "_d%d_w%d_mc%d_neg%d", dim, window,
                min_count, negative);
  const size_t slash = base.find_last_of('/');
  const size_t dot = base.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + stamp;
  return base.substr(0, dot) + stamp + base.substr(dot);
}

cqa::SubtaskCCombiner make_combiner(const std::string& name, double rank_weight) {
  if (name == "product") return cqa::product_combiner();
  if (name == "weighted-sum") return cqa::weighted_sum_combiner(rank_weight);
  throw cqa::ConfigError("unknown combiner '" + name +
                         "' (use product or weighted-sum)");
}

bool needs_embeddings(const std::set<FeatureGroup>& groups) {
  return groups.count(FeatureGroup::QuestionToComment) ||
         groups.count(FeatureGroup::Maximized) ||
         groups.count(FeatureGroup::Aligned) ||
         groups.count(FeatureGroup::PosSim) ||
         groups.count(FeatureGroup::RawVectors);
}

// Owns whichever model files the enabled feature groups require.
struct ModelStore {
  std::optional<cqa::EmbeddingModel> embeddings;
  std::optional<cqa::ClusterModel> clusters;
  std::optional<cqa::LdaModel> lda;
};

cqa::ModelBundle load_feature_models(const PipelineConfig& config,
                                     const std::set<FeatureGroup>& groups,
                                     ModelStore& store) {
  cqa::ModelBundle bundle;
  if (needs_embeddings(groups)) {
    store.embeddings =
        load_embeddings_any(require_path(config.paths.embeddings, "embeddings"));
    bundle.embeddings = &*store.embeddings;
  }
  if (groups.count(FeatureGroup::WordClusters)) {
    store.clusters =
        cqa::load_clusters(require_path(config.paths.clusters, "clusters"));
    bundle.clusters = &*store.clusters;
  }
  if (groups.count(FeatureGroup::LdaSim)) {
    store.lda = cqa::load_lda(require_path(config.paths.lda, "lda"));
    bundle.lda = &*store.lda;
  }
  bundle.lda_infer_sweeps = config.lda_infer_sweeps;
  bundle.seed = config.seed + 4;
  return bundle;
}

// ---------------------------------------------------------------------------
// Config file + flag overrides. Flags parse into deferred setters so that the
// config file loads first and explicit flags always win.

struct ConfigCli {
  std::string config_path;
  std::vector<std::function<void(PipelineConfig&)>> overrides;

  PipelineConfig resolve() const {
    PipelineConfig config;
    if (!config_path.empty()) config = cqa::load_pipeline_config(config_path);
    for (const auto& apply : overrides) apply(config);
    if (config.subtask != "A" && config.subtask != "C")
      throw cqa::ConfigError("subtask must be \"A\" or \"C\"");
    if (config.test_fraction < 0.0 || config.test_fraction >= 1.0)
      throw cqa::ConfigError("test_fraction must be in [0, 1)");
    return config;
  }
};

void attach_config_options(CLI::App* sub, const std::shared_ptr<ConfigCli>& cc) {
  sub->add_option("--config", cc->config_path, "pipeline configuration JSON");

  auto over = [cc](std::function<void(PipelineConfig&)> f) {
    cc->overrides.push_back(std::move(f));
  };

  sub->add_option_function<uint64_t>(
      "--seed",
      [over](const uint64_t& v) { over([v](PipelineConfig& c) { c.seed = v; }); },
      "master seed; every stage derives its own from it");
  sub->add_option_function<std::string>(
      "--subtask",
      [over](const std::string& v) {
        over([v](PipelineConfig& c) { c.subtask = v; });
      },
      "A or C");

  auto path_opt = [sub, &over](const char* flag,
                               std::string PipelineConfig::Paths::* member,
                               const char* help) {
    sub->add_option_function<std::string>(
        flag,
        [over, member](const std::string& v) {
          over([member, v](PipelineConfig& c) { c.paths.*member = v; });
        },
        help);
  };
  path_opt("--dataset", &PipelineConfig::Paths::dataset, "labelled dataset JSONL");
  path_opt("--train-dataset", &PipelineConfig::Paths::train_dataset,
           "explicit training split JSONL");
  path_opt("--test-dataset", &PipelineConfig::Paths::test_dataset,
           "explicit test split JSONL");
  path_opt("--unannotated-corpus", &PipelineConfig::Paths::unannotated_corpus,
           "token corpus for embedding training, one sentence per line");
  path_opt("--stopwords", &PipelineConfig::Paths::stopwords,
           "stopword list, one word per line (default: bundled)");
  path_opt("--embeddings", &PipelineConfig::Paths::embeddings,
           "word2vec model file (.bin selects the binary format)");
  path_opt("--clusters", &PipelineConfig::Paths::clusters, "k-means cluster file");
  path_opt("--lda", &PipelineConfig::Paths::lda, "LDA model file");
  path_opt("--features", &PipelineConfig::Paths::features, "feature matrix CSV");
  path_opt("--schema", &PipelineConfig::Paths::schema, "feature schema JSON");
  path_opt("--model", &PipelineConfig::Paths::model, "classifier model JSON");
  path_opt("--predictions", &PipelineConfig::Paths::predictions,
           "prediction file (TSV)");
  path_opt("--report", &PipelineConfig::Paths::report, "evaluation report JSON");

  auto emb_int = [sub, &over](const char* flag, int cqa::EmbeddingConfig::* member,
                              const char* help) {
    sub->add_option_function<int>(
        flag,
        [over, member](const int& v) {
          over([member, v](PipelineConfig& c) { c.embedding.*member = v; });
        },
        help);
  };
  emb_int("--dim", &cqa::EmbeddingConfig::dim, "embedding dimension");
  emb_int("--window", &cqa::EmbeddingConfig::window, "context window size");
  emb_int("--min-count", &cqa::EmbeddingConfig::min_count,
          "minimum word frequency");
  emb_int("--negative", &cqa::EmbeddingConfig::negative_samples,
          "negative samples per pair");
  emb_int("--epochs", &cqa::EmbeddingConfig::epochs, "training epochs");
  emb_int("--threads", &cqa::EmbeddingConfig::threads,
          "embedding threads; >1 is the nondeterministic lock-free mode");
  sub->add_option_function<float>(
      "--learning-rate",
      [over](const float& v) {
        over([v](PipelineConfig& c) { c.embedding.initial_learning_rate = v; });
      },
      "initial SGNS learning rate");
  sub->add_option_function<double>(
      "--subsample",
      [over](const double& v) {
        over([v](PipelineConfig& c) { c.embedding.subsample = v; });
      },
      "frequent-word subsampling threshold, 0 disables");

  auto top_int = [sub, &over](const char* flag, int PipelineConfig::* member,
                              const char* help) {
    sub->add_option_function<int>(
        flag,
        [over, member](const int& v) {
          over([member, v](PipelineConfig& c) { c.*member = v; });
        },
        help);
  };
  top_int("--kmeans-k", &PipelineConfig::kmeans_k, "number of word clusters");
  top_int("--kmeans-max-iters", &PipelineConfig::kmeans_max_iters,
          "Lloyd iteration cap");
  top_int("--lda-topics", &PipelineConfig::lda_topics, "number of LDA topics");
  top_int("--lda-train-sweeps", &PipelineConfig::lda_train_sweeps,
          "Gibbs sweeps for training");
  top_int("--lda-infer-sweeps", &PipelineConfig::lda_infer_sweeps,
          "Gibbs sweeps for inference");
  sub->add_option_function<double>(
      "--lda-alpha",
      [over](const double& v) { over([v](PipelineConfig& c) { c.lda_alpha = v; }); },
      "document-topic prior, 0 means 50/K");
  sub->add_option_function<double>(
      "--lda-beta",
      [over](const double& v) { over([v](PipelineConfig& c) { c.lda_beta = v; }); },
      "topic-word prior");

  sub->add_option_function<std::string>(
      "--groups",
      [over](const std::string& v) {
        over([v](PipelineConfig& c) { c.groups = parse_groups_arg(v); });
      },
      "feature groups: preset (all, primary-submission) or comma list");
  sub->add_option_function<std::string>(
      "--tagset",
      [over](const std::string& v) {
        over([v](PipelineConfig& c) { c.tagset = split_on(v, ','); });
      },
      "POS tagset as a comma list (default: universal 12-tag set)");

  sub->add_option_function<std::string>(
      "--cost-grid",
      [over](const std::string& v) {
        over([v](PipelineConfig& c) { c.train.cost_grid = parse_cost_grid(v); });
      },
      "cross-validation C grid as a comma list");
  sub->add_option_function<int>(
      "--folds",
      [over](const int& v) { over([v](PipelineConfig& c) { c.train.folds = v; }); },
      "cross-validation folds");
  sub->add_option_function<double>(
      "--tolerance",
      [over](const double& v) {
        over([v](PipelineConfig& c) { c.train.tolerance = v; });
      },
      "optimizer gradient tolerance");
  sub->add_option_function<int>(
      "--max-iterations",
      [over](const int& v) {
        over([v](PipelineConfig& c) { c.train.max_iterations = v; });
      },
      "optimizer iteration cap");
  sub->add_flag_function(
      "--regularize-bias",
      [over](std::int64_t) {
        over([](PipelineConfig& c) { c.train.regularize_bias = true; });
      },
      "include the bias in the L2 term");
  sub->add_flag_function(
      "--no-regularize-bias",
      [over](std::int64_t) {
        over([](PipelineConfig& c) { c.train.regularize_bias = false; });
      },
      "keep the bias unregularized (default)");
  sub->add_option_function<double>(
      "--fixed-c",
      [over](const double& v) { over([v](PipelineConfig& c) { c.fixed_c = v; }); },
      "skip cross-validation and train with this C");
  sub->add_option_function<double>(
      "--test-fraction",
      [over](const double& v) {
        over([v](PipelineConfig& c) { c.test_fraction = v; });
      },
      "test share when splitting a single dataset");
  sub->add_flag_function(
      "--include-empty-queries",
      [over](std::int64_t) {
        over([](PipelineConfig& c) { c.include_empty_queries = true; });
      },
      "count queries without a Good comment as AP 0");
  sub->add_flag_function(
      "--no-include-empty-queries",
      [over](std::int64_t) {
        over([](PipelineConfig& c) { c.include_empty_queries = false; });
      },
      "exclude queries without a Good comment (default)");
}

// ---------------------------------------------------------------------------
// Subcommands

void run_synth(const ConfigCli& cli, const cqa::SynthConfig& synth) {
  const PipelineConfig config = cli.resolve();
  if (synth.signal != "centroid" && synth.signal != "metadata")
    throw cqa::ConfigError("synth signal must be centroid or metadata");
  const std::string& out = require_path(config.paths.dataset, "dataset");
  if (config.subtask == "C") {
    const std::vector<cqa::RelatedQuestionSet> sets = cqa::synth_related(synth);
    cqa::save_subtask_c(out, sets);
    std::printf("wrote %zu related-question sets to %s\n", sets.size(), out.c_str());
  } else {
    const std::vector<cqa::Thread> threads = cqa::synth_threads(synth);
    cqa::save_subtask_a(out, threads);
    std::printf("wrote %zu threads to %s\n", threads.size(), out.c_str());
    if (!config.paths.train_dataset.empty() && !config.paths.test_dataset.empty()) {
      std::vector<cqa::Thread> train;
      std::vector<cqa::Thread> test;
      cqa::split_threads(threads, config.test_fraction, config.seed + 5, train, test);
      cqa::save_subtask_a(config.paths.train_dataset, train);
      cqa::save_subtask_a(config.paths.test_dataset, test);
      std::printf("split %zu/%zu threads into %s and %s\n", train.size(),
                  test.size(), config.paths.train_dataset.c_str(),
                  config.paths.test_dataset.c_str());
    }
  }
  if (!config.paths.unannotated_corpus.empty()) {
    const std::vector<std::string> sentences = cqa::synth_unannotated(synth);
    std::ofstream f(config.paths.unannotated_corpus);
    if (!f)
      throw cqa::IoError("cannot write " + config.paths.unannotated_corpus);
    for (const std::string& s : sentences) f << s << '\n';
    std::printf("wrote %zu sentences to %s\n", sentences.size(),
                config.paths.unannotated_corpus.c_str());
  }
}

void run_preprocess(const ConfigCli& cli, const std::string& input,
                    const std::string& output, bool keep_stopwords) {
  const PipelineConfig config = cli.resolve();
  std::ifstream in(input);
  if (!in) throw cqa::IoError("cannot open input: " + input);
  const cqa::TokenizerConfig tc = tokenizer_for(config, keep_stopwords);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  size_t tokens = 0;
  while (std::getline(in, line)) {
    corpus.push_back(cqa::preprocess(line, tc));
    tokens += corpus.back().size();
  }
  cqa::save_token_corpus(output, corpus);
  std::printf("wrote %zu lines (%zu tokens) to %s\n", corpus.size(), tokens,
              output.c_str());
}

void run_train_embeddings(const ConfigCli& cli, const std::string& grid,
                          const std::string& format) {
  const PipelineConfig config = cli.resolve();
  const std::string& in =
      require_path(config.paths.unannotated_corpus, "unannotated_corpus");
  const std::string& out_base = require_path(config.paths.embeddings, "embeddings");
  const std::vector<std::vector<std::string>> corpus = cqa::load_token_corpus(in);

  cqa::EmbeddingConfig base = config.embedding;
  base.seed = config.seed;
  base.threads = capped_threads(base.threads);

  if (grid.empty()) {
    const cqa::EmbeddingModel model = cqa::train_skipgram(corpus, base);
    save_embeddings_any(out_base, model, format);
    std::printf("trained %s: vocab %d, dim %d\n", out_base.c_str(),
                model.vocab.size(), model.dim);
    return;
  }
  for (const std::string& entry : split_on(grid, ',')) {
    const std::array<int, 4> t = parse_grid_entry(entry);
    cqa::EmbeddingConfig ec = base;
    ec.dim = t[0];
    ec.window = t[1];
    ec.min_count = t[2];
    ec.negative_samples = t[3];
    const std::string out = stamped_path(out_base, t[0], t[1], t[2], t[3]);
    if (file_exists(out)) {
      std::printf("skipping existing %s\n", out.c_str());
      continue;
    }
    const cqa::EmbeddingModel model = cqa::train_skipgram(corpus, ec);
    save_embeddings_any(out, model, format);
    std::printf("trained %s: vocab %d, dim %d\n", out.c_str(), model.vocab.size(),
                model.dim);
  }
}

void run_cluster(const ConfigCli& cli) {
  const PipelineConfig config = cli.resolve();
  const cqa::EmbeddingModel emb =
      load_embeddings_any(require_path(config.paths.embeddings, "embeddings"));
  const cqa::ClusterModel model =
      cqa::kmeans(emb, config.kmeans_k, config.kmeans_max_iters, config.seed + 1);
  const std::string& out = require_path(config.paths.clusters, "clusters");
  cqa::save_clusters(out, model);
  const double inertia =
      model.inertia_history.empty() ? 0.0 : model.inertia_history.back();
  std::printf("clustered %d words into %d clusters (%zu iterations, inertia %.6g); wrote %s\n",
              emb.vocab.size(), model.k, model.inertia_history.size(), inertia,
              out.c_str());
}

void run_train_lda(const ConfigCli& cli) {
  const PipelineConfig config = cli.resolve();
  const std::string in = config.paths.train_dataset.empty()
                             ? require_path(config.paths.dataset, "dataset")
                             : config.paths.train_dataset;
  std::vector<cqa::Thread> threads = cqa::load_subtask_a(in);
  cqa::preprocess_dataset(threads, tokenizer_for(config, false));
  const cqa::LdaModel model = cqa::train_lda(
      cqa::lda_documents(threads), config.lda_topics, config.effective_lda_alpha(),
      config.lda_beta, config.lda_train_sweeps, config.seed + 2);
  const std::string& out = require_path(config.paths.lda, "lda");
  cqa::save_lda(out, model);
  const double ll = model.ll_history.empty() ? 0.0 : model.ll_history.back().second;
  std::printf("trained LDA: %d topics, vocab %d, %d sweeps, log-likelihood %.6g; wrote %s\n",
              model.K, model.vocab.size(), config.lda_train_sweeps, ll, out.c_str());
}

void run_extract(const ConfigCli& cli, const std::string& input_flag,
                 const std::string& output_flag) {
  const PipelineConfig config = cli.resolve();
  if (config.subtask != "A")
    throw cqa::ConfigError(
        "extract reads subtask A thread files; subtask C scoring reads the "
        "dataset directly in `predict`");
  std::string in = input_flag;
  if (in.empty())
    in = config.paths.train_dataset.empty()
             ? require_path(config.paths.dataset, "dataset")
             : config.paths.train_dataset;
  const std::string out =
      output_flag.empty() ? require_path(config.paths.features, "features")
                          : output_flag;
  const std::string& schema_path = require_path(config.paths.schema, "schema");

  std::vector<cqa::Thread> threads = cqa::load_subtask_a(in);
  cqa::preprocess_dataset(threads, tokenizer_for(config, false));

  std::optional<cqa::FeatureSchema> schema;
  if (file_exists(schema_path)) schema = cqa::load_schema(schema_path);
  const std::set<FeatureGroup> groups =
      schema ? schema->groups : config.enabled_groups();

  ModelStore store;
  const cqa::ModelBundle bundle = load_feature_models(config, groups, store);
  if (schema && store.embeddings && schema->emb_dim != store.embeddings->dim)
    throw cqa::IntegrityError("embedding dim " + std::to_string(store.embeddings->dim) +
                              " does not match schema emb_dim " +
                              std::to_string(schema->emb_dim));
  if (!schema) {
    const int emb_dim = store.embeddings ? store.embeddings->dim : 0;
    schema = cqa::build_schema(groups, emb_dim, config.effective_tagset(),
                               cqa::collect_categories(threads));
    cqa::save_schema(schema_path, *schema);
    std::printf("wrote schema %s (%zu columns)\n", schema_path.c_str(),
                schema->size());
  }

  const cqa::FeatureMatrix matrix = cqa::extract_matrix(threads, bundle, *schema);
  cqa::save_feature_matrix(out, matrix, *schema);
  std::printf("wrote %zu rows x %zu features to %s\n", matrix.rows.size(),
              schema->size(), out.c_str());
}

void run_train(const ConfigCli& cli) {
  const PipelineConfig config = cli.resolve();
  const cqa::FeatureSchema schema =
      cqa::load_schema(require_path(config.paths.schema, "schema"));
  const cqa::FeatureMatrix matrix = cqa::load_feature_matrix(
      require_path(config.paths.features, "features"), schema);
  const std::vector<int> y = cqa::matrix_labels(matrix);
  const cqa::ClassifierFit fit =
      cqa::fit_classifier(matrix.rows, y, schema, config);
  const std::string& out = require_path(config.paths.model, "model");
  cqa::save_model_json(out, fit.model);

  if (!fit.cv.table.empty()) {
    std::printf("%10s %10s\n", "C", "accuracy");
    for (const cqa::CvRow& row : fit.cv.table)
      std::printf("%10g %10.4f%s\n", row.c, row.accuracy,
                  row.degenerate_fold ? "  (degenerate fold)" : "");
    std::printf("chosen C = %g by %d-fold cross-validation\n", fit.model.cost_c,
                config.train.folds);
  } else {
    std::printf("trained with fixed C = %g\n", fit.model.cost_c);
  }
  std::printf("trained on %zu rows x %zu features; wrote %s\n",
              matrix.rows.size(), schema.size(), out.c_str());
}

void check_contiguous(const std::vector<cqa::RankedThread>& ranked) {
  std::set<std::string> seen;
  for (const cqa::RankedThread& rt : ranked)
    if (!seen.insert(rt.thread_id).second)
      throw cqa::IntegrityError("rows for thread " + rt.thread_id +
                                " are not contiguous");
}

void run_predict(const ConfigCli& cli, const std::string& input_flag,
                 const std::string& combiner_name, double rank_weight) {
  const PipelineConfig config = cli.resolve();
  const cqa::FeatureSchema schema =
      cqa::load_schema(require_path(config.paths.schema, "schema"));
  const cqa::LogRegModel model =
      cqa::load_model_json(require_path(config.paths.model, "model"));
  if (model.schema_hash != schema.hash())
    throw cqa::IntegrityError(
        "model was trained on a different feature schema; refusing to predict");

  std::vector<cqa::RankedThread> ranked;
  size_t pairs = 0;

  if (config.subtask == "C") {
    std::string in = input_flag;
    if (in.empty())
      in = config.paths.test_dataset.empty()
               ? require_path(config.paths.dataset, "dataset")
               : config.paths.test_dataset;
    std::vector<cqa::RelatedQuestionSet> sets = cqa::load_subtask_c(in);
    cqa::preprocess_dataset(sets, tokenizer_for(config, false));
    ModelStore store;
    const cqa::ModelBundle bundle = load_feature_models(config, schema.groups, store);
    const cqa::SubtaskCCombiner combiner = make_combiner(combiner_name, rank_weight);

    for (const cqa::RelatedQuestionSet& set : sets) {
      std::vector<cqa::RankedComment> pooled;
      for (const cqa::RelatedEntry& entry : set.related) {
        for (const cqa::Comment& c : entry.thread.comments) {
          const cqa::FeatureVector fv =
              cqa::assemble(entry.thread.question, c, bundle, schema);
          const std::vector<double> x =
              cqa::apply_scaler(model.scaler, cqa::to_dense(fv, schema));
          const double prob = cqa::predict_proba(model, x);
          cqa::RankedComment rc;
          rc.comment_id = c.id;
          rc.score = combiner(prob, entry.search_rank);
          rc.predicted_good = prob >= 0.5;
          rc.gold_label = entry.labels.at(c.id);
          rc.original_rank = static_cast<int>(pooled.size()) + 1;
          pooled.push_back(std::move(rc));
          ++pairs;
        }
      }
      std::stable_sort(pooled.begin(), pooled.end(),
                       [](const cqa::RankedComment& a, const cqa::RankedComment& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.original_rank < b.original_rank;
                       });
      ranked.push_back({set.original_question.id, std::move(pooled)});
    }
  } else {
    const std::string in =
        input_flag.empty() ? require_path(config.paths.features, "features")
                           : input_flag;
    const cqa::FeatureMatrix matrix = cqa::load_feature_matrix(in, schema);
    const size_t n = matrix.rows.size();
    size_t i = 0;
    while (i < n) {
      const std::string tid = matrix.thread_ids[i];
      std::vector<cqa::ScoredComment> scored;
      int rank = 1;
      for (; i < n && matrix.thread_ids[i] == tid; ++i, ++rank) {
        const std::vector<double> x =
            cqa::apply_scaler(model.scaler, matrix.rows[i]);
        scored.push_back({matrix.comment_ids[i], cqa::predict_proba(model, x),
                          matrix.labels[i], rank});
        ++pairs;
      }
      ranked.push_back(cqa::rank_thread(tid, std::move(scored)));
    }
    check_contiguous(ranked);
  }

  const std::string& out = require_path(config.paths.predictions, "predictions");
  cqa::write_predictions(out, ranked);
  std::printf("wrote %zu queries (%zu pairs) to %s\n", ranked.size(), pairs,
              out.c_str());
}

void run_evaluate(const ConfigCli& cli, const std::string& input_flag) {
  const PipelineConfig config = cli.resolve();
  std::vector<cqa::RankedThread> ranked = cqa::read_predictions(
      require_path(config.paths.predictions, "predictions"));

  std::string in = input_flag;
  if (in.empty())
    in = config.paths.test_dataset.empty()
             ? require_path(config.paths.dataset, "dataset")
             : config.paths.test_dataset;

  std::map<std::pair<std::string, std::string>, cqa::Label> gold;
  if (config.subtask == "C") {
    for (const cqa::RelatedQuestionSet& set : cqa::load_subtask_c(in))
      for (const cqa::RelatedEntry& entry : set.related)
        for (const auto& [cid, label] : entry.labels)
          gold[{set.original_question.id, cid}] = label;
  } else {
    for (const cqa::Thread& t : cqa::load_subtask_a(in))
      for (const cqa::Comment& c : t.comments) {
        if (!c.gold_label)
          throw cqa::IntegrityError("comment " + c.id + " in thread " +
                                    t.question.id + " has no gold label");
        gold[{t.question.id, c.id}] = *c.gold_label;
      }
  }
  for (cqa::RankedThread& rt : ranked)
    for (cqa::RankedComment& e : rt.entries) {
      const auto it = gold.find({rt.thread_id, e.comment_id});
      if (it == gold.end())
        throw cqa::IntegrityError("no gold label for " + rt.thread_id + "/" +
                                  e.comment_id);
      e.gold_label = it->second;
    }

  const cqa::EvalReport report =
      cqa::evaluate(ranked, config.include_empty_queries);
  std::printf("MAP      %.4f\n", report.map);
  std::printf("Accuracy %.4f\n", report.accuracy);
  std::printf("queries  %zu scored of %zu\n", report.per_query_ap.size(),
              ranked.size());
  if (!config.paths.report.empty()) {
    cqa::save_report_json(config.paths.report, report);
    std::printf("wrote report to %s\n", config.paths.report.c_str());
  }
}

void run_ablate(const ConfigCli& cli, const std::string& remove_arg,
                const std::string& combiner_name, double rank_weight) {
  const PipelineConfig config = cli.resolve();
  const std::set<FeatureGroup> enabled = config.enabled_groups();

  std::vector<std::set<FeatureGroup>> removal_sets;
  if (remove_arg.empty()) {
    for (FeatureGroup g : enabled) removal_sets.push_back({g});
  } else {
    for (const std::string& part : split_on(remove_arg, ',')) {
      std::set<FeatureGroup> set;
      for (const std::string& name : split_on(part, '+'))
        set.insert(cqa::parse_feature_group(name));
      if (set.empty()) throw cqa::ConfigError("empty removal set");
      removal_sets.push_back(std::move(set));
    }
  }

  const cqa::TokenizerConfig tc = tokenizer_for(config, false);
  std::vector<cqa::Thread> train;
  std::vector<cqa::Thread> test;
  std::vector<cqa::RelatedQuestionSet> test_sets;
  if (config.subtask == "C") {
    train = cqa::load_subtask_a(
        require_path(config.paths.train_dataset, "train_dataset"));
    const std::string in = config.paths.test_dataset.empty()
                               ? require_path(config.paths.dataset, "dataset")
                               : config.paths.test_dataset;
    test_sets = cqa::load_subtask_c(in);
    cqa::preprocess_dataset(test_sets, tc);
  } else if (!config.paths.train_dataset.empty() &&
             !config.paths.test_dataset.empty()) {
    train = cqa::load_subtask_a(config.paths.train_dataset);
    test = cqa::load_subtask_a(config.paths.test_dataset);
    cqa::preprocess_dataset(test, tc);
  } else {
    std::vector<cqa::Thread> all =
        cqa::load_subtask_a(require_path(config.paths.dataset, "dataset"));
    cqa::split_threads(all, config.test_fraction, config.seed + 5, train, test);
    cqa::preprocess_dataset(test, tc);
  }
  cqa::preprocess_dataset(train, tc);

  // Model placeholders for disabled groups are never touched.
  cqa::TrainedModels models;
  if (needs_embeddings(enabled))
    models.embeddings =
        load_embeddings_any(require_path(config.paths.embeddings, "embeddings"));
  if (enabled.count(FeatureGroup::WordClusters))
    models.clusters =
        cqa::load_clusters(require_path(config.paths.clusters, "clusters"));
  if (enabled.count(FeatureGroup::LdaSim))
    models.lda = cqa::load_lda(require_path(config.paths.lda, "lda"));

  const std::vector<cqa::AblationRow> rows =
      config.subtask == "C"
          ? cqa::ablation_run_c(train, test_sets, models, config, removal_sets,
                                make_combiner(combiner_name, rank_weight))
          : cqa::ablation_run(train, test, models, config, removal_sets);
  std::fputs(cqa::format_ablation_table(rows).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cqarank: community question answering comment ranking"};
  app.require_subcommand(1);

  // synth
  auto synth_cc = std::make_shared<ConfigCli>();
  auto synth_cfg = std::make_shared<cqa::SynthConfig>();
  {
    CLI::App* sub = app.add_subcommand(
        "synth", "generate a synthetic dataset with a planted signal");
    attach_config_options(sub, synth_cc);
    sub->add_option("--n-threads", synth_cfg->n_threads, "threads to generate");
    sub->add_option("--synth-seed", synth_cfg->seed, "generator seed");
    sub->add_option("--signal", synth_cfg->signal, "centroid or metadata");
    sub->add_flag("--with-pos", synth_cfg->with_pos, "emit POS annotations");
    sub->add_option("--unannotated-sentences", synth_cfg->unannotated_sentences,
                    "sentences for paths.unannotated_corpus");
    sub->add_option("--related-per-question", synth_cfg->related_per_question,
                    "related threads per original question (subtask C)");
    sub->callback([synth_cc, synth_cfg] { run_synth(*synth_cc, *synth_cfg); });
  }

  // preprocess
  auto pre_cc = std::make_shared<ConfigCli>();
  auto pre_in = std::make_shared<std::string>();
  auto pre_out = std::make_shared<std::string>();
  auto pre_keep = std::make_shared<bool>(false);
  {
    CLI::App* sub =
        app.add_subcommand("preprocess", "tokenize a plain-text corpus");
    attach_config_options(sub, pre_cc);
    sub->add_option("--input", *pre_in, "raw text, one sentence per line")
        ->required();
    sub->add_option("--output", *pre_out, "token corpus output")->required();
    sub->add_flag("--keep-stopwords", *pre_keep,
                  "keep stopwords (recommended for the embedding corpus)");
    sub->callback(
        [pre_cc, pre_in, pre_out, pre_keep] {
          run_preprocess(*pre_cc, *pre_in, *pre_out, *pre_keep);
        });
  }

  // train-embeddings
  auto emb_cc = std::make_shared<ConfigCli>();
  auto emb_grid = std::make_shared<std::string>();
  auto emb_format = std::make_shared<std::string>();
  {
    CLI::App* sub =
        app.add_subcommand("train-embeddings", "train skip-gram word vectors");
    attach_config_options(sub, emb_cc);
    sub->add_option("--grid", *emb_grid,
                    "sweep of dim:window:min_count:negative tuples, comma "
                    "separated; outputs get config-stamped names and existing "
                    "files are skipped");
    sub->add_option("--format", *emb_format, "text or binary (default: by extension)")
        ->check(CLI::IsMember({"text", "binary"}));
    sub->callback([emb_cc, emb_grid, emb_format] {
      run_train_embeddings(*emb_cc, *emb_grid, *emb_format);
    });
  }

  // cluster
  auto clu_cc = std::make_shared<ConfigCli>();
  {
    CLI::App* sub =
        app.add_subcommand("cluster", "k-means cluster the embedding vocabulary");
    attach_config_options(sub, clu_cc);
    sub->callback([clu_cc] { run_cluster(*clu_cc); });
  }

  // train-lda
  auto lda_cc = std::make_shared<ConfigCli>();
  {
    CLI::App* sub = app.add_subcommand(
        "train-lda", "train an LDA topic model by collapsed Gibbs sampling");
    attach_config_options(sub, lda_cc);
    sub->callback([lda_cc] { run_train_lda(*lda_cc); });
  }

  // extract
  auto ext_cc = std::make_shared<ConfigCli>();
  auto ext_in = std::make_shared<std::string>();
  auto ext_out = std::make_shared<std::string>();
  {
    CLI::App* sub =
        app.add_subcommand("extract", "extract the feature matrix for a dataset");
    attach_config_options(sub, ext_cc);
    sub->add_option("--input", *ext_in,
                    "dataset JSONL (default: paths.train_dataset or paths.dataset)");
    sub->add_option("--output", *ext_out,
                    "feature matrix CSV (default: paths.features)");
    sub->callback(
        [ext_cc, ext_in, ext_out] { run_extract(*ext_cc, *ext_in, *ext_out); });
  }

  // train
  auto trn_cc = std::make_shared<ConfigCli>();
  {
    CLI::App* sub = app.add_subcommand(
        "train", "train the classifier on an extracted feature matrix");
    attach_config_options(sub, trn_cc);
    sub->callback([trn_cc] { run_train(*trn_cc); });
  }

  // predict
  auto prd_cc = std::make_shared<ConfigCli>();
  auto prd_in = std::make_shared<std::string>();
  auto prd_comb = std::make_shared<std::string>("product");
  auto prd_w = std::make_shared<double>(0.5);
  {
    CLI::App* sub = app.add_subcommand("predict", "score and rank comments");
    attach_config_options(sub, prd_cc);
    sub->add_option("--input", *prd_in,
                    "subtask A: feature matrix CSV (default: paths.features); "
                    "subtask C: dataset JSONL (default: paths.test_dataset or "
                    "paths.dataset)");
    sub->add_option("--combiner", *prd_comb,
                    "subtask C score combiner: product or weighted-sum");
    sub->add_option("--rank-weight", *prd_w,
                    "reciprocal-rank weight for weighted-sum");
    sub->callback([prd_cc, prd_in, prd_comb, prd_w] {
      run_predict(*prd_cc, *prd_in, *prd_comb, *prd_w);
    });
  }

  // evaluate
  auto evl_cc = std::make_shared<ConfigCli>();
  auto evl_in = std::make_shared<std::string>();
  {
    CLI::App* sub = app.add_subcommand(
        "evaluate", "score a prediction file against gold labels");
    attach_config_options(sub, evl_cc);
    sub->add_option("--input", *evl_in,
                    "gold dataset JSONL (default: paths.test_dataset or "
                    "paths.dataset)");
    sub->callback([evl_cc, evl_in] { run_evaluate(*evl_cc, *evl_in); });
  }

  // ablate
  auto abl_cc = std::make_shared<ConfigCli>();
  auto abl_remove = std::make_shared<std::string>();
  auto abl_comb = std::make_shared<std::string>("product");
  auto abl_w = std::make_shared<double>(0.5);
  {
    CLI::App* sub = app.add_subcommand(
        "ablate", "retrain with feature groups removed and print the table");
    attach_config_options(sub, abl_cc);
    sub->add_option("--remove", *abl_remove,
                    "removal sets, e.g. \"PosSim,QuestionToComment+RawVectors\" "
                    "(default: each enabled group singly)");
    sub->add_option("--combiner", *abl_comb,
                    "subtask C score combiner: product or weighted-sum");
    sub->add_option("--rank-weight", *abl_w,
                    "reciprocal-rank weight for weighted-sum");
    sub->callback([abl_cc, abl_remove, abl_comb, abl_w] {
      run_ablate(*abl_cc, *abl_remove, *abl_comb, *abl_w);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cqa::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cqa::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cqa::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cqa::IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cqa::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cqa::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
