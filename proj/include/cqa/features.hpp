#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cqa/clustering.hpp"
#include "cqa/corpus.hpp"
#include "cqa/embeddings.hpp"
#include "cqa/topics.hpp"

namespace cqa {

// Feature groups are the ablation unit: every feature belongs to exactly one.
enum class FeatureGroup {
  QuestionToComment,
  Maximized,
  Aligned,
  PosSim,
  WordClusters,
  LdaSim,
  Metadata,
  MetaCategories,
  RawVectors,
};

const char* feature_group_name(FeatureGroup group);
FeatureGroup parse_feature_group(const std::string& name);  // ConfigError on unknown
const std::vector<FeatureGroup>& all_feature_groups();

// Named presets: "all" and "primary-submission" (all minus PosSim and
// MetaCategories).
std::set<FeatureGroup> preset_groups(const std::string& name);

struct Feature {
  FeatureGroup group;
  std::string name;
  double value;
};

struct FeatureVector {
  std::vector<Feature> values;    // in schema column order
  bool pos_tags_missing = false;  // POS annotations absent on either side
};

// Pins the dense column order so train and test matrices line up.
struct FeatureSchema {
  std::vector<std::pair<FeatureGroup, std::string>> columns;
  std::set<FeatureGroup> groups;
  std::vector<std::string> tagset;
  std::vector<std::string> categories;  // discovered on training data
  int emb_dim = 0;

  size_t size() const { return columns.size(); }
  uint64_t hash() const;  // FNV-1a over the column list
};

// Column layout: QuestionToComment (2), Maximized (4), Aligned (1),
// PosSim (|tagset|), WordClusters (1), LdaSim (1), Metadata (6),
// MetaCategories (|categories|), RawVectors (2*dim); disabled groups
// contribute no columns. Throws ConfigError when enabled is empty.
FeatureSchema build_schema(const std::set<FeatureGroup>& enabled, int emb_dim,
                           const std::vector<std::string>& tagset,
                           const std::vector<std::string>& categories);

void save_schema(const std::string& path, const FeatureSchema& schema);
FeatureSchema load_schema(const std::string& path);

// Read-only models needed by the enabled groups.
struct ModelBundle {
  const EmbeddingModel* embeddings = nullptr;
  const ClusterModel* clusters = nullptr;
  const LdaModel* lda = nullptr;
  int lda_infer_sweeps = 50;
  uint64_t seed = 1;
};

// question body -> comment and question subject -> comment centroid
// similarities; degenerate centroids give 0.
std::array<double, 2> qc_similarity(const Question& q, const Comment& c,
                                    const EmbeddingModel& emb);

// Mean similarity of the top-N comment words against the question-body
// centroid, for each N in n_values; averages what exists when fewer than N
// in-vocabulary tokens are present, 0 when none are.
std::vector<double> maximized_similarity(const std::vector<float>& q_body_centroid,
                                         const std::vector<std::string>& c_tokens,
                                         const EmbeddingModel& emb,
                                         const std::vector<int>& n_values = {1, 2, 3, 5});

// For each in-vocabulary question token, its best cosine match among the
// comment tokens; returns the mean over question tokens. Not symmetric.
double aligned_similarity(const std::vector<std::string>& q_tokens,
                          const std::vector<std::string>& c_tokens,
                          const EmbeddingModel& emb);

struct PosSimResult {
  std::vector<double> values;  // one per tag in the tagset
  bool missing = false;        // POS annotations absent on either side
};

// Per-tag centroid similarity between question-body and comment words carrying
// that tag. Input tags are collapsed to the universal tagset; unknown tags are
// ignored.
PosSimResult pos_similarity(const Question& q, const Comment& c,
                            const EmbeddingModel& emb,
                            const std::vector<std::string>& tagset);

struct MetadataResult {
  // has_qmark, answer_len, question_len, len_ratio, same_author, rank
  std::array<double, 6> scalars;
  std::vector<double> category_onehot;
};

MetadataResult metadata_features(const Question& q, const Comment& c,
                                 const std::vector<std::string>& categories);

// Question-body centroid concatenated with the comment centroid (2*dim values).
std::vector<double> raw_vector_features(const Question& q, const Comment& c,
                                        const EmbeddingModel& emb);

// Concatenates exactly the schema's enabled groups in column order. Throws
// ConfigError when a required model is missing from the bundle.
FeatureVector assemble(const Question& q, const Comment& c,
                       const ModelBundle& models, const FeatureSchema& schema);

std::vector<double> to_dense(const FeatureVector& fv, const FeatureSchema& schema);

struct ScalerParams {
  std::vector<double> min;
  std::vector<double> max;
};

// Per-column min-max parameters learned on training rows only.
ScalerParams fit_scaler(const std::vector<std::vector<double>>& rows);

// Values are clamped to [0,1]; constant columns map to 0.
std::vector<double> apply_scaler(const ScalerParams& params,
                                 const std::vector<double>& row);

// The 12-tag universal POS set used as the default tagset.
const std::vector<std::string>& universal_tagset();

// Collapse a fine-grained (Penn-style) tag to the universal set; returns ""
// for unmapped tags. Tags already in the universal set map to themselves.
std::string map_pos_tag(const std::string& tag);

// Feature matrix CSV: "thread_id,comment_id,label,<feature names>"; one row
// per question-comment pair in dataset order.
struct FeatureMatrix {
  std::vector<std::string> thread_ids;
  std::vector<std::string> comment_ids;
  std::vector<std::optional<Label>> labels;
  std::vector<std::vector<double>> rows;
};

void save_feature_matrix(const std::string& path, const FeatureMatrix& matrix,
                         const FeatureSchema& schema);
FeatureMatrix load_feature_matrix(const std::string& path,
                                  const FeatureSchema& schema);

}  // namespace cqa
