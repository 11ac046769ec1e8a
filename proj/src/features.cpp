#include "cqa/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cqa/errors.hpp"

namespace cqa {

const char* feature_group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::QuestionToComment: return "QuestionToComment";
    case FeatureGroup::Maximized: return "Maximized";
    case FeatureGroup::Aligned: return "Aligned";
    case FeatureGroup::PosSim: return "PosSim";
    case FeatureGroup::WordClusters: return "WordClusters";
    case FeatureGroup::LdaSim: return "LdaSim";
    case FeatureGroup::Metadata: return "Metadata";
    case FeatureGroup::MetaCategories: return "MetaCategories";
    case FeatureGroup::RawVectors: return "RawVectors";
  }
  return "?";
}

FeatureGroup parse_feature_group(const std::string& name) {
  for (FeatureGroup g : all_feature_groups())
    if (name == feature_group_name(g)) return g;
  throw ConfigError("unknown feature group: " + name);
}

const std::vector<FeatureGroup>& all_feature_groups() {
  static const std::vector<FeatureGroup> groups = {
      FeatureGroup::QuestionToComment, FeatureGroup::Maximized,
      FeatureGroup::Aligned,           FeatureGroup::PosSim,
      FeatureGroup::WordClusters,      FeatureGroup::LdaSim,
      FeatureGroup::Metadata,          FeatureGroup::MetaCategories,
      FeatureGroup::RawVectors};
  return groups;
}

std::set<FeatureGroup> preset_groups(const std::string& name) {
  std::set<FeatureGroup> groups(all_feature_groups().begin(),
                                all_feature_groups().end());
  if (name == "all") return groups;
  if (name == "primary-submission") {
    groups.erase(FeatureGroup::PosSim);
    groups.erase(FeatureGroup::MetaCategories);
    return groups;
  }
  throw ConfigError("unknown feature preset: " + name);
}

// ---------------------------------------------------------------------------
// Schema

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

FeatureSchema build_schema(const std::set<FeatureGroup>& enabled, int emb_dim,
                           const std::vector<std::string>& tagset,
                           const std::vector<std::string>& categories) {
  if (enabled.empty()) throw ConfigError("no feature groups enabled");
  if (enabled.count(FeatureGroup::RawVectors) && emb_dim <= 0)
    throw ConfigError("RawVectors group needs a positive embedding dim");

  FeatureSchema schema;
  schema.groups = enabled;
  schema.tagset = tagset;
  schema.categories = categories;
  schema.emb_dim = emb_dim;

  auto add = [&](FeatureGroup g, std::string name) {
    schema.columns.emplace_back(g, std::move(name));
  };
  for (FeatureGroup g : all_feature_groups()) {
    if (!enabled.count(g)) continue;
    switch (g) {
      case FeatureGroup::QuestionToComment:
        add(g, "qc_body_sim");
        add(g, "qc_subject_sim");
        break;
      case FeatureGroup::Maximized:
        add(g, "max_sim_top1");
        add(g, "max_sim_top2");
        add(g, "max_sim_top3");
        add(g, "max_sim_top5");
        break;
      case FeatureGroup::Aligned:
        add(g, "aligned_sim");
        break;
      case FeatureGroup::PosSim:
        for (const auto& tag : tagset) add(g, "pos_sim_" + tag);
        break;
      case FeatureGroup::WordClusters:
        add(g, "cluster_sim");
        break;
      case FeatureGroup::LdaSim:
        add(g, "lda_sim");
        break;
      case FeatureGroup::Metadata:
        add(g, "has_qmark");
        add(g, "answer_len");
        add(g, "question_len");
        add(g, "len_ratio");
        add(g, "same_author");
        add(g, "rank");
        break;
      case FeatureGroup::MetaCategories:
        for (size_t i = 0; i < categories.size(); ++i)
          add(g, "category_" + std::to_string(i) + "_" + sanitize(categories[i]));
        break;
      case FeatureGroup::RawVectors:
        for (int i = 0; i < emb_dim; ++i) add(g, "q_vec_" + std::to_string(i));
        for (int i = 0; i < emb_dim; ++i) add(g, "c_vec_" + std::to_string(i));
        break;
    }
  }
  return schema;
}

uint64_t FeatureSchema::hash() const {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0x1f;
    h *= 1099511628211ull;
  };
  for (const auto& [group, name] : columns) {
    mix(feature_group_name(group));
    mix(name);
  }
  return h;
}

void save_schema(const std::string& path, const FeatureSchema& schema) {
  nlohmann::ordered_json j;
  j["groups"] = nlohmann::ordered_json::array();
  for (FeatureGroup g : all_feature_groups())
    if (schema.groups.count(g)) j["groups"].push_back(feature_group_name(g));
  j["tagset"] = schema.tagset;
  j["categories"] = schema.categories;
  j["emb_dim"] = schema.emb_dim;
  j["hash"] = schema.hash();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema: " + path);
  out << j.dump(2) << '\n';
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("bad schema json in " + path + ": " + e.what());
  }
  try {
    std::set<FeatureGroup> enabled;
    for (const auto& g : j.at("groups"))
      enabled.insert(parse_feature_group(g.get<std::string>()));
    FeatureSchema schema = build_schema(
        enabled, j.at("emb_dim").get<int>(),
        j.at("tagset").get<std::vector<std::string>>(),
        j.at("categories").get<std::vector<std::string>>());
    if (j.contains("hash") && j["hash"].get<uint64_t>() != schema.hash())
      throw FormatError("schema hash mismatch in " + path);
    return schema;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad schema json in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Individual feature families

std::array<double, 2> qc_similarity(const Question& q, const Comment& c,
                                    const EmbeddingModel& emb) {
  const CentroidResult body = centroid(emb, q.body_tokens);
  const CentroidResult subject = centroid(emb, q.subject_tokens);
  const CentroidResult comment = centroid(emb, c.tokens);
  return {cosine_similarity(body.v, comment.v),
          cosine_similarity(subject.v, comment.v)};
}

std::vector<double> maximized_similarity(const std::vector<float>& q_body_centroid,
                                         const std::vector<std::string>& c_tokens,
                                         const EmbeddingModel& emb,
                                         const std::vector<int>& n_values) {
  std::vector<double> sims;
  for (const auto& tok : c_tokens) {
    const float* v = emb.vector_for(tok);
    if (!v) continue;
    std::vector<float> vv(v, v + emb.dim);
    sims.push_back(cosine_similarity(vv, q_body_centroid));
  }
  std::sort(sims.begin(), sims.end(), std::greater<double>());
  std::vector<double> out;
  out.reserve(n_values.size());
  for (int n : n_values) {
    if (sims.empty()) {
      out.push_back(0.0);
      continue;
    }
    const size_t take = std::min<size_t>(static_cast<size_t>(n), sims.size());
    double sum = 0.0;
    for (size_t i = 0; i < take; ++i) sum += sims[i];
    out.push_back(sum / static_cast<double>(take));
  }
  return out;
}

double aligned_similarity(const std::vector<std::string>& q_tokens,
                          const std::vector<std::string>& c_tokens,
                          const EmbeddingModel& emb) {
  std::vector<const float*> c_vecs;
  for (const auto& tok : c_tokens) {
    const float* v = emb.vector_for(tok);
    if (v) c_vecs.push_back(v);
  }
  if (c_vecs.empty()) return 0.0;

  struct Span {
    const float* p;
    size_t n;
    size_t size() const { return n; }
    float operator[](size_t i) const { return p[i]; }
  };
  double sum = 0.0;
  int q_count = 0;
  for (const auto& tok : q_tokens) {
    const float* qv = emb.vector_for(tok);
    if (!qv) continue;
    ++q_count;
    double best = -1.0;
    const Span qs{qv, static_cast<size_t>(emb.dim)};
    for (const float* cv : c_vecs) {
      const Span cs{cv, static_cast<size_t>(emb.dim)};
      best = std::max(best, cosine_similarity(qs, cs));
    }
    sum += best;
  }
  if (q_count == 0) return 0.0;
  return sum / q_count;
}

PosSimResult pos_similarity(const Question& q, const Comment& c,
                            const EmbeddingModel& emb,
                            const std::vector<std::string>& tagset) {
  PosSimResult result;
  result.values.assign(tagset.size(), 0.0);
  if (!q.body_pos_tags || !c.pos_tags) {
    result.missing = true;
    return result;
  }
  std::unordered_map<std::string, std::vector<std::string>> q_by_tag, c_by_tag;
  for (const auto& [word, tag] : *q.body_pos_tags) {
    const std::string mapped = map_pos_tag(tag);
    if (!mapped.empty()) q_by_tag[mapped].push_back(word);
  }
  for (const auto& [word, tag] : *c.pos_tags) {
    const std::string mapped = map_pos_tag(tag);
    if (!mapped.empty()) c_by_tag[mapped].push_back(word);
  }
  for (size_t t = 0; t < tagset.size(); ++t) {
    auto qi = q_by_tag.find(tagset[t]);
    auto ci = c_by_tag.find(tagset[t]);
    if (qi == q_by_tag.end() || ci == c_by_tag.end()) continue;
    const CentroidResult qc = centroid(emb, qi->second);
    const CentroidResult cc = centroid(emb, ci->second);
    result.values[t] = cosine_similarity(qc.v, cc.v);
  }
  return result;
}

MetadataResult metadata_features(const Question& q, const Comment& c,
                                 const std::vector<std::string>& categories) {
  MetadataResult result;
  const double answer_len = static_cast<double>(c.tokens.size());
  const double question_len = static_cast<double>(q.body_tokens.size());
  result.scalars[0] = c.raw_text.find('?') != std::string::npos ? 1.0 : 0.0;
  result.scalars[1] = answer_len;
  result.scalars[2] = question_len;
  result.scalars[3] = question_len / (answer_len + 1.0);
  result.scalars[4] = q.author_id == c.author_id ? 1.0 : 0.0;
  result.scalars[5] = static_cast<double>(c.rank_in_thread);
  result.category_onehot.assign(categories.size(), 0.0);
  for (size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == q.category) {
      result.category_onehot[i] = 1.0;
      break;
    }
  return result;
}

std::vector<double> raw_vector_features(const Question& q, const Comment& c,
                                        const EmbeddingModel& emb) {
  const CentroidResult qc = centroid(emb, q.body_tokens);
  const CentroidResult cc = centroid(emb, c.tokens);
  std::vector<double> out;
  out.reserve(2 * static_cast<size_t>(emb.dim));
  for (float x : qc.v) out.push_back(x);
  for (float x : cc.v) out.push_back(x);
  return out;
}

FeatureVector assemble(const Question& q, const Comment& c,
                       const ModelBundle& models, const FeatureSchema& schema) {
  const bool needs_emb = schema.groups.count(FeatureGroup::QuestionToComment) ||
                         schema.groups.count(FeatureGroup::Maximized) ||
                         schema.groups.count(FeatureGroup::Aligned) ||
                         schema.groups.count(FeatureGroup::PosSim) ||
                         schema.groups.count(FeatureGroup::RawVectors);
  if (needs_emb && !models.embeddings)
    throw ConfigError("feature extraction needs an embedding model");
  if (schema.groups.count(FeatureGroup::WordClusters) && !models.clusters)
    throw ConfigError("WordClusters group needs a cluster model");
  if (schema.groups.count(FeatureGroup::LdaSim) && !models.lda)
    throw ConfigError("LdaSim group needs an lda model");

  std::vector<double> dense;
  dense.reserve(schema.size());
  FeatureVector fv;
  fv.pos_tags_missing = !q.body_pos_tags || !c.pos_tags;

  for (FeatureGroup g : all_feature_groups()) {
    if (!schema.groups.count(g)) continue;
    switch (g) {
      case FeatureGroup::QuestionToComment: {
        const auto two = qc_similarity(q, c, *models.embeddings);
        dense.push_back(two[0]);
        dense.push_back(two[1]);
        break;
      }
      case FeatureGroup::Maximized: {
        const CentroidResult body = centroid(*models.embeddings, q.body_tokens);
        for (double v : maximized_similarity(body.v, c.tokens, *models.embeddings))
          dense.push_back(v);
        break;
      }
      case FeatureGroup::Aligned:
        dense.push_back(aligned_similarity(q.body_tokens, c.tokens, *models.embeddings));
        break;
      case FeatureGroup::PosSim: {
        const PosSimResult pos = pos_similarity(q, c, *models.embeddings, schema.tagset);
        for (double v : pos.values) dense.push_back(v);
        break;
      }
      case FeatureGroup::WordClusters:
        dense.push_back(cluster_similarity(cluster_bag(q.body_tokens, *models.clusters),
                                           cluster_bag(c.tokens, *models.clusters)));
        break;
      case FeatureGroup::LdaSim: {
        const TopicDistribution qd = infer_topics(*models.lda, q.body_tokens,
                                                  models.lda_infer_sweeps, models.seed);
        const TopicDistribution cd = infer_topics(*models.lda, c.tokens,
                                                  models.lda_infer_sweeps, models.seed);
        dense.push_back(topic_similarity(qd, cd));
        break;
      }
      case FeatureGroup::Metadata: {
        const MetadataResult meta = metadata_features(q, c, schema.categories);
        for (double v : meta.scalars) dense.push_back(v);
        break;
      }
      case FeatureGroup::MetaCategories: {
        const MetadataResult meta = metadata_features(q, c, schema.categories);
        for (double v : meta.category_onehot) dense.push_back(v);
        break;
      }
      case FeatureGroup::RawVectors:
        for (double v : raw_vector_features(q, c, *models.embeddings))
          dense.push_back(v);
        break;
    }
  }
  if (dense.size() != schema.size())
    throw IntegrityError("assembled feature count does not match the schema");
  fv.values.reserve(dense.size());
  for (size_t i = 0; i < dense.size(); ++i)
    fv.values.push_back(
        {schema.columns[i].first, schema.columns[i].second, dense[i]});
  return fv;
}

std::vector<double> to_dense(const FeatureVector& fv, const FeatureSchema& schema) {
  if (fv.values.size() != schema.size())
    throw IntegrityError("feature vector does not match the schema");
  std::vector<double> out;
  out.reserve(fv.values.size());
  for (const Feature& f : fv.values) out.push_back(f.value);
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

ScalerParams fit_scaler(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ConfigError("scaler: no training rows");
  const size_t cols = rows[0].size();
  ScalerParams params;
  params.min.assign(cols, std::numeric_limits<double>::max());
  params.max.assign(cols, std::numeric_limits<double>::lowest());
  for (const auto& row : rows) {
    if (row.size() != cols)
      throw IntegrityError("scaler: ragged feature matrix");
    for (size_t i = 0; i < cols; ++i) {
      params.min[i] = std::min(params.min[i], row[i]);
      params.max[i] = std::max(params.max[i], row[i]);
    }
  }
  return params;
}

std::vector<double> apply_scaler(const ScalerParams& params,
                                 const std::vector<double>& row) {
  if (row.size() != params.min.size())
    throw std::invalid_argument("apply_scaler: column count mismatch");
  std::vector<double> out(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    const double range = params.max[i] - params.min[i];
    if (range <= 0.0) {
      out[i] = 0.0;
      continue;
    }
    out[i] = std::clamp((row[i] - params.min[i]) / range, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// POS tagset

const std::vector<std::string>& universal_tagset() {
  static const std::vector<std::string> tags = {
      "VERB", "NOUN", "PRON", "ADJ", "ADV",  "ADP",
      "CONJ", "DET",  "NUM",  "PRT", "X",    "PUNCT"};
  return tags;
}

std::string map_pos_tag(const std::string& tag) {
  static const std::unordered_map<std::string, std::string> table = [] {
    std::unordered_map<std::string, std::string> m;
    for (const auto& t : universal_tagset()) m[t] = t;
    for (const char* t : {"NN", "NNS", "NNP", "NNPS"}) m[t] = "NOUN";
    for (const char* t : {"VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"}) m[t] = "VERB";
    for (const char* t : {"JJ", "JJR", "JJS"}) m[t] = "ADJ";
    for (const char* t : {"RB", "RBR", "RBS", "WRB"}) m[t] = "ADV";
    for (const char* t : {"PRP", "PRP$", "WP", "WP$"}) m[t] = "PRON";
    m["IN"] = "ADP";
    m["CC"] = "CONJ";
    for (const char* t : {"DT", "PDT", "WDT", "EX"}) m[t] = "DET";
    m["CD"] = "NUM";
    for (const char* t : {"RP", "TO", "POS"}) m[t] = "PRT";
    for (const char* t : {"FW", "LS", "SYM", "UH"}) m[t] = "X";
    for (const char* t : {".", ",", ":", "``", "''", "(", ")", "$", "#",
                          "-LRB-", "-RRB-"})
      m[t] = "PUNCT";
    return m;
  }();
  auto it = table.find(tag);
  return it == table.end() ? std::string() : it->second;
}

// ---------------------------------------------------------------------------
// Matrix io

void save_feature_matrix(const std::string& path, const FeatureMatrix& matrix,
                         const FeatureSchema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature matrix: " + path);
  out << "thread_id,comment_id,label";
  for (const auto& [group, name] : schema.columns) out << ',' << name;
  out << '\n';
  char buf[64];
  for (size_t r = 0; r < matrix.rows.size(); ++r) {
    if (matrix.rows[r].size() != schema.size())
      throw IntegrityError("feature matrix row does not match the schema");
    out << matrix.thread_ids[r] << ',' << matrix.comment_ids[r] << ',';
    if (matrix.labels[r]) out << label_name(*matrix.labels[r]);
    for (double v : matrix.rows[r]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

FeatureMatrix load_feature_matrix(const std::string& path,
                                  const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature matrix: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty feature matrix: " + path);

  std::string expected = "thread_id,comment_id,label";
  for (const auto& [group, name] : schema.columns) expected += "," + name;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw FormatError("feature matrix header does not match the schema in " + path);

  FeatureMatrix matrix;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != schema.size() + 3)
      throw FormatError("wrong column count on line " + std::to_string(line_no) +
                        " of " + path);
    matrix.thread_ids.push_back(fields[0]);
    matrix.comment_ids.push_back(fields[1]);
    if (fields[2].empty()) {
      matrix.labels.push_back(std::nullopt);
    } else {
      try {
        matrix.labels.push_back(parse_label(fields[2]));
      } catch (const FormatError&) {
        throw FormatError("bad label on line " + std::to_string(line_no) + " of " +
                          path);
      }
    }
    std::vector<double> row;
    row.reserve(schema.size());
    for (size_t i = 3; i < fields.size(); ++i) {
      try {
        row.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw FormatError("bad numeric value on line " + std::to_string(line_no) +
                          " of " + path);
      }
    }
    matrix.rows.push_back(std::move(row));
  }
  return matrix;
}

}  // namespace cqa
