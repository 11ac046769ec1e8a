#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cqa {

enum class Label { Good, PotentiallyUseful, Bad };

const char* label_name(Label label);
Label parse_label(const std::string& name);  // throws FormatError on unknown name

// Ranking treats Good as relevant and merges the other two.
inline bool is_good(Label label) { return label == Label::Good; }

struct Comment {
  std::string id;
  std::string author_id;
  std::string raw_text;
  std::vector<std::string> tokens;  // filled by preprocessing
  // (token, tag) pairs; kept only for tokens that survive preprocessing
  std::optional<std::vector<std::pair<std::string, std::string>>> pos_tags;
  int rank_in_thread = 1;
  std::optional<Label> gold_label;
};

struct Question {
  std::string id;
  std::string author_id;
  std::string subject_raw;
  std::string body_raw;
  std::vector<std::string> subject_tokens;
  std::vector<std::string> body_tokens;
  std::optional<std::vector<std::pair<std::string, std::string>>> body_pos_tags;
  std::string category;
};

struct Thread {
  Question question;
  std::vector<Comment> comments;  // ordered by rank_in_thread ascending
};

// One original question plus the threads a search engine returned for it.
struct RelatedEntry {
  Thread thread;
  int search_rank = 1;  // 1..10, unique within a set
  std::map<std::string, Label> labels;  // comment id -> label vs the original
};

struct RelatedQuestionSet {
  Question original_question;
  std::vector<RelatedEntry> related;
};

struct TokenizerConfig {
  // Canonical replacements; all survive the alphabetic tokenizer intact.
  std::string url_token = "TOKEN_URL";
  std::string num_token = "TOKEN_NUM";
  std::string img_token = "TOKEN_IMG";
  std::string emo_token = "TOKEN_EMO";
  std::unordered_set<std::string> stopword_set;
};

// Four fixed stages: (1) replace URLs, numbers, images and emoticons by their
// canonical tokens, (2) extract maximal [A-Za-z_] runs, (3) lowercase,
// (4) drop stopwords. Deterministic; empty input yields an empty list.
std::vector<std::string> preprocess(const std::string& raw,
                                    const TokenizerConfig& config);

// One word per line; entries lowercased, duplicates collapsed, blanks skipped.
std::unordered_set<std::string> load_stopwords(const std::string& path);

// The bundled 127-word English list.
const std::vector<std::string>& default_stopwords();
TokenizerConfig default_tokenizer_config();

// JSONL ingestion, one thread (or related-question set) per line.
std::vector<Thread> load_subtask_a(const std::string& path);
std::vector<RelatedQuestionSet> load_subtask_c(const std::string& path);

// Canonical serialization; load followed by save round-trips byte-identically
// for files already in canonical form.
void save_subtask_a(const std::string& path, const std::vector<Thread>& threads);
void save_subtask_c(const std::string& path,
                    const std::vector<RelatedQuestionSet>& sets);

// Fill token fields (and filter pos_tags down to surviving tokens).
void preprocess_thread(Thread& thread, const TokenizerConfig& config);
// Token corpus file: one sentence per line, tokens separated by single spaces.
std::vector<std::vector<std::string>> load_token_corpus(const std::string& path);
void save_token_corpus(const std::string& path,
                       const std::vector<std::vector<std::string>>& corpus);

void preprocess_dataset(std::vector<Thread>& threads, const TokenizerConfig& config);
void preprocess_dataset(std::vector<RelatedQuestionSet>& sets,
                        const TokenizerConfig& config);

}  // namespace cqa
