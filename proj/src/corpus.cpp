#include "cqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cqa/errors.hpp"

namespace cqa {

const char* label_name(Label label) {
  switch (label) {
    case Label::Good: return "Good";
    case Label::PotentiallyUseful: return "PotentiallyUseful";
    case Label::Bad: return "Bad";
  }
  return "Bad";
}

Label parse_label(const std::string& name) {
  if (name == "Good") return Label::Good;
  if (name == "PotentiallyUseful") return Label::PotentiallyUseful;
  if (name == "Bad") return Label::Bad;
  throw FormatError("unknown label: " + name);
}

// ---------------------------------------------------------------------------
// Preprocessing

namespace {

// Fixed replacement patterns. URL: scheme- or www-prefixed non-space run.
// Number: digit run with optional decimal point. Image: markup img tag or a
// filename with a common image extension.
const std::regex& url_regex() {
  static const std::regex re(R"((?:[A-Za-z][A-Za-z0-9+.-]*://|www\.)\S+)");
  return re;
}

const std::regex& num_regex() {
  static const std::regex re(R"([0-9]+(?:\.[0-9]+)?)");
  return re;
}

const std::regex& img_regex() {
  static const std::regex re(R"((?:<img[^>]*>|\S+\.(?:jpg|jpeg|png|gif|bmp)(?![A-Za-z0-9])))",
                             std::regex::icase);
  return re;
}

// A fixed list of ASCII emoticons, longest first so that ":-)" wins over ":)".
// None of them is a pure lowercase [a-z_] run, which keeps the pipeline
// idempotent on its own output.
const std::vector<std::string>& emoticons() {
  static const std::vector<std::string> list = [] {
    std::vector<std::string> v = {
        ":-)", ":)",  ":-D", ":D", ":-(", ":(",  ";-)", ";)",  ":-P", ":P",
        ":-p", ":-O", ":O",  ":-o", ":-|", ":|", ":-/", ":/",  ":-\\", ":'(",
        ":'-(", "=)",  "=(",  "=D", "=P",  "8-)", "8)",  "B-)", "xD",  "XD",
        "<3",  "</3", ":-*", ":*", ";-P", ";P", ":-$", "^_^", "-_-", "T_T",
        "o_O", "O_o"};
    std::sort(v.begin(), v.end(), [](const std::string& a, const std::string& b) {
      return a.size() > b.size() || (a.size() == b.size() && a < b);
    });
    return v;
  }();
  return list;
}

std::string replace_regex(const std::string& text, const std::regex& re,
                          const std::string& token) {
  // Pad with spaces so replacements never merge with neighbouring letters.
  return std::regex_replace(text, re, " " + token + " ");
}

std::string replace_emoticons(const std::string& text, const std::string& token) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const auto& emo : emoticons()) {
      if (text.compare(i, emo.size(), emo) == 0) {
        out += ' ';
        out += token;
        out += ' ';
        i += emo.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += text[i++];
  }
  return out;
}

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

}  // namespace

std::vector<std::string> preprocess(const std::string& raw,
                                    const TokenizerConfig& config) {
  // Stage 1: canonical token replacement, URL -> number -> image -> emoticon.
  std::string text = replace_regex(raw, url_regex(), config.url_token);
  text = replace_regex(text, num_regex(), config.num_token);
  text = replace_regex(text, img_regex(), config.img_token);
  text = replace_emoticons(text, config.emo_token);

  // Stage 2: maximal [A-Za-z_] runs; stage 3: lowercase; stage 4: stopwords.
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    if (!is_token_char(text[i])) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < text.size() && is_token_char(text[i])) ++i;
    std::string tok = text.substr(start, i - start);
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!config.stopword_set.count(tok)) tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    for (char& c : line) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    words.insert(line);
  }
  return words;
}

const std::vector<std::string>& default_stopwords() {
  // The standard 127-word English list.
  static const std::vector<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
      "your", "yours", "yourself", "yourselves", "he", "him", "his",
      "himself", "she", "her", "hers", "herself", "it", "its", "itself",
      "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are",
      "was", "were", "be", "been", "being", "have", "has", "had", "having",
      "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if",
      "or", "because", "as", "until", "while", "of", "at", "by", "for",
      "with", "about", "against", "between", "into", "through", "during",
      "before", "after", "above", "below", "to", "from", "up", "down", "in",
      "out", "on", "off", "over", "under", "again", "further", "then",
      "once", "here", "there", "when", "where", "why", "how", "all", "any",
      "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s",
      "t", "can", "will", "just", "don", "should", "now"};
  return words;
}

TokenizerConfig default_tokenizer_config() {
  TokenizerConfig config;
  const auto& words = default_stopwords();
  config.stopword_set.insert(words.begin(), words.end());
  return config;
}

// ---------------------------------------------------------------------------
// JSONL ingestion and canonical serialization

namespace {

using json = nlohmann::ordered_json;

const json& require_field(const json& obj, const char* key, long line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw SchemaError(std::string("missing required field '") + key + "'", line);
  return *it;
}

std::optional<std::vector<std::pair<std::string, std::string>>> parse_pos(
    const json& obj, long line) {
  auto it = obj.find("pos");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw SchemaError("'pos' must be an array of pairs", line);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : *it) {
    if (!p.is_array() || p.size() != 2)
      throw SchemaError("'pos' entry must be a [word, tag] pair", line);
    pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
  return pairs;
}

Comment parse_comment(const json& obj, long line) {
  Comment c;
  c.id = require_field(obj, "cid", line).get<std::string>();
  c.author_id = require_field(obj, "author", line).get<std::string>();
  c.raw_text = require_field(obj, "text", line).get<std::string>();
  const json& rank = require_field(obj, "rank", line);
  if (!rank.is_number_integer() || rank.get<int>() < 1)
    throw SchemaError("comment 'rank' must be an integer >= 1", line);
  c.rank_in_thread = rank.get<int>();
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    try {
      c.gold_label = parse_label(it->get<std::string>());
    } catch (const FormatError& e) {
      throw SchemaError(e.what(), line);
    }
  }
  c.pos_tags = parse_pos(obj, line);
  return c;
}

Question parse_question(const json& obj, long line) {
  Question q;
  q.id = require_field(obj, "qid", line).get<std::string>();
  q.author_id = require_field(obj, "qauthor", line).get<std::string>();
  q.subject_raw = require_field(obj, "subject", line).get<std::string>();
  q.body_raw = require_field(obj, "body", line).get<std::string>();
  q.category = require_field(obj, "category", line).get<std::string>();
  if (q.category.empty())
    throw SchemaError("'category' must be a non-empty string", line);
  q.body_pos_tags = parse_pos(obj, line);
  return q;
}

Thread parse_thread(const json& obj, long line) {
  Thread t;
  t.question = parse_question(obj, line);
  const json& comments = require_field(obj, "comments", line);
  if (!comments.is_array()) throw SchemaError("'comments' must be an array", line);
  std::unordered_set<std::string> seen_ids;
  for (const auto& c : comments) {
    Comment parsed = parse_comment(c, line);
    if (!seen_ids.insert(parsed.id).second)
      throw IntegrityError("duplicate comment id '" + parsed.id + "' in thread " +
                           t.question.id);
    t.comments.push_back(std::move(parsed));
  }
  // Ranks must be exactly 1..n; normalize storage order to rank ascending.
  std::sort(t.comments.begin(), t.comments.end(),
            [](const Comment& a, const Comment& b) {
              return a.rank_in_thread < b.rank_in_thread;
            });
  for (size_t i = 0; i < t.comments.size(); ++i) {
    if (t.comments[i].rank_in_thread != static_cast<int>(i) + 1)
      throw IntegrityError("thread " + t.question.id +
                           ": comment ranks are not exactly 1..n");
  }
  return t;
}

json pos_to_json(const std::vector<std::pair<std::string, std::string>>& pos) {
  json arr = json::array();
  for (const auto& [word, tag] : pos) arr.push_back(json::array({word, tag}));
  return arr;
}

json comment_to_json(const Comment& c) {
  json obj;
  obj["cid"] = c.id;
  obj["author"] = c.author_id;
  obj["text"] = c.raw_text;
  obj["rank"] = c.rank_in_thread;
  if (c.gold_label) obj["label"] = label_name(*c.gold_label);
  if (c.pos_tags) obj["pos"] = pos_to_json(*c.pos_tags);
  return obj;
}

void question_to_json(json& obj, const Question& q) {
  obj["qid"] = q.id;
  obj["qauthor"] = q.author_id;
  obj["subject"] = q.subject_raw;
  obj["body"] = q.body_raw;
  obj["category"] = q.category;
  if (q.body_pos_tags) obj["pos"] = pos_to_json(*q.body_pos_tags);
}

json thread_to_json(const Thread& t) {
  json obj;
  question_to_json(obj, t.question);
  json comments = json::array();
  for (const Comment& c : t.comments) comments.push_back(comment_to_json(c));
  obj["comments"] = std::move(comments);
  return obj;
}

json parse_line(const std::string& line, long line_no) {
  try {
    return json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), line_no);
  }
}

bool blank_line(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::vector<Thread> load_subtask_a(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Thread> threads;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_line(line)) continue;
    threads.push_back(parse_thread(parse_line(line, line_no), line_no));
  }
  return threads;
}

std::vector<RelatedQuestionSet> load_subtask_c(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<RelatedQuestionSet> sets;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_line(line)) continue;
    json obj = parse_line(line, line_no);
    RelatedQuestionSet set;
    set.original_question = parse_question(require_field(obj, "orig", line_no), line_no);
    const json& related = require_field(obj, "related", line_no);
    if (!related.is_array())
      throw SchemaError("'related' must be an array", line_no);
    std::unordered_set<int> seen_ranks;
    for (const auto& r : related) {
      RelatedEntry entry;
      entry.thread = parse_thread(require_field(r, "thread", line_no), line_no);
      const json& sr = require_field(r, "search_rank", line_no);
      if (!sr.is_number_integer() || sr.get<int>() < 1)
        throw SchemaError("'search_rank' must be an integer >= 1", line_no);
      entry.search_rank = sr.get<int>();
      if (!seen_ranks.insert(entry.search_rank).second)
        throw IntegrityError("set " + set.original_question.id +
                             ": duplicate search_rank " +
                             std::to_string(entry.search_rank));
      const json& labels = require_field(r, "labels", line_no);
      if (!labels.is_object())
        throw SchemaError("'labels' must be an object", line_no);
      for (auto it = labels.begin(); it != labels.end(); ++it) {
        try {
          entry.labels[it.key()] = parse_label(it.value().get<std::string>());
        } catch (const FormatError& e) {
          throw SchemaError(e.what(), line_no);
        }
      }
      // Labels-vs-original must cover every comment, nothing more.
      for (const Comment& c : entry.thread.comments) {
        if (!entry.labels.count(c.id))
          throw IntegrityError("set " + set.original_question.id +
                               ": missing label for comment " + c.id);
      }
      if (entry.labels.size() != entry.thread.comments.size())
        throw IntegrityError("set " + set.original_question.id +
                             ": labels reference unknown comment ids");
      set.related.push_back(std::move(entry));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void save_subtask_a(const std::string& path, const std::vector<Thread>& threads) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  for (const Thread& t : threads) out << thread_to_json(t).dump() << '\n';
}

void save_subtask_c(const std::string& path,
                    const std::vector<RelatedQuestionSet>& sets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  for (const RelatedQuestionSet& set : sets) {
    json obj;
    json orig;
    question_to_json(orig, set.original_question);
    obj["orig"] = std::move(orig);
    json related = json::array();
    for (const RelatedEntry& entry : set.related) {
      json r;
      r["thread"] = thread_to_json(entry.thread);
      r["search_rank"] = entry.search_rank;
      json labels;
      for (const auto& [cid, label] : entry.labels) labels[cid] = label_name(label);
      r["labels"] = std::move(labels);
      related.push_back(std::move(r));
    }
    obj["related"] = std::move(related);
    out << obj.dump() << '\n';
  }
}

std::vector<std::vector<std::string>> load_token_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> tokens;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(std::move(tok));
    corpus.push_back(std::move(tokens));
  }
  return corpus;
}

void save_token_corpus(const std::string& path,
                       const std::vector<std::vector<std::string>>& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus: " + path);
  for (const auto& sentence : corpus) {
    for (size_t i = 0; i < sentence.size(); ++i) {
      if (i) out << ' ';
      out << sentence[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Token filling

namespace {

// Keep only (token, tag) pairs whose lowercased word survived preprocessing.
std::optional<std::vector<std::pair<std::string, std::string>>> filter_pos(
    const std::optional<std::vector<std::pair<std::string, std::string>>>& pos,
    const std::vector<std::string>& tokens) {
  if (!pos) return std::nullopt;
  std::unordered_set<std::string> kept(tokens.begin(), tokens.end());
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [word, tag] : *pos) {
    std::string lower = word;
    for (char& ch : lower)
      ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (kept.count(lower)) out.emplace_back(lower, tag);
  }
  return out;
}

}  // namespace

void preprocess_thread(Thread& thread, const TokenizerConfig& config) {
  Question& q = thread.question;
  q.subject_tokens = preprocess(q.subject_raw, config);
  q.body_tokens = preprocess(q.body_raw, config);
  q.body_pos_tags = filter_pos(q.body_pos_tags, q.body_tokens);
  for (Comment& c : thread.comments) {
    c.tokens = preprocess(c.raw_text, config);
    c.pos_tags = filter_pos(c.pos_tags, c.tokens);
  }
}

void preprocess_dataset(std::vector<Thread>& threads, const TokenizerConfig& config) {
  for (Thread& t : threads) preprocess_thread(t, config);
}

void preprocess_dataset(std::vector<RelatedQuestionSet>& sets,
                        const TokenizerConfig& config) {
  for (RelatedQuestionSet& set : sets) {
    Question& q = set.original_question;
    q.subject_tokens = preprocess(q.subject_raw, config);
    q.body_tokens = preprocess(q.body_raw, config);
    q.body_pos_tags = filter_pos(q.body_pos_tags, q.body_tokens);
    for (RelatedEntry& entry : set.related) preprocess_thread(entry.thread, config);
  }
}

}  // namespace cqa
