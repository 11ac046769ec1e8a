#include <algorithm>
#include <cctype>
#include <cstdio>

#include "cqa/errors.hpp"
#include "cqa/pipeline.hpp"
#include "cqa/rng.hpp"

namespace cqa {

namespace {

// Two disjoint topic vocabularies plus shared filler words. Letter-only words
// so the preprocessing replacements never touch them.
std::string make_word(const char* prefix, int i) {
  std::string w(prefix);
  w += static_cast<char>('a' + i / 26);
  w += static_cast<char>('a' + i % 26);
  return w;
}

struct SynthVocab {
  std::vector<std::string> topic_a, topic_b, common;
  SynthVocab() {
    for (int i = 0; i < 40; ++i) topic_a.push_back(make_word("alp", i));
    for (int i = 0; i < 40; ++i) topic_b.push_back(make_word("bet", i));
    for (int i = 0; i < 30; ++i) common.push_back(make_word("com", i));
  }
};

const SynthVocab& synth_vocab() {
  static const SynthVocab v;
  return v;
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[rng.below(pool.size())];
}

// n tokens: p_topic from `topic`, p_other from `other`, the rest filler.
std::vector<std::string> mix_tokens(int n, double p_topic, double p_other,
                                    const std::vector<std::string>& topic,
                                    const std::vector<std::string>& other,
                                    Rng& rng) {
  const auto& vocab = synth_vocab();
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < p_topic)
      out.push_back(pick(topic, rng));
    else if (u < p_topic + p_other)
      out.push_back(pick(other, rng));
    else
      out.push_back(pick(vocab.common, rng));
  }
  return out;
}

std::string join_raw(const std::vector<std::string>& tokens, bool qmark, Rng& rng) {
  std::string raw;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) raw += ' ';
    raw += tokens[i];
  }
  if (!raw.empty() && rng.uniform() < 0.5)
    raw[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[0])));
  if (qmark) raw += " ?";
  return raw;
}

std::vector<std::pair<std::string, std::string>> fake_pos(
    const std::vector<std::string>& tokens) {
  static const char* tags[] = {"NN", "VB", "JJ"};
  std::vector<std::pair<std::string, std::string>> pos;
  pos.reserve(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    pos.emplace_back(tokens[i], tags[i % 3]);
  return pos;
}

std::string pad_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

struct CommentRecipe {
  Label label;
  std::vector<std::string> tokens;
  bool qmark;
};

// Centroid mode: the label decides the topic share of the comment's words,
// everything else is label-neutral. A small fraction of comments is "hard"
// (drawn from the other label's mixture) so no feature set ranks perfectly.
CommentRecipe centroid_comment(Label label, const std::vector<std::string>& topic,
                               const std::vector<std::string>& other, Rng& rng) {
  CommentRecipe rec;
  rec.label = label;
  const bool hard = rng.uniform() < 0.05;
  const bool like_good = is_good(label) != hard;
  const double jitter = (rng.uniform() - 0.5) * 0.12;
  const int n = 6 + static_cast<int>(rng.below(7));  // 6..12
  if (like_good)
    rec.tokens = mix_tokens(n, 0.75 + jitter, 0.05, topic, other, rng);
  else
    rec.tokens = mix_tokens(n, 0.22 + jitter, 0.50, topic, other, rng);
  rec.qmark = rng.uniform() < 0.2;
  return rec;
}

// Metadata mode: all text is drawn from one label-neutral mixture; the label
// shows up only in length, question marks and (via the caller) thread rank.
CommentRecipe metadata_comment(Label label, const std::vector<std::string>& topic,
                               const std::vector<std::string>& other, Rng& rng) {
  CommentRecipe rec;
  rec.label = label;
  const int n = is_good(label) ? 11 + static_cast<int>(rng.below(6))
                               : 3 + static_cast<int>(rng.below(5));
  rec.tokens = mix_tokens(n, 0.40, 0.40, topic, other, rng);
  rec.qmark = rng.uniform() < (is_good(label) ? 0.05 : 0.75);
  return rec;
}

Label draw_label(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.42) return Label::Good;
  if (u < 0.56) return Label::PotentiallyUseful;
  return Label::Bad;
}

Thread make_thread(const std::string& id, bool topic_is_a,
                   const SynthConfig& config, Rng& rng) {
  static const std::vector<std::string> categories = {"travel", "housing",
                                                      "jobs", "food"};
  const auto& vocab = synth_vocab();
  const auto& topic = topic_is_a ? vocab.topic_a : vocab.topic_b;
  const auto& other = topic_is_a ? vocab.topic_b : vocab.topic_a;
  const bool metadata_mode = config.signal == "metadata";

  Thread t;
  t.question.id = id;
  t.question.author_id = "user" + std::to_string(rng.below(30));
  t.question.category = categories[rng.below(categories.size())];
  const double q_topic_share = metadata_mode ? 0.40 : 0.80;
  const double q_other_share = metadata_mode ? 0.40 : 0.0;
  std::vector<std::string> subject =
      mix_tokens(3 + static_cast<int>(rng.below(3)), q_topic_share, q_other_share,
                 topic, other, rng);
  std::vector<std::string> body =
      mix_tokens(8 + static_cast<int>(rng.below(7)), q_topic_share, q_other_share,
                 topic, other, rng);
  t.question.subject_raw = join_raw(subject, false, rng);
  t.question.body_raw = join_raw(body, true, rng);
  if (config.with_pos) t.question.body_pos_tags = fake_pos(body);

  const int n_comments = 6 + static_cast<int>(rng.below(4));  // 6..9
  std::vector<Label> labels(n_comments);
  for (int i = 0; i < n_comments; ++i) {
    if (metadata_mode) {
      // earlier comments are more often Good: the rank signal
      const double p_good = std::max(0.15, 0.65 - 0.10 * i);
      labels[i] = rng.uniform() < p_good
                      ? Label::Good
                      : (rng.uniform() < 0.25 ? Label::PotentiallyUseful
                                              : Label::Bad);
    } else {
      labels[i] = draw_label(rng);
    }
  }
  // every thread keeps at least one Good and one not-Good comment
  if (std::none_of(labels.begin(), labels.end(), is_good))
    labels[rng.below(labels.size())] = Label::Good;
  if (std::all_of(labels.begin(), labels.end(), is_good))
    labels[rng.below(labels.size())] = Label::Bad;

  for (int i = 0; i < n_comments; ++i) {
    const CommentRecipe rec = metadata_mode
                                  ? metadata_comment(labels[i], topic, other, rng)
                                  : centroid_comment(labels[i], topic, other, rng);
    Comment c;
    c.id = id + "_c" + std::to_string(i + 1);
    c.author_id = rng.uniform() < 0.1 ? t.question.author_id
                                      : "user" + std::to_string(rng.below(30));
    c.raw_text = join_raw(rec.tokens, rec.qmark, rng);
    c.rank_in_thread = i + 1;
    c.gold_label = rec.label;
    if (config.with_pos) c.pos_tags = fake_pos(rec.tokens);
    t.comments.push_back(std::move(c));
  }
  return t;
}

}  // namespace

std::vector<Thread> synth_threads(const SynthConfig& config) {
  if (config.n_threads < 1) throw ConfigError("synth: n_threads must be >= 1");
  if (config.signal != "centroid" && config.signal != "metadata")
    throw ConfigError("synth: signal must be \"centroid\" or \"metadata\"");
  Rng rng(config.seed);
  std::vector<Thread> threads;
  threads.reserve(config.n_threads);
  for (int i = 0; i < config.n_threads; ++i)
    threads.push_back(make_thread(pad_id("q", i + 1), i % 2 == 0, config, rng));
  return threads;
}

std::vector<RelatedQuestionSet> synth_related(const SynthConfig& config) {
  if (config.n_threads < 1) throw ConfigError("synth: n_threads must be >= 1");
  if (config.related_per_question < 1)
    throw ConfigError("synth: related_per_question must be >= 1");
  Rng rng(config.seed + 99);
  const auto& vocab = synth_vocab();
  std::vector<RelatedQuestionSet> sets;
  sets.reserve(config.n_threads);
  for (int i = 0; i < config.n_threads; ++i) {
    const bool topic_is_a = i % 2 == 0;
    const auto& topic = topic_is_a ? vocab.topic_a : vocab.topic_b;
    const auto& other = topic_is_a ? vocab.topic_b : vocab.topic_a;

    RelatedQuestionSet set;
    const std::string oid = pad_id("o", i + 1);
    set.original_question.id = oid;
    set.original_question.author_id = "user" + std::to_string(rng.below(30));
    set.original_question.category = "travel";
    std::vector<std::string> subject =
        mix_tokens(3 + static_cast<int>(rng.below(3)), 0.80, 0.0, topic, other, rng);
    std::vector<std::string> body =
        mix_tokens(8 + static_cast<int>(rng.below(7)), 0.80, 0.0, topic, other, rng);
    set.original_question.subject_raw = join_raw(subject, false, rng);
    set.original_question.body_raw = join_raw(body, true, rng);
    if (config.with_pos) set.original_question.body_pos_tags = fake_pos(body);

    for (int r = 0; r < config.related_per_question; ++r) {
      // related questions found at later search ranks drift off topic
      const double p_same = std::max(0.2, 0.85 - 0.15 * r);
      const bool same_topic = rng.uniform() < p_same;
      RelatedEntry entry;
      entry.search_rank = r + 1;
      entry.thread = make_thread(oid + "_r" + std::to_string(r + 1),
                                 same_topic == topic_is_a, config, rng);
      for (const Comment& c : entry.thread.comments) {
        const bool relevant = same_topic && c.gold_label && is_good(*c.gold_label);
        entry.labels[c.id] = relevant ? Label::Good : Label::Bad;
      }
      set.related.push_back(std::move(entry));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<std::string> synth_unannotated(const SynthConfig& config) {
  Rng rng(config.seed + 7);
  const auto& vocab = synth_vocab();
  std::vector<std::string> sentences;
  sentences.reserve(config.unannotated_sentences);
  for (int i = 0; i < config.unannotated_sentences; ++i) {
    const double u = rng.uniform();
    std::vector<std::string> tokens;
    const int n = 8 + static_cast<int>(rng.below(5));
    if (u < 0.4)
      tokens = mix_tokens(n, 0.80, 0.0, vocab.topic_a, vocab.topic_b, rng);
    else if (u < 0.8)
      tokens = mix_tokens(n, 0.80, 0.0, vocab.topic_b, vocab.topic_a, rng);
    else
      tokens = mix_tokens(n, 0.0, 0.0, vocab.topic_a, vocab.topic_b, rng);
    std::string line;
    for (size_t k = 0; k < tokens.size(); ++k) {
      if (k) line += ' ';
      line += tokens[k];
    }
    sentences.push_back(std::move(line));
  }
  return sentences;
}

}  // namespace cqa
