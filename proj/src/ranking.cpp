#include "cqa/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cqa/errors.hpp"

namespace cqa {

RankedThread rank_thread(const std::string& thread_id,
                         std::vector<ScoredComment> comments, double threshold) {
  std::stable_sort(comments.begin(), comments.end(),
                   [](const ScoredComment& a, const ScoredComment& b) {
                     if (a.probability != b.probability)
                       return a.probability > b.probability;
                     return a.rank_in_thread < b.rank_in_thread;
                   });
  RankedThread ranked;
  ranked.thread_id = thread_id;
  ranked.entries.reserve(comments.size());
  for (const ScoredComment& c : comments)
    ranked.entries.push_back({c.comment_id, c.probability,
                              c.probability >= threshold, c.gold_label,
                              c.rank_in_thread});
  return ranked;
}

double subtask_c_score(double prob_good, int search_rank) {
  if (search_rank < 1)
    throw std::invalid_argument("subtask_c_score: search_rank must be >= 1");
  return prob_good / static_cast<double>(search_rank);
}

SubtaskCCombiner product_combiner() {
  return [](double prob_good, int search_rank) {
    return subtask_c_score(prob_good, search_rank);
  };
}

SubtaskCCombiner weighted_sum_combiner(double rank_weight) {
  return [rank_weight](double prob_good, int search_rank) {
    if (search_rank < 1)
      throw std::invalid_argument("subtask_c_score: search_rank must be >= 1");
    return (1.0 - rank_weight) * prob_good +
           rank_weight / static_cast<double>(search_rank);
  };
}

namespace {

// Average precision of one ranked list with Good as the relevant class;
// returns -1 when the list has no relevant item.
double average_precision(const RankedThread& thread) {
  int relevant_seen = 0;
  double ap_sum = 0.0;
  int position = 0;
  for (const RankedComment& entry : thread.entries) {
    ++position;
    if (!entry.gold_label)
      throw IntegrityError("comment " + entry.comment_id + " in thread " +
                           thread.thread_id + " has no gold label");
    if (*entry.gold_label == Label::Good) {
      ++relevant_seen;
      ap_sum += static_cast<double>(relevant_seen) / position;
    }
  }
  if (relevant_seen == 0) return -1.0;
  return ap_sum / relevant_seen;
}

}  // namespace

double map_score(const std::vector<RankedThread>& ranked, bool include_empty) {
  double total = 0.0;
  int counted = 0;
  for (const RankedThread& thread : ranked) {
    const double ap = average_precision(thread);
    if (ap < 0.0) {
      if (include_empty) ++counted;  // contributes 0
      continue;
    }
    total += ap;
    ++counted;
  }
  if (counted == 0) return 0.0;
  return total / counted;
}

double accuracy_score(const std::vector<bool>& predicted_good,
                      const std::vector<bool>& gold_good) {
  if (predicted_good.empty())
    throw IntegrityError("accuracy over an empty set is undefined");
  if (predicted_good.size() != gold_good.size())
    throw IntegrityError("prediction and gold label counts differ");
  size_t correct = 0;
  for (size_t i = 0; i < predicted_good.size(); ++i)
    if (predicted_good[i] == gold_good[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predicted_good.size());
}

EvalReport evaluate(const std::vector<RankedThread>& ranked, bool include_empty) {
  EvalReport report;
  std::vector<bool> pred, gold;
  for (const RankedThread& thread : ranked) {
    const double ap = average_precision(thread);
    if (ap >= 0.0 || include_empty)
      report.per_query_ap.emplace_back(thread.thread_id, ap < 0.0 ? 0.0 : ap);
    for (const RankedComment& entry : thread.entries) {
      pred.push_back(entry.predicted_good);
      gold.push_back(entry.gold_label && *entry.gold_label == Label::Good);
    }
  }
  report.map = map_score(ranked, include_empty);
  report.accuracy = pred.empty() ? 0.0 : accuracy_score(pred, gold);
  return report;
}

void save_report_json(const std::string& path, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  j["acc"] = report.accuracy;
  j["per_query"] = nlohmann::ordered_json::array();
  for (const auto& [id, ap] : report.per_query_ap)
    j["per_query"].push_back({{"query", id}, {"ap", ap}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << j.dump(2) << '\n';
}

void write_predictions(const std::string& path,
                       const std::vector<RankedThread>& ranked) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions: " + path);
  char buf[32];
  for (const RankedThread& thread : ranked) {
    int rank = 0;
    for (const RankedComment& entry : thread.entries) {
      ++rank;
      std::snprintf(buf, sizeof(buf), "%.6f", entry.score);
      out << thread.thread_id << '\t' << entry.comment_id << '\t' << rank << '\t'
          << buf << '\t' << (entry.predicted_good ? "true" : "false") << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<RankedThread> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions: " + path);
  std::vector<RankedThread> ranked;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string query, comment, label;
    int rank;
    double score;
    if (!(std::getline(ls, query, '\t'))) query.clear();
    std::string rank_s, score_s;
    if (query.empty() || !std::getline(ls, comment, '\t') ||
        !std::getline(ls, rank_s, '\t') || !std::getline(ls, score_s, '\t') ||
        !std::getline(ls, label))
      throw FormatError("bad prediction line " + std::to_string(line_no) + " in " +
                        path);
    try {
      rank = std::stoi(rank_s);
      score = std::stod(score_s);
    } catch (const std::exception&) {
      throw FormatError("bad prediction line " + std::to_string(line_no) + " in " +
                        path);
    }
    if (label != "true" && label != "false")
      throw FormatError("bad prediction label on line " + std::to_string(line_no) +
                        " in " + path);
    if (ranked.empty() || ranked.back().thread_id != query) {
      ranked.push_back({query, {}});
      if (rank != 1)
        throw FormatError("ranks must restart at 1 on line " +
                          std::to_string(line_no) + " in " + path);
    } else if (rank != static_cast<int>(ranked.back().entries.size()) + 1) {
      throw FormatError("non-consecutive rank on line " + std::to_string(line_no) +
                        " in " + path);
    }
    ranked.back().entries.push_back(
        {comment, score, label == "true", std::nullopt, rank});
  }
  return ranked;
}

std::string removal_label(const std::set<FeatureGroup>& removed) {
  if (removed.empty()) return "All";
  std::string label = "All - ";
  bool first = true;
  for (FeatureGroup g : all_feature_groups()) {
    if (!removed.count(g)) continue;
    if (!first) label += " & ";
    label += feature_group_name(g);
    first = false;
  }
  return label;
}

std::string format_ablation_table(std::vector<AblationRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const AblationRow& a, const AblationRow& b) {
                     return a.map > b.map;
                   });
  size_t width = std::string("Features").size();
  for (const AblationRow& row : rows)
    width = std::max(width, removal_label(row.removed).size());

  std::ostringstream out;
  char buf[32];
  out << "Features";
  out << std::string(width - 8, ' ') << "  ";
  out << "   MAP    Acc\n";
  for (const AblationRow& row : rows) {
    const std::string label = removal_label(row.removed);
    out << label << std::string(width - label.size(), ' ') << "  ";
    std::snprintf(buf, sizeof(buf), "%6.2f", row.map * 100.0);
    out << buf << ' ';
    std::snprintf(buf, sizeof(buf), "%6.2f", row.accuracy * 100.0);
    out << buf << '\n';
  }
  return out.str();
}

}  // namespace cqa
