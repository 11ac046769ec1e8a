#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cqa/corpus.hpp"
#include "cqa/features.hpp"

namespace cqa {

struct ScoredComment {
  std::string comment_id;
  double probability = 0.0;
  std::optional<Label> gold_label;
  int rank_in_thread = 1;  // tie-break key
};

struct RankedComment {
  std::string comment_id;
  double score = 0.0;
  bool predicted_good = false;
  std::optional<Label> gold_label;
  int original_rank = 1;
};

struct RankedThread {
  std::string thread_id;
  std::vector<RankedComment> entries;  // scores non-increasing
};

// Descending score; ties keep the original thread order (rank ascending).
RankedThread rank_thread(const std::string& thread_id,
                         std::vector<ScoredComment> comments,
                         double threshold = 0.5);

// prob_good * 1/search_rank; throws std::invalid_argument when rank < 1.
double subtask_c_score(double prob_good, int search_rank);

// The combination of classifier probability and search reciprocal rank is
// pluggable; the product above is the default.
using SubtaskCCombiner = std::function<double(double prob_good, int search_rank)>;
SubtaskCCombiner product_combiner();
SubtaskCCombiner weighted_sum_combiner(double rank_weight);

// Mean average precision with Good as the sole relevant label. Queries with no
// Good comment are excluded from the mean unless include_empty is set (they
// then count as AP 0). A missing gold label raises IntegrityError.
double map_score(const std::vector<RankedThread>& ranked,
                 bool include_empty = false);

// Fraction of matching Good/not-Good decisions; throws on empty input.
double accuracy_score(const std::vector<bool>& predicted_good,
                      const std::vector<bool>& gold_good);

struct EvalReport {
  double map = 0.0;
  double accuracy = 0.0;
  std::vector<std::pair<std::string, double>> per_query_ap;
};

EvalReport evaluate(const std::vector<RankedThread>& ranked,
                    bool include_empty = false);

void save_report_json(const std::string& path, const EvalReport& report);

// One line per comment: query_id<TAB>comment_id<TAB>rank<TAB>score<TAB>label,
// rank 1-based, score with 6 decimals, label true/false for Good/not-Good.
void write_predictions(const std::string& path,
                       const std::vector<RankedThread>& ranked);
std::vector<RankedThread> read_predictions(const std::string& path);

struct AblationRow {
  std::set<FeatureGroup> removed;  // empty set = the "All" row
  double map = 0.0;
  double accuracy = 0.0;
};

std::string removal_label(const std::set<FeatureGroup>& removed);

// Plain-text table, one row per removal set, sorted by MAP descending.
std::string format_ablation_table(std::vector<AblationRow> rows);

}  // namespace cqa
