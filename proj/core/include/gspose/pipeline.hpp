#pragma once

#include <cstddef>
#include <vector>

#include "gspose/anomaly.hpp"
#include "gspose/metrics.hpp"
#include "gspose/pose.hpp"
#include "gspose/synth.hpp"

namespace gspose {

struct DetectConfig {
  RefineConfig refine;
  AnomalyConfig anomaly;

  void validate() const;
};

struct QueryResult {
  std::size_t coarse_index = 0;
  PoseEstimate pose;
  AnomalyResult anomaly;
  double seconds = 0.0;  // wall clock for coarse match, refinement and scoring
};

/// Coarse match, pose refinement, aligned render and anomaly scoring for a
/// single query. `matcher` must already be prepared on `train`.
QueryResult process_query(const ImageBuffer& query, const std::vector<View>& train,
                          const CoarseMatcher& matcher, const GaussianCloud& cloud, const DetectConfig& cfg);

/// process_query over every query, in parallel across queries. Errors are
/// rethrown with the failing query index prepended.
std::vector<QueryResult> process_queries(const std::vector<ImageBuffer>& queries, const std::vector<View>& train,
                                         const CoarseMatcher& matcher, const GaussianCloud& cloud,
                                         const DetectConfig& cfg);

/// Scores, maps, masks and pose errors of processed test views, ready for
/// evaluate_category. `results[i]` must belong to `tests[i]`.
EvalInput collect_eval_input(const std::string& category, const std::vector<QueryResult>& results,
                             const std::vector<TestView>& tests);

}  // namespace gspose
