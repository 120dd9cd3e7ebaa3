#include "gspose/pipeline.hpp"

#include <chrono>
#include <exception>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

void DetectConfig::validate() const {
  refine.validate();
  anomaly.validate();
}

QueryResult process_query(const ImageBuffer& query, const std::vector<View>& train,
                          const CoarseMatcher& matcher, const GaussianCloud& cloud, const DetectConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  QueryResult out;
  const CoarsePose coarse = coarse_pose(query, train, matcher);
  out.coarse_index = coarse.index;
  out.pose = refine_pose(query, coarse.camera, cloud, cfg.refine);
  out.anomaly = detect_anomalies(query, render_aligned(out.pose, cloud, cfg.refine.render), cfg.anomaly);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<QueryResult> process_queries(const std::vector<ImageBuffer>& queries, const std::vector<View>& train,
                                         const CoarseMatcher& matcher, const GaussianCloud& cloud,
                                         const DetectConfig& cfg) {
  cfg.validate();
  std::vector<QueryResult> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) {
    try {
      out[i] = process_query(queries[i], train, matcher, cloud, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "query " + std::to_string(i) + ": " + e.detail());
    }
  });
  return out;
}

EvalInput collect_eval_input(const std::string& category, const std::vector<QueryResult>& results,
                             const std::vector<TestView>& tests) {
  if (results.size() != tests.size()) throw Error(ErrorCode::ShapeMismatch, "one result per test view expected");
  EvalInput in;
  in.category = category;
  for (std::size_t i = 0; i < results.size(); ++i) {
    in.image_scores.push_back(results[i].anomaly.image_score);
    in.image_labels.push_back(tests[i].anomalous ? 1 : 0);
    in.maps.push_back(results[i].anomaly.score_map);
    in.masks.push_back(tests[i].mask);
    in.pose_errors.push_back(camera_pose_error(results[i].pose.effective_camera(), tests[i].view.camera));
  }
  return in;
}

}  // namespace gspose
