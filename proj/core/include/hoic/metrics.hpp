#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoic/scene.hpp"
#include "hoic/tensor.hpp"

namespace hoic {

struct SegMetrics {
  // Mean over images with contact; nullopt when no image has any.
  std::optional<double> sc_acc;
  int sc_images = 0;
  double c_acc = 0;
  double miou = 0;
  double wiou = 0;
  std::array<double, kNumParts> per_class_iou{};
  std::array<double, kNumParts> per_class_pixel_weight{};
  std::array<bool, kNumParts> class_present{};
};

/// Accumulates confusion counts over a dataset.
///
/// IoU counts are pooled over all images. Classes absent from both
/// prediction and ground truth are left out of mIoU; wIoU weights each
/// class by its share of ground-truth contact pixels. When nothing is
/// present anywhere both are 1 if the prediction is empty too.
class SegEvaluator {
 public:
  void add(const ContactMap& pred, const ContactMap& gt);
  SegMetrics result() const;

 private:
  std::array<long long, kNumParts> inter_{}, pred_count_{}, gt_count_{};
  long long pixels_ = 0, binary_correct_ = 0;
  double sc_sum_ = 0;
  int sc_images_ = 0;
};

SegMetrics seg_metrics(const ContactMap& pred, const ContactMap& gt);
SegMetrics seg_metrics(std::span<const ContactMap> pred, std::span<const ContactMap> gt);

struct ScoredPair {
  Box human_box;
  Box object_box;
  int object_class = 0;
  int action_class = 0;
  double confidence = 0;
};

struct DetectionMetrics {
  double map = 0;
  std::map<int, double> per_action_ap;  // actions present in ground truth
};

/// All-point interpolated AP from (confidence, is_true_positive) entries.
double average_precision(std::vector<std::pair<double, bool>> scored, int num_gt);

/// A prediction is a true positive when an unclaimed ground-truth pair in
/// the same image has the same action and object class and both boxes
/// overlap with IoU >= iou_thresh. Predictions are claimed greedily in
/// descending confidence.
DetectionMetrics hoi_map(const std::vector<std::vector<ScoredPair>>& preds,
                         const std::vector<std::vector<InteractionPair>>& gts, double iou_thresh = 0.5);

struct MetricsReport {
  SegMetrics seg;
  DetectionMetrics det;
};

nlohmann::json to_json(const MetricsReport& r, const Vocab& vocab);

}  // namespace hoic
