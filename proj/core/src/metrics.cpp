#include "hoic/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace hoic {

void SegEvaluator::add(const ContactMap& pred, const ContactMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) throw ShapeError("seg_metrics: map size mismatch");
  long long contact = 0, part_correct = 0;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int p = pred.labels[i], g = gt.labels[i];
    if (p > kNumParts || g > kNumParts) throw ValidationError("seg_metrics: label exceeds 17");
    binary_correct_ += (p != 0) == (g != 0) ? 1 : 0;
    if (g) {
      ++contact;
      ++gt_count_[g - 1];
      if (p == g) {
        ++part_correct;
        ++inter_[g - 1];
      }
    }
    if (p) ++pred_count_[p - 1];
  }
  pixels_ += static_cast<long long>(gt.labels.size());
  if (contact) {
    sc_sum_ += static_cast<double>(part_correct) / static_cast<double>(contact);
    ++sc_images_;
  }
}

SegMetrics SegEvaluator::result() const {
  SegMetrics m;
  if (sc_images_) m.sc_acc = sc_sum_ / sc_images_;
  m.sc_images = sc_images_;
  m.c_acc = pixels_ ? static_cast<double>(binary_correct_) / static_cast<double>(pixels_) : 1.0;
  const long long gt_total = std::accumulate(gt_count_.begin(), gt_count_.end(), 0LL);
  const long long pred_total = std::accumulate(pred_count_.begin(), pred_count_.end(), 0LL);
  double iou_sum = 0, wiou = 0;
  int present = 0;
  for (int k = 0; k < kNumParts; ++k) {
    const long long uni = gt_count_[k] + pred_count_[k] - inter_[k];
    m.class_present[k] = uni > 0;
    m.per_class_iou[k] = uni > 0 ? static_cast<double>(inter_[k]) / static_cast<double>(uni) : 0.0;
    m.per_class_pixel_weight[k] = gt_total ? static_cast<double>(gt_count_[k]) / static_cast<double>(gt_total) : 0.0;
    if (uni > 0) {
      iou_sum += m.per_class_iou[k];
      ++present;
    }
    wiou += static_cast<double>(gt_count_[k]) * m.per_class_iou[k];
  }
  m.miou = present ? iou_sum / present : 1.0;
  m.wiou = gt_total ? wiou / static_cast<double>(gt_total) : (pred_total ? 0.0 : 1.0);
  return m;
}

SegMetrics seg_metrics(const ContactMap& pred, const ContactMap& gt) {
  SegEvaluator e;
  e.add(pred, gt);
  return e.result();
}

SegMetrics seg_metrics(std::span<const ContactMap> pred, std::span<const ContactMap> gt) {
  if (pred.size() != gt.size()) throw ShapeError("seg_metrics: prediction and ground-truth counts differ");
  SegEvaluator e;
  for (std::size_t i = 0; i < pred.size(); ++i) e.add(pred[i], gt[i]);
  return e.result();
}

double average_precision(std::vector<std::pair<double, bool>> scored, int num_gt) {
  if (num_gt <= 0) return 0.0;
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<double> recall, precision;
  int tp = 0, fp = 0;
  for (const auto& [conf, hit] : scored) {
    (hit ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }
  // Precision envelope, then area under the step curve.
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0, prev_r = 0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_r) * precision[i];
    prev_r = recall[i];
  }
  return ap;
}

DetectionMetrics hoi_map(const std::vector<std::vector<ScoredPair>>& preds,
                         const std::vector<std::vector<InteractionPair>>& gts, double iou_thresh) {
  if (preds.size() != gts.size()) throw ShapeError("hoi_map: prediction and ground-truth image counts differ");
  std::map<int, int> gt_count;
  for (const auto& img : gts) {
    for (const auto& g : img) ++gt_count[g.action_class];
  }

  struct Entry {
    std::size_t image;
    const ScoredPair* pair;
  };
  // Total order independent of input order: confidence first, then content.
  auto key = [](const Entry& e) {
    const ScoredPair& p = *e.pair;
    return std::make_tuple(-p.confidence, e.image, p.object_class, p.human_box.x1, p.human_box.y1, p.human_box.x2,
                           p.human_box.y2, p.object_box.x1, p.object_box.y1, p.object_box.x2, p.object_box.y2);
  };

  DetectionMetrics d;
  for (const auto& [action, count] : gt_count) {
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (const auto& p : preds[i]) {
        if (p.action_class == action) entries.push_back({i, &p});
      }
    }
    std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) { return key(a) < key(b); });
    std::vector<std::vector<bool>> claimed(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) claimed[i].assign(gts[i].size(), false);
    std::vector<std::pair<double, bool>> scored;
    for (const Entry& e : entries) {
      const ScoredPair& p = *e.pair;
      int best = -1;
      double best_overlap = -1;
      const auto& img_gts = gts[e.image];
      for (std::size_t g = 0; g < img_gts.size(); ++g) {
        const InteractionPair& gt = img_gts[g];
        if (claimed[e.image][g] || gt.action_class != action || gt.object_class != p.object_class) continue;
        const double ih = iou(p.human_box, gt.human_box), io = iou(p.object_box, gt.object_box);
        if (ih >= iou_thresh && io >= iou_thresh && std::min(ih, io) > best_overlap) {
          best_overlap = std::min(ih, io);
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) claimed[e.image][static_cast<std::size_t>(best)] = true;
      scored.emplace_back(p.confidence, best >= 0);
    }
    d.per_action_ap[action] = average_precision(std::move(scored), count);
  }
  double sum = 0;
  for (const auto& [a, ap] : d.per_action_ap) sum += ap;
  d.map = d.per_action_ap.empty() ? 0.0 : sum / static_cast<double>(d.per_action_ap.size());
  return d;
}

nlohmann::json to_json(const MetricsReport& r, const Vocab& vocab) {
  nlohmann::json j;
  j["mAP"] = r.det.map;
  j["SC-Acc"] = r.seg.sc_acc ? nlohmann::json(*r.seg.sc_acc) : nlohmann::json(nullptr);
  j["C-Acc"] = r.seg.c_acc;
  j["mIoU"] = r.seg.miou;
  j["wIoU"] = r.seg.wiou;
  nlohmann::json ap = nlohmann::json::object();
  for (const auto& [a, v] : r.det.per_action_ap) ap[vocab.actions.at(static_cast<std::size_t>(a))] = v;
  j["per_action_ap"] = ap;
  nlohmann::json parts = nlohmann::json::object();
  for (int k = 0; k < kNumParts; ++k) {
    if (!r.seg.class_present[k]) continue;
    parts[vocab.body_parts.at(static_cast<std::size_t>(k))] = {{"iou", r.seg.per_class_iou[k]},
                                                              {"pixel_weight", r.seg.per_class_pixel_weight[k]}};
  }
  j["per_part"] = parts;
  j["sc_acc_images"] = r.seg.sc_images;
  return j;
}

}  // namespace hoic
