#include "hoic/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hoic {

namespace {

std::vector<double> softmax_row(std::span<const double> v, std::size_t offset, int k) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) m = std::max(m, v[offset + i]);
  double s = 0;
  for (int i = 0; i < k; ++i) s += p[static_cast<std::size_t>(i)] = std::exp(v[offset + i] - m);
  for (auto& x : p) x /= s;
  return p;
}

std::array<double, 4> box_row(const Tensor& t, int b, int q) {
  const std::size_t o = (static_cast<std::size_t>(b) * t.dim(1) + q) * 4;
  const auto v = t.data();
  return {v[o], v[o + 1], v[o + 2], v[o + 3]};
}

Tensor sample_rows(const Tensor& t, int b) {
  return ops::reshape(ops::slice(t, 0, b, 1), {t.dim(1), t.dim(2)});
}

Tensor col(const Tensor& t, int c) { return ops::slice(t, 1, c, 1); }

}  // namespace

void MatchWeights::validate() const {
  if (cls < 0 || box < 0 || iou < 0 || no_interaction < 0) throw ConfigError("match weights must be non-negative");
}

QueryPrediction query_prediction(const PairPredictions& preds, int b, int q) {
  QueryPrediction p;
  p.human_box = box_row(preds.human_boxes, b, q);
  p.object_box = box_row(preds.object_boxes, b, q);
  const int no = preds.object_logits.dim(2), na = preds.action_logits.dim(2), nq = preds.object_logits.dim(1);
  p.object_probs = softmax_row(preds.object_logits.data(), (static_cast<std::size_t>(b) * nq + q) * no, no);
  p.action_probs = softmax_row(preds.action_logits.data(), (static_cast<std::size_t>(b) * nq + q) * na, na);
  return p;
}

CostBreakdown pair_cost(const QueryPrediction& pred, const InteractionPair& gt, int width, int height,
                        const MatchWeights& w) {
  if (gt.human_box.area() <= 0 || gt.object_box.area() <= 0) {
    throw ValidationError("pair_cost: degenerate ground-truth box");
  }
  CostBreakdown c;
  c.cls_cost = -pred.object_probs.at(static_cast<std::size_t>(gt.object_class)) -
               pred.action_probs.at(static_cast<std::size_t>(gt.action_class));
  const auto gh = from_box(gt.human_box, width, height), go = from_box(gt.object_box, width, height);
  double l1 = 0;
  for (int i = 0; i < 4; ++i) l1 += std::abs(pred.human_box[i] - gh[i]) + std::abs(pred.object_box[i] - go[i]);
  c.box_cost = l1 / 8.0;
  c.iou_cost = (1.0 - generalized_iou(to_box(pred.human_box, width, height), gt.human_box)) +
               (1.0 - generalized_iou(to_box(pred.object_box, width, height), gt.object_box));
  c.total = w.cls * c.cls_cost + w.box * c.box_cost + w.iou * c.iou_cost;
  return c;
}

MatchResult hungarian(const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(cost.size());  // queries
  const int n = m ? static_cast<int>(cost[0].size()) : 0;  // ground truths
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != n) throw ShapeError("hungarian: ragged cost matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw ValidationError("hungarian: non-finite cost");
    }
  }
  if (n > m) {
    throw CapacityError("hungarian: " + std::to_string(n) + " ground-truth pairs exceed " + std::to_string(m) +
                        " queries");
  }
  MatchResult r;
  // Shortest augmenting paths with potentials; ground truths are the rows
  // being assigned, queries the columns. Index 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> owner(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[j - 1][i0 - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0);
  }
  for (int j = 1; j <= m; ++j) {
    if (owner[j] != 0) {
      r.assignment.emplace_back(j - 1, owner[j] - 1);
      r.total_cost += cost[j - 1][owner[j] - 1];
    } else {
      r.unmatched.push_back(j - 1);
    }
  }
  return r;
}

MatchResult match_sample(const PairPredictions& preds, int b, const std::vector<InteractionPair>& gts, int width,
                         int height, const MatchWeights& w) {
  const int nq = preds.human_boxes.dim(1);
  std::vector<std::vector<CostBreakdown>> parts(static_cast<std::size_t>(nq));
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(nq));
  for (int q = 0; q < nq; ++q) {
    const QueryPrediction p = query_prediction(preds, b, q);
    for (const auto& g : gts) {
      parts[static_cast<std::size_t>(q)].push_back(pair_cost(p, g, width, height, w));
      cost[static_cast<std::size_t>(q)].push_back(parts[static_cast<std::size_t>(q)].back().total);
    }
  }
  MatchResult r = hungarian(cost);
  for (auto [q, g] : r.assignment) r.costs.push_back(parts[static_cast<std::size_t>(q)][static_cast<std::size_t>(g)]);
  return r;
}

Tensor generalized_iou(const Tensor& a, const Tensor& b) {
  auto corners = [](const Tensor& t) {
    Tensor half_w = ops::scale(col(t, 2), 0.5), half_h = ops::scale(col(t, 3), 0.5);
    return std::array<Tensor, 4>{ops::sub(col(t, 0), half_w), ops::sub(col(t, 1), half_h),
                                 ops::add(col(t, 0), half_w), ops::add(col(t, 1), half_h)};
  };
  const auto ca = corners(a), cb = corners(b);
  Tensor iw = ops::relu(ops::sub(ops::minimum(ca[2], cb[2]), ops::maximum(ca[0], cb[0])));
  Tensor ih = ops::relu(ops::sub(ops::minimum(ca[3], cb[3]), ops::maximum(ca[1], cb[1])));
  Tensor inter = ops::mul(iw, ih);
  Tensor area_a = ops::mul(col(a, 2), col(a, 3)), area_b = ops::mul(col(b, 2), col(b, 3));
  Tensor uni = ops::sub(ops::add(area_a, area_b), inter);
  Tensor hull = ops::mul(ops::sub(ops::maximum(ca[2], cb[2]), ops::minimum(ca[0], cb[0])),
                         ops::sub(ops::maximum(ca[3], cb[3]), ops::minimum(ca[1], cb[1])));
  return ops::sub(ops::div(inter, uni), ops::div(ops::sub(hull, uni), hull));
}

Tensor match_loss(const PairPredictions& preds, int b, const std::vector<InteractionPair>& gts, const MatchResult& m,
                  int width, int height, const MatchWeights& w) {
  const int no_int = preds.action_logits.dim(2) - 1;
  Tensor act_logp = ops::log_softmax_last(sample_rows(preds.action_logits, b));
  Tensor loss = Tensor::scalar(0.0);
  if (!m.unmatched.empty()) {
    std::vector<int> targets(m.unmatched.size(), no_int);
    loss = ops::scale(ops::nll_sum(ops::gather_rows(act_logp, m.unmatched), targets), w.no_interaction);
  }
  if (m.assignment.empty()) return loss;

  std::vector<int> rows, obj_t, act_t;
  std::vector<double> gh, go;
  for (auto [q, g] : m.assignment) {
    const InteractionPair& p = gts.at(static_cast<std::size_t>(g));
    rows.push_back(q);
    obj_t.push_back(p.object_class);
    act_t.push_back(p.action_class);
    for (double v : from_box(p.human_box, width, height)) gh.push_back(v);
    for (double v : from_box(p.object_box, width, height)) go.push_back(v);
  }
  const int k = static_cast<int>(rows.size());
  Tensor obj_logp = ops::log_softmax_last(sample_rows(preds.object_logits, b));
  Tensor ce = ops::add(ops::nll_sum(ops::gather_rows(obj_logp, rows), obj_t),
                       ops::nll_sum(ops::gather_rows(act_logp, rows), act_t));
  Tensor ph = ops::gather_rows(sample_rows(preds.human_boxes, b), rows);
  Tensor po = ops::gather_rows(sample_rows(preds.object_boxes, b), rows);
  Tensor th = Tensor::from({k, 4}, gh), to = Tensor::from({k, 4}, go);
  Tensor l1 = ops::scale(ops::add(ops::sum(ops::abs(ops::sub(ph, th))), ops::sum(ops::abs(ops::sub(po, to)))), 1.0 / 8.0);
  Tensor giou = ops::add(ops::sum(ops::add_scalar(ops::neg(generalized_iou(ph, th)), 1.0)),
                         ops::sum(ops::add_scalar(ops::neg(generalized_iou(po, to)), 1.0)));
  loss = ops::add(loss, ops::scale(ce, w.cls));
  loss = ops::add(loss, ops::scale(l1, w.box));
  return ops::add(loss, ops::scale(giou, w.iou));
}

LossReport total_loss(double match, double bce, double ce, double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw ConfigError("loss weights alpha and beta must be non-negative");
  if (match < 0 || bce < 0 || ce < 0) throw ValidationError("loss components must be non-negative");
  LossReport r{match, bce, ce, alpha * match + beta * (bce + ce), alpha, beta};
  return r;
}

Tensor total_loss(const Tensor& match, const Tensor& bce, const Tensor& ce, double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw ConfigError("loss weights alpha and beta must be non-negative");
  return ops::add(ops::scale(match, alpha), ops::scale(ops::add(bce, ce), beta));
}

}  // namespace hoic
