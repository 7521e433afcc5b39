#pragma once

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hoic/iim.hpp"
#include "hoic/scene.hpp"

namespace hoic {

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MatchWeights {
  double cls = 1.0;
  double box = 2.5;
  double iou = 1.0;
  double no_interaction = 1.0;  // CE weight for unmatched queries

  void validate() const;
};

struct CostBreakdown {
  double cls_cost = 0, box_cost = 0, iou_cost = 0, total = 0;
};

/// One query's predictions with probabilities already normalized.
struct QueryPrediction {
  std::array<double, 4> human_box{};   // normalized cx, cy, w, h
  std::array<double, 4> object_box{};
  std::vector<double> object_probs;
  std::vector<double> action_probs;
};

QueryPrediction query_prediction(const PairPredictions& preds, int b, int q);

CostBreakdown pair_cost(const QueryPrediction& pred, const InteractionPair& gt, int width, int height,
                        const MatchWeights& w);

struct MatchResult {
  std::vector<std::pair<int, int>> assignment;  // (query, gt), sorted by query
  std::vector<int> unmatched;                   // query indices, ascending
  std::vector<CostBreakdown> costs;             // parallel to assignment when known
  double total_cost = 0;
};

/// Minimum-cost assignment of every column (ground truth) to a distinct row
/// (query). cost[q][g]; all rows must have the same length.
MatchResult hungarian(const std::vector<std::vector<double>>& cost);

/// Builds the cost matrix for sample b and solves it.
MatchResult match_sample(const PairPredictions& preds, int b, const std::vector<InteractionPair>& gts, int width,
                         int height, const MatchWeights& w);

/// Differentiable gIoU for rows of normalized cxcywh boxes, (K, 4) -> (K, 1).
Tensor generalized_iou(const Tensor& a, const Tensor& b);

/// Matching loss of sample b under a fixed assignment: class CE, L1 and gIoU
/// terms over matched pairs plus no_interaction CE for unmatched queries.
Tensor match_loss(const PairPredictions& preds, int b, const std::vector<InteractionPair>& gts, const MatchResult& m,
                  int width, int height, const MatchWeights& w);

struct LossReport {
  double match_loss = 0, bce_loss = 0, ce_loss = 0, total = 0;
  double alpha = 0.1, beta = 0.5;
};

/// alpha * match + beta * (bce + ce).
LossReport total_loss(double match, double bce, double ce, double alpha = 0.1, double beta = 0.5);
Tensor total_loss(const Tensor& match, const Tensor& bce, const Tensor& ce, double alpha, double beta);

}  // namespace hoic
