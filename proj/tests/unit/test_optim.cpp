#include <gtest/gtest.h>

#include <cmath>

#include "hoic/optim.hpp"

using namespace hoic;

TEST(AdamW, FirstStepMovesByLearningRate) {
  nn::ParamStore store;
  Tensor& p = store.add("p", Tensor::from({2}, {1.0, -1.0}, true));
  AdamWConfig c;
  c.lr = 0.1;
  c.weight_decay = 0.0;
  AdamW opt(store, c);
  ops::sum(ops::mul(p, Tensor::from({2}, {3.0, -0.5}))).backward();
  opt.step();
  // Bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(p.data()[0], 0.9, 1e-6);
  EXPECT_NEAR(p.data()[1], -0.9, 1e-6);
}

TEST(AdamW, DecoupledDecayShrinksWithoutGradient) {
  nn::ParamStore store;
  Tensor& p = store.add("p", Tensor::from({1}, {2.0}, true));
  AdamWConfig c;
  c.lr = 0.1;
  c.weight_decay = 0.5;
  AdamW opt(store, c);
  opt.step();
  EXPECT_NEAR(p.data()[0], 2.0 * (1 - 0.1 * 0.5), 1e-12);
}

TEST(AdamW, ClipGradNormRescales) {
  nn::ParamStore store;
  Tensor& a = store.add("a", Tensor::from({2}, {0, 0}, true));
  ops::sum(ops::mul(a, Tensor::from({2}, {3.0, 4.0}))).backward();
  AdamW opt(store, {});
  EXPECT_NEAR(opt.clip_grad_norm(1.0), 5.0, 1e-12);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-12);
  EXPECT_NEAR(a.grad()[1], 0.8, 1e-12);
}
