#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gspose/error.hpp"
#include "gspose/optim.hpp"
#include "support/oracles.hpp"

using namespace gspose;
using namespace gspose::testing;

TEST(Adam, ZeroGradientLeavesParams) {
  AdamState s(3, {});
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  adam_step(s, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState s(4, {});
  std::vector<double> p(4, 0.0);
  const std::vector<double> g{1e-3, -5.0, 250.0, -1e4};
  adam_step(s, p, g);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], -0.001 * (g[i] > 0 ? 1 : -1), 1e-7);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  Rng rng(1);
  const int n = 5;
  std::vector<double> target(n), p(n);
  for (int i = 0; i < n; ++i) {
    target[i] = uniform(rng, -1, 1);
    p[i] = target[i] + uniform(rng, -0.5, 0.5);
  }
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamState s(n, cfg);
  std::vector<double> g(n);
  for (int step = 0; step < 400; ++step) {
    s.lr = 0.05 * std::pow(0.01, step / 399.0);
    for (int i = 0; i < n; ++i) g[i] = 2.0 * (p[i] - target[i]);
    adam_step(s, p, g);
  }
  for (int i = 0; i < n; ++i) EXPECT_NEAR(p[i], target[i], 1e-3);
}

TEST(Adam, Errors) {
  AdamState s(2, {});
  std::vector<double> p(2, 0.0);
  EXPECT_THROW(adam_step(s, p, std::vector<double>(3, 0.0)), Error);
  const std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
  try {
    adam_step(s, p, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
  }
}

TEST(Adam, DeterministicAndSecondMomentNonNegative) {
  Rng rng(2);
  std::vector<double> g(10);
  for (auto& v : g) v = uniform(rng, -1, 1);
  AdamState a(10, {}), b(10, {});
  std::vector<double> pa(10, 0.5), pb(10, 0.5);
  for (int i = 0; i < 20; ++i) {
    adam_step(a, pa, g);
    adam_step(b, pb, g);
  }
  EXPECT_EQ(pa, pb);
  for (double v : a.v) EXPECT_GE(v, 0.0);
}

TEST(Adam, GradientClipping) {
  AdamConfig cfg;
  cfg.max_grad_norm = 1.0;
  AdamState s(2, cfg);
  std::vector<double> p(2, 0.0);
  adam_step(s, p, std::vector<double>{300.0, 400.0});
  // First-step magnitude is lr regardless of scale.
  EXPECT_NEAR(p[0], -1e-3, 1e-9);
}

TEST(GroupedAdam, PerGroupLearningRates) {
  GroupedAdam opt;
  AdamConfig slow, fast;
  slow.lr = 1e-3;
  fast.lr = 1e-1;
  opt.add_group("slow", 1, slow);
  opt.add_group("fast", 1, fast);
  std::vector<double> a{0.0}, b{0.0};
  opt.step(0, a, std::vector<double>{1.0});
  opt.step(1, b, std::vector<double>{1.0});
  EXPECT_NEAR(a[0], -1e-3, 1e-9);
  EXPECT_NEAR(b[0], -1e-1, 1e-7);
}

TEST(AdamState, KeepAndGrow) {
  AdamState s(6, {});
  for (std::size_t i = 0; i < 6; ++i) s.m[i] = static_cast<double>(i);
  const std::vector<std::size_t> keep{2, 0};
  s.keep(keep, 2);
  EXPECT_EQ(s.m, (std::vector<double>{4, 5, 0, 1}));
  s.grow(2);
  EXPECT_EQ(s.size(), 6u);
}
