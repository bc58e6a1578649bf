#include <gtest/gtest.h>

#include <cmath>

#include "caslu/nn/cross_attention.hpp"
#include "test_util.hpp"

namespace caslu::nn {
namespace {

using testing::param_grad_check;
using testing::random_tensor;
using TapeD = Tape<double>;

EncodedSequence seq(TapeD& t, const Tensor<double>& h, Mask mask) { return {t.constant(h), std::move(mask)}; }

// Zeroes rows at masked positions, as an encoder would.
Tensor<double> masked(Tensor<double> h, const Mask& mask) {
  for (std::size_t i = 0; i < h.rows(); ++i)
    if (!mask[i])
      for (std::size_t j = 0; j < h.cols(); ++j) h.at(i, j) = 0;
  return h;
}

Mask prefix_mask(std::size_t real, std::size_t total) {
  Mask m(total, 0);
  std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(real), 1);
  return m;
}

TEST(Correlation, CosineHandExamples) {
  TapeD t;
  auto w = seq(t, Tensor<double>({3, 2}, {1, 0, 1, 0, 1, 1}), {1, 1, 1});
  auto p = seq(t, Tensor<double>({2, 2}, {1, 0, 0, 1}), {1, 1});
  auto c = t.tensor(correlation_map(t, w, p, 1e-8).c);
  EXPECT_NEAR(c.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c.at(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(c.at(2, 0), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Correlation, MaskedEntriesAreZeroAndWidthChecked) {
  TapeD t;
  auto w = seq(t, Tensor<double>({2, 2}, {1, 2, 3, 4}), {1, 0});
  auto p = seq(t, Tensor<double>({3, 2}, {1, 0, 0, 1, 5, 5}), {1, 1, 0});
  auto c = t.tensor(correlation_map(t, w, p, 1e-8).c);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(c.at(1, j), 0.0);
  EXPECT_EQ(c.at(0, 2), 0.0);
  auto q = seq(t, Tensor<double>({2, 3}), {1, 1});
  EXPECT_THROW(correlation_map(t, w, q, 1e-8), DimensionError);
}

TEST(Correlation, ZeroRowsStayFinite) {
  TapeD t;
  auto w = seq(t, Tensor<double>({1, 2}), {1});
  auto p = seq(t, Tensor<double>({1, 2}, {1, 1}), {1});
  EXPECT_EQ(t.tensor(correlation_map(t, w, p, 1e-8).c).data[0], 0.0);
}

TEST(RowAttention, HandExamples) {
  TapeD t;
  CorrelationMap cm{t.constant(2, 2, {1, 0, 0, 1}), {1, 1}, {1, 1}};
  auto a = t.tensor(row_attention(t, cm, t.constant(2, 1, {2, 0}))).data;
  EXPECT_NEAR(a[0], 0.8808, 1e-4);
  EXPECT_NEAR(a[1], 0.1192, 1e-4);
  auto u = t.tensor(row_attention(t, cm, t.constant(2, 1, {0, 0}))).data;
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  CorrelationMap one{t.constant(2, 2, {0.3, 0.1, 0, 0}), {1, 0}, {1, 1}};
  EXPECT_EQ(t.tensor(row_attention(t, one, t.constant(2, 1, {3, -1}))).data, (std::vector<double>{1, 0}));
  CorrelationMap none{t.constant(2, 2, {0, 0, 0, 0}), {0, 0}, {1, 1}};
  EXPECT_THROW(row_attention(t, none, t.constant(2, 1, {0, 0})), DegenerateMaskError);
  EXPECT_THROW(row_attention(t, cm, t.constant(3, 1, {0, 0, 0})), DimensionError);
}

TEST(ColAttention, TransposeDuality) {
  Rng rng(3);
  TapeD t;
  auto cval = random_tensor(rng, 3, 4);
  Tensor<double> ct({4, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) ct.at(j, i) = cval.at(i, j);
  auto k = random_tensor(rng, 3, 1);
  CorrelationMap cm{t.constant(cval), {1, 1, 0}, {1, 1, 1, 0}};
  CorrelationMap swapped{t.constant(ct), {1, 1, 1, 0}, {1, 1, 0}};
  auto beta = t.tensor(col_attention(t, cm, t.constant(k))).data;
  auto alpha = t.tensor(row_attention(t, swapped, t.constant(k))).data;
  EXPECT_EQ(beta, alpha);
  CorrelationMap single{t.constant(cval), {1, 1, 1}, {1, 0, 0, 0}};
  EXPECT_EQ(t.tensor(col_attention(t, single, t.constant(k))).data, (std::vector<double>{1, 0, 0, 0}));
}

TEST(AttendPool, HandExamples) {
  TapeD t;
  auto h = seq(t, Tensor<double>({2, 2}, {2, 0, 0, 4}), {1, 1});
  EXPECT_EQ(t.tensor(attend_pool(t, h, t.constant(2, 1, {0.25, 0.75}))).data, (std::vector<double>{0.5, 3.0}));
  EXPECT_EQ(t.tensor(attend_pool(t, h, t.constant(2, 1, {0, 1}))).data, (std::vector<double>{0, 4}));
  EXPECT_EQ(t.tensor(uniform_pool(t, h)).data, (std::vector<double>{1, 2}));
  EXPECT_THROW(attend_pool(t, h, t.constant(2, 1, {0.5, 0.6})), ContractError);
  auto half = seq(t, Tensor<double>({2, 2}, {2, 0, 0, 0}), {1, 0});
  EXPECT_THROW(attend_pool(t, half, t.constant(2, 1, {0.5, 0.5})), ContractError);
  EXPECT_EQ(t.tensor(uniform_pool(t, half)).data, (std::vector<double>{2, 0}));
}

TEST(Properties, RandomInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t D = 1 + rng.index(5), m = 1 + rng.index(5), n = 1 + rng.index(7);
    const std::size_t mr = 1 + rng.index(m), nr = 1 + rng.index(n);
    const Mask wm = prefix_mask(mr, m), pm = prefix_mask(nr, n);
    auto hw = masked(random_tensor(rng, m, D, -3, 3), wm);
    auto hp = masked(random_tensor(rng, n, D, -3, 3), pm);
    auto kt = random_tensor(rng, n, 1, -2, 2), kp = random_tensor(rng, m, 1, -2, 2);
    TapeD t;
    auto ws = seq(t, hw, wm), ps = seq(t, hp, pm);
    auto cm = correlation_map(t, ws, ps, 1e-8);
    auto c = t.tensor(cm.c);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        ASSERT_LE(std::abs(c.at(i, j)), 1.0 + 1e-6);
        if (!wm[i] || !pm[j]) ASSERT_EQ(c.at(i, j), 0.0);
      }
    Var alpha = row_attention(t, cm, t.constant(kt));
    Var beta = col_attention(t, cm, t.constant(kp));
    for (auto [v, mask] : {std::pair{alpha, wm}, std::pair{beta, pm}}) {
      auto w = t.tensor(v).data;
      double s = 0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        ASSERT_GE(w[i], 0.0);
        if (!mask[i]) ASSERT_EQ(w[i], 0.0);
        s += w[i];
      }
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
    auto tv = t.tensor(attend_pool(t, ws, alpha)).data;
    auto pv = t.tensor(attend_pool(t, ps, beta)).data;

    // Padding invariance: trim to the real prefix; kernels keep the entries
    // that meet real positions.
    {
      TapeD u;
      Tensor<double> hw2({mr, D}), hp2({nr, D}), kt2({nr, 1}), kp2({mr, 1});
      std::copy(hw.data.begin(), hw.data.begin() + static_cast<std::ptrdiff_t>(mr * D), hw2.data.begin());
      std::copy(hp.data.begin(), hp.data.begin() + static_cast<std::ptrdiff_t>(nr * D), hp2.data.begin());
      std::copy(kt.data.begin(), kt.data.begin() + static_cast<std::ptrdiff_t>(nr), kt2.data.begin());
      std::copy(kp.data.begin(), kp.data.begin() + static_cast<std::ptrdiff_t>(mr), kp2.data.begin());
      auto ws2 = seq(u, hw2, prefix_mask(mr, mr)), ps2 = seq(u, hp2, prefix_mask(nr, nr));
      auto cm2 = correlation_map(u, ws2, ps2, 1e-8);
      auto t2 = u.tensor(attend_pool(u, ws2, row_attention(u, cm2, u.constant(kt2)))).data;
      auto p2 = u.tensor(attend_pool(u, ps2, col_attention(u, cm2, u.constant(kp2)))).data;
      for (std::size_t j = 0; j < D; ++j) {
        ASSERT_NEAR(t2[j], tv[j], 1e-6);
        ASSERT_NEAR(p2[j], pv[j], 1e-6);
      }
    }

    // Scale invariance of C rows.
    {
      TapeD u;
      auto hs = hw;
      const std::size_t r = rng.index(mr);
      const double lambda = rng.uniform(0.1, 10);
      for (std::size_t j = 0; j < D; ++j) hs.at(r, j) *= lambda;
      auto c2 = u.tensor(correlation_map(u, seq(u, hs, wm), seq(u, hp, pm), 1e-8).c);
      for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(c2.at(r, j), c.at(r, j), 1e-6);
    }

    // Zero kernels reduce to uniform pooling.
    {
      TapeD u;
      auto ws2 = seq(u, hw, wm), ps2 = seq(u, hp, pm);
      auto cm2 = correlation_map(u, ws2, ps2, 1e-8);
      auto tz = u.tensor(attend_pool(u, ws2, row_attention(u, cm2, u.constant(Tensor<double>({n, 1}))))).data;
      auto pz = u.tensor(attend_pool(u, ps2, col_attention(u, cm2, u.constant(Tensor<double>({m, 1}))))).data;
      auto tu = u.tensor(uniform_pool(u, ws2)).data, pu = u.tensor(uniform_pool(u, ps2)).data;
      for (std::size_t j = 0; j < D; ++j) {
        ASSERT_NEAR(tz[j], tu[j], 1e-6);
        ASSERT_NEAR(pz[j], pu[j], 1e-6);
      }
    }
  }
}

TEST(GradCheck, CorrelationAttentionPool) {
  Rng rng(77);
  for (bool mask_entries : {true, false}) {
    ParamSet<double> p;
    const Mask wm{1, 1, 1, 0}, pm{1, 1, 1, 1, 0};
    p.add("hw", masked(random_tensor(rng, 4, 3), wm));
    p.add("hp", masked(random_tensor(rng, 5, 3), pm));
    p.add("kt", random_tensor(rng, 5, 1));
    p.add("kp", random_tensor(rng, 4, 1));
    auto wt = random_tensor(rng, 1, 3), wp = random_tensor(rng, 1, 3);
    auto res = param_grad_check(p, [&](Bound<double>& b) {
      auto& t = b.tape();
      EncodedSequence ws{t.mask_rows(b("hw"), wm), wm}, ps{t.mask_rows(b("hp"), pm), pm};
      auto cm = correlation_map(t, ws, ps, 1e-8, mask_entries);
      Var tv = attend_pool(t, ws, row_attention(t, cm, b("kt")));
      Var pv = attend_pool(t, ps, col_attention(t, cm, b("kp")));
      return t.add(t.sum(t.mul(tv, t.constant(wt))), t.sum(t.mul(pv, t.constant(wp))));
    });
    EXPECT_LT(res.max_rel_error, 1e-4);
  }
}

TEST(Trace, SerializesExpectedKeys) {
  AttentionTrace tr{{{0.5, -0.25}}, {1.0}, {0.75, 0.25}, {"had"}, {"hh", "ae"}};
  auto j = to_json(tr);
  EXPECT_EQ(j.dump(), R"({"C":[[0.5,-0.25]],"alpha":[1.0],"beta":[0.75,0.25],"words":["had"],"phonemes":["hh","ae"]})");
}

}  // namespace
}  // namespace caslu::nn
