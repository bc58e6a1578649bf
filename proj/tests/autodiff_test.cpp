#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "caslu/autodiff/grad_check.hpp"
#include "caslu/autodiff/tape.hpp"
#include "caslu/util/rng.hpp"

namespace caslu::ad {
namespace {

using TapeD = Tape<double>;

Tensor<double> random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1, double hi = 1) {
  Tensor<double> t({r, c});
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Checks the op against finite differences through sum(op(inputs) * weights)
// with a fixed random weighting, so every output coordinate matters.
double check_op(const std::vector<Tensor<double>>& inputs,
                const std::function<Var(TapeD&, const std::vector<Var>&)>& op, Rng& rng) {
  Tensor<double> weights;
  {
    TapeD probe;
    std::vector<Var> vs;
    for (const auto& t : inputs) vs.push_back(probe.leaf(t));
    Var out = op(probe, vs);
    weights = random_tensor(rng, probe.rows(out), probe.cols(out));
  }
  Objective f = [&](const std::vector<Tensor<double>>& ps, std::vector<Tensor<double>>* grads) {
    TapeD tape;
    std::vector<Var> vs;
    for (const auto& t : ps) vs.push_back(tape.leaf(t));
    Var loss = tape.sum(tape.mul(op(tape, vs), tape.constant(weights)));
    if (grads) {
      tape.backward(loss);
      for (std::size_t i = 0; i < vs.size(); ++i) (*grads)[i] = tape.grad(vs[i]);
    }
    return tape.scalar(loss);
  };
  return grad_check(f, inputs, 1e-5).max_rel_error;
}

TEST(Matmul, IdentityAndHandExamples) {
  TapeD t;
  Var eye = t.constant(2, 2, {1, 0, 0, 1});
  Var a = t.constant(2, 2, {1, 2, 3, 4});
  Tensor<double> prod = t.tensor(t.matmul(eye, a));
  EXPECT_EQ(prod.data, (std::vector<double>{1, 2, 3, 4}));
  Var b = t.constant(2, 1, {5, 6});
  EXPECT_EQ(t.tensor(t.matmul(a, b)).data, (std::vector<double>{17, 39}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  TapeD t;
  Var a = t.constant(Tensor<double>({2, 3}));
  Var b = t.constant(Tensor<double>({2, 3}));
  try {
    t.matmul(a, b);
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3 * 2x3"), std::string::npos) << e.what();
  }
}

TEST(Elementwise, Examples) {
  TapeD t;
  EXPECT_DOUBLE_EQ(t.scalar(t.sigmoid(t.constant(1, 1, {0.0}))), 0.5);
  EXPECT_DOUBLE_EQ(t.scalar(t.tanh(t.constant(1, 1, {0.0}))), 0.0);
  EXPECT_EQ(t.tensor(t.add(t.constant(1, 2, {1, 2}), t.constant(1, 2, {3, 4}))).data, (std::vector<double>{4, 6}));
  EXPECT_THROW(t.add(t.constant(1, 2, {1, 2}), t.constant(2, 1, {1, 2})), DimensionError);
}

TEST(Elementwise, SigmoidIsStableForLargeInputs) {
  TapeD t;
  auto v = t.tensor(t.sigmoid(t.constant(1, 2, {-800.0, 800.0}))).data;
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 1.0);
}

TEST(Elementwise, FiniteChecksCatchOverflow) {
  debug::set_finite_checks(true);
  TapeD t;
  EXPECT_THROW(t.exp(t.constant(1, 1, {1000.0})), NumericError);
  debug::set_finite_checks(false);
  TapeD quiet;
  EXPECT_NO_THROW(quiet.exp(quiet.constant(1, 1, {1000.0})));
}

TEST(MaskedSoftmax, Examples) {
  TapeD t;
  auto u = t.tensor(t.masked_softmax(t.constant(1, 3, {0, 0, 0}), {1, 1, 1})).data;
  for (double x : u) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
  auto one = t.tensor(t.masked_softmax(t.constant(1, 2, {5, -7}), {1, 0})).data;
  EXPECT_EQ(one, (std::vector<double>{1.0, 0.0}));
  auto two = t.tensor(t.masked_softmax(t.constant(1, 2, {1, 2}), {1, 1})).data;
  EXPECT_NEAR(two[0], 0.2689, 1e-4);
  EXPECT_NEAR(two[1], 0.7311, 1e-4);
}

TEST(MaskedSoftmax, AllMaskedIsDegenerate) {
  TapeD t;
  EXPECT_THROW(t.masked_softmax(t.constant(1, 2, {1, 2}), {0, 0}), DegenerateMaskError);
}

TEST(MaskedSoftmax, SimplexAndShiftInvarianceProperty) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    Mask mask(n);
    for (auto& m : mask) m = rng.bernoulli(0.7);
    mask[rng.index(n)] = 1;
    auto logits = random_tensor(rng, n, 1, -20, 20);
    auto shifted = logits;
    const double c = rng.uniform(-50, 50);
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) shifted.data[i] += c;
    TapeD t;
    auto y = t.tensor(t.masked_softmax(t.constant(logits), mask)).data;
    auto ys = t.tensor(t.masked_softmax(t.constant(shifted), mask)).data;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) EXPECT_EQ(y[i], 0.0);
      EXPECT_GE(y[i], 0.0);
      EXPECT_NEAR(y[i], ys[i], 1e-6);
      total += y[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Backward, Examples) {
  {
    TapeD t;
    Var x = t.leaf(Tensor<double>({1, 1}, {3.0}));
    t.backward(t.mul(x, x));
    EXPECT_DOUBLE_EQ(t.grad(x).data[0], 6.0);
  }
  {
    TapeD t;
    Var x = t.leaf(Tensor<double>({1, 1}, {3.0}));
    t.backward(t.add(x, x));
    EXPECT_DOUBLE_EQ(t.grad(x).data[0], 2.0);
  }
  {
    // d sum(AB) / dA[i][p] = sum_j B[p][j]
    TapeD t;
    Var a = t.leaf(Tensor<double>({2, 2}, {1, 2, 3, 4}));
    Var b = t.leaf(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
    t.backward(t.sum(t.matmul(a, b)));
    EXPECT_EQ(t.grad(a).data, (std::vector<double>{6, 15, 6, 15}));
    EXPECT_EQ(t.grad(b).data, (std::vector<double>{4, 4, 4, 6, 6, 6}));
  }
}

TEST(Backward, Errors) {
  TapeD t;
  Var x = t.leaf(Tensor<double>({1, 2}, {1, 2}));
  EXPECT_THROW(t.backward(x), DimensionError);
  Var c = t.sum(t.constant(1, 2, {1, 2}));
  EXPECT_THROW(t.backward(c), ContractError);
}

TEST(Backward, Deterministic) {
  Rng rng(8);
  auto a = random_tensor(rng, 4, 3), b = random_tensor(rng, 3, 4);
  auto run = [&] {
    TapeD t;
    Var va = t.leaf(a), vb = t.leaf(b);
    Var h = t.tanh(t.matmul(va, vb));
    t.backward(t.sum(t.mul(h, t.sigmoid(h))));
    return std::make_pair(t.grad(va).data, t.grad(vb).data);
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, ParameterSinksAccumulate) {
  std::vector<double> w{2.0}, sink{10.0};
  TapeD t;
  Var p = t.parameter(w.data(), 1, 1, sink.data());
  t.backward(t.mul(p, p));
  EXPECT_DOUBLE_EQ(sink[0], 14.0);
}

TEST(GradCheck, QuadraticIsExact) {
  Objective f = [](const std::vector<Tensor<double>>& ps, std::vector<Tensor<double>>* grads) {
    const double x = ps[0].data[0];
    if (grads) (*grads)[0].data[0] = 2 * x;
    return x * x;
  };
  EXPECT_LT(grad_check(f, {Tensor<double>({1, 1}, {1.0})}, 1e-5).max_rel_error, 1e-7);
}

TEST(GradCheck, DetectsWrongBackwardRule) {
  // Custom square op whose backward forgets the factor 2.
  Objective f = [](const std::vector<Tensor<double>>& ps, std::vector<Tensor<double>>* grads) {
    TapeD t;
    Var x = t.leaf(ps[0]);
    const double v = t.scalar(x);
    Var y = t.custom({x.id}, 1, 1, {v * v}, [x, v](TapeD& tp, std::size_t self) {
      tp.grad_buffer(x.id)[0] += tp.grad_span(self)[0] * v;
    });
    if (grads) {
      t.backward(y);
      (*grads)[0] = t.grad(x);
    }
    return t.scalar(y);
  };
  EXPECT_GT(grad_check(f, {Tensor<double>({1, 1}, {1.3})}).max_rel_error, 1e-2);
}

TEST(GradCheck, PlantedSigmoidBugIsCaught) {
  Rng rng(2);
  debug::set_planted_bug(true);
  const double err = check_op({random_tensor(rng, 2, 3)}, [](TapeD& t, auto& v) { return t.sigmoid(v[0]); }, rng);
  debug::set_planted_bug(false);
  EXPECT_GT(err, 1e-2);
}

// Every registered op, 100 random draws of shapes up to 4x4.
TEST(GradCheck, EveryOpPassesOnRandomShapes) {
  Rng rng(1234);
  using OpCase = std::function<double(Rng&)>;
  auto dim = [](Rng& r) { return 1 + r.index(4); };
  std::vector<std::pair<const char*, OpCase>> cases = {
      {"matmul",
       [&](Rng& r) {
         auto m = dim(r), k = dim(r), n = dim(r);
         return check_op({random_tensor(r, m, k), random_tensor(r, k, n)},
                         [](TapeD& t, auto& v) { return t.matmul(v[0], v[1]); }, r);
       }},
      {"transpose",
       [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r))}, [](TapeD& t, auto& v) { return t.transpose(v[0]); }, r);
       }},
      {"add/sub/mul",
       [&](Rng& r) {
         auto m = dim(r), n = dim(r);
         return check_op({random_tensor(r, m, n), random_tensor(r, m, n)},
                         [](TapeD& t, auto& v) { return t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])); }, r);
       }},
      {"scale/one_minus",
       [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r))},
                         [](TapeD& t, auto& v) { return t.one_minus(t.scale(v[0], -1.7)); }, r);
       }},
      {"tanh", [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r), -2, 2)}, [](TapeD& t, auto& v) { return t.tanh(v[0]); }, r);
       }},
      {"sigmoid", [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r), -3, 3)}, [](TapeD& t, auto& v) { return t.sigmoid(v[0]); },
                         r);
       }},
      {"exp", [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r))}, [](TapeD& t, auto& v) { return t.exp(v[0]); }, r);
       }},
      {"sum", [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r))}, [](TapeD& t, auto& v) { return t.sum(v[0]); }, r);
       }},
      {"slices",
       [&](Rng& r) {
         auto m = dim(r), n = dim(r);
         auto r0 = r.index(m), c0 = r.index(n);
         return check_op({random_tensor(r, m, n)},
                         [=](TapeD& t, auto& v) {
                           return t.slice_cols(t.slice_rows(v[0], r0, m - r0), c0, n - c0);
                         },
                         r);
       }},
      {"concat",
       [&](Rng& r) {
         auto m = dim(r), n = dim(r), k = dim(r);
         return check_op({random_tensor(r, m, n), random_tensor(r, m, k), random_tensor(r, k, n)},
                         [](TapeD& t, auto& v) {
                           Var cols[] = {v[0], v[1]};
                           Var wide = t.concat_cols(cols);
                           Var rows[] = {v[0], v[2]};
                           Var tall = t.concat_rows(rows);
                           Var parts[] = {t.sum(wide), t.sum(t.mul(tall, tall))};
                           return t.concat_rows(parts);
                         },
                         r);
       }},
      {"tile_rows",
       [&](Rng& r) {
         auto times = dim(r);
         return check_op({random_tensor(r, 1, dim(r))}, [=](TapeD& t, auto& v) { return t.tile_rows(v[0], times); },
                         r);
       }},
      {"mask_rows",
       [&](Rng& r) {
         auto m = dim(r);
         Mask mask(m);
         for (auto& x : mask) x = r.bernoulli(0.5);
         return check_op({random_tensor(r, m, dim(r))}, [=](TapeD& t, auto& v) { return t.mask_rows(v[0], mask); },
                         r);
       }},
      {"unfold_rows",
       [&](Rng& r) {
         auto width = dim(r);
         auto pad = r.index(width);
         return check_op({random_tensor(r, dim(r), dim(r))},
                         [=](TapeD& t, auto& v) { return t.unfold_rows(v[0], width, pad); }, r);
       }},
      {"masked_softmax",
       [&](Rng& r) {
         auto n = dim(r) * dim(r);
         Mask mask(n);
         for (auto& x : mask) x = r.bernoulli(0.6);
         mask[r.index(n)] = 1;
         return check_op({random_tensor(r, n, 1, -3, 3)},
                         [=](TapeD& t, auto& v) { return t.masked_softmax(v[0], mask); }, r);
       }},
      {"log_softmax",
       [&](Rng& r) {
         return check_op({random_tensor(r, 1, dim(r), -3, 3)}, [](TapeD& t, auto& v) { return t.log_softmax(v[0]); },
                         r);
       }},
      {"cross_entropy",
       [&](Rng& r) {
         auto n = dim(r);
         auto label = r.index(n);
         return check_op({random_tensor(r, 1, n, -3, 3)},
                         [=](TapeD& t, auto& v) { return t.cross_entropy(v[0], label); }, r);
       }},
      {"normalize_rows",
       [&](Rng& r) {
         return check_op({random_tensor(r, dim(r), dim(r))},
                         [](TapeD& t, auto& v) { return t.normalize_rows(v[0], 1e-8); }, r);
       }},
  };
  for (auto& [name, run] : cases) {
    double worst = 0;
    for (int draw = 0; draw < 100; ++draw) worst = std::max(worst, run(rng));
    EXPECT_LT(worst, 1e-4) << name;
  }
}

TEST(Gather, LookupMaskingAndRange) {
  std::vector<double> table{0, 0, 9, 9, 1, -1};
  std::vector<double> sink(6, 0.0);
  TapeD t;
  std::vector<int> ids{2, 0};
  Var e = t.gather_rows(table.data(), 3, 2, ids, {1, 0}, sink.data());
  EXPECT_EQ(t.tensor(e).data, (std::vector<double>{1, -1, 0, 0}));
  t.backward(t.sum(e));
  EXPECT_EQ(sink, (std::vector<double>{0, 0, 0, 0, 1, 1}));
  std::vector<int> bad{3};
  EXPECT_THROW(t.gather_rows(table.data(), 3, 2, bad, {1}, nullptr), ContractError);
}

}  // namespace
}  // namespace caslu::ad
