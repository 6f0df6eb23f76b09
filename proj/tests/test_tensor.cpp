#include <cmath>
#include <cstring>

#include <doctest.h>

#include "adaptermix/errors.hpp"
#include "adaptermix/tensor.hpp"
#include "support/test_support.hpp"

using namespace adaptermix;
using testsupport::grad_check;
using testsupport::max_abs_diff;
using testsupport::naive_matmul;
using testsupport::random_tensor;

TEST_CASE("matmul basics") {
  SUBCASE("identity leaves the operand unchanged") {
    const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    const Tensor b = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor c = matmul(eye, b);
    CHECK(max_abs_diff(c.values(), b.values()) == 0.0);
  }
  SUBCASE("hand-checked 2x2 by 2x1") {
    const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    const Tensor b = Tensor::from_data({2, 1}, {1, 1});
    const Tensor c = matmul(a, b);
    CHECK(c(0, 0) == 3.0);
    CHECK(c(1, 0) == 7.0);
  }
  SUBCASE("zero times anything is zero") {
    const Tensor z = Tensor::zeros({3, 4});
    const Tensor b = random_tensor({4, 2}, 5);
    const Tensor zb = matmul(z, b);
    for (double v : zb.values()) CHECK(v == 0.0);
  }
  SUBCASE("shape mismatch names both shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({4, 1});
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         doctest::Contains("[2, 3]"), ShapeError);
  }
}

TEST_CASE("matmul agrees with the naive triple loop on random shapes") {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.next_below(6);
    const std::size_t p = 1 + rng.next_below(6);
    const std::size_t q = 1 + rng.next_below(6);
    const Tensor a = random_tensor({m, p}, rng.next_u64());
    const Tensor b = random_tensor({p, q}, rng.next_u64());
    const Tensor c = matmul(a, b);
    const auto expect =
        naive_matmul({a.values().begin(), a.values().end()},
                     {b.values().begin(), b.values().end()}, m, p, q);
    CHECK(max_abs_diff(c.values(), expect) < 1e-12);
  }
}

TEST_CASE("softmax_rows") {
  SUBCASE("all-zero row is uniform") {
    const Tensor y = softmax_rows(Tensor::zeros({1, 4}));
    for (double v : y.values()) CHECK(v == 0.25);
  }
  SUBCASE("two-element row matches the scalar exp oracle") {
    const Tensor y = softmax_rows(Tensor::from_data({1, 2}, {1.0, 0.0}));
    const double e = std::exp(1.0);
    CHECK(std::abs(y.values()[0] - e / (e + 1.0)) < 1e-5);
    CHECK(std::abs(y.values()[1] - 1.0 / (e + 1.0)) < 1e-5);
    CHECK(std::abs(y.values()[0] - 0.73106) < 1e-5);
    CHECK(std::abs(y.values()[1] - 0.26894) < 1e-5);
  }
  SUBCASE("constant rows are uniform for any constant") {
    for (double c : {-3.0, 0.0, 41.5}) {
      const Tensor y = softmax_rows(Tensor::full({1, 3}, c));
      for (double v : y.values())
        CHECK(std::abs(v - 1.0 / 3.0) < 1e-12);
    }
  }
  SUBCASE("rows sum to one and shifting a row changes nothing") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor x = random_tensor({4, 5}, rng.next_u64(), -8.0, 8.0);
      const Tensor y = softmax_rows(x);
      for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) sum += y(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
      Tensor shifted = x.clone();
      const double c = rng.uniform(-100.0, 100.0);
      for (std::size_t j = 0; j < 5; ++j) shifted(2, j) += c;
      const Tensor y2 = softmax_rows(shifted);
      CHECK(max_abs_diff(y.values(), y2.values()) < 1e-9);
    }
  }
  SUBCASE("stays finite for large magnitudes") {
    const Tensor y =
        softmax_rows(Tensor::from_data({1, 3}, {1000.0, -1000.0, 999.0}));
    CHECK(y.all_finite());
  }
}

TEST_CASE("layer_norm") {
  const Tensor unit_gain = Tensor::full({2}, 1.0);
  const Tensor zero_bias = Tensor::zeros({2});
  SUBCASE("already-normalized row passes through") {
    const Tensor x = Tensor::from_data({1, 2}, {1.0, -1.0});
    const Tensor y = layer_norm(x, unit_gain, zero_bias, 1e-12);
    CHECK(std::abs(y.values()[0] - 1.0) < 1e-5);
    CHECK(std::abs(y.values()[1] + 1.0) < 1e-5);
  }
  SUBCASE("constant row collapses to the bias") {
    const Tensor x = Tensor::full({1, 3}, 5.0);
    const Tensor y = layer_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}));
    for (double v : y.values()) CHECK(std::abs(v) < 1e-5);
  }
  SUBCASE("hand-checked gain and bias") {
    const Tensor x = Tensor::from_data({1, 2}, {2.0, 0.0});
    const Tensor y =
        layer_norm(x, Tensor::full({2}, 3.0), Tensor::full({2}, 1.0));
    CHECK(std::abs(y.values()[0] - 4.0) < 1e-4);
    CHECK(std::abs(y.values()[1] + 2.0) < 1e-4);
  }
  SUBCASE("per-row mean and variance against the direct oracle") {
    SplitMix64 rng(31);
    const Tensor x = random_tensor({6, 9}, rng.next_u64(), -4.0, 4.0);
    const Tensor y =
        layer_norm(x, Tensor::full({9}, 1.0), Tensor::zeros({9}));
    for (std::size_t i = 0; i < 6; ++i) {
      double mean = 0.0, var = 0.0;
      for (std::size_t j = 0; j < 9; ++j) mean += y(i, j);
      mean /= 9.0;
      for (std::size_t j = 0; j < 9; ++j)
        var += (y(i, j) - mean) * (y(i, j) - mean);
      var /= 9.0;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-4);
    }
  }
  SUBCASE("width-one features are rejected") {
    CHECK_THROWS_AS(layer_norm(Tensor::zeros({3, 1}), Tensor::full({1}, 1.0),
                               Tensor::zeros({1})),
                    DegenerateDimensionError);
  }
}

TEST_CASE("relu, gather, scatter, mse") {
  SUBCASE("relu clamps negatives") {
    const Tensor y = relu(Tensor::from_data({1, 3}, {-1.0, 0.0, 2.0}));
    CHECK(y.values()[0] == 0.0);
    CHECK(y.values()[1] == 0.0);
    CHECK(y.values()[2] == 2.0);
  }
  SUBCASE("gather then scatter accumulates duplicates") {
    const Tensor x = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    const Tensor picked = gather_rows(x, {2, 0});
    CHECK(picked(0, 0) == 5.0);
    CHECK(picked(1, 0) == 1.0);
    const Tensor ones = Tensor::full({2, 2}, 1.0);
    const Tensor out = scatter_add_rows(Tensor::zeros({3, 2}), {0, 0}, ones);
    CHECK(out(0, 0) == 2.0);  // both rows landed on row 0
    CHECK(out(1, 0) == 0.0);
  }
  SUBCASE("gather followed by scatter on distinct indices reconstructs") {
    SplitMix64 rng(12);
    const Tensor x = random_tensor({5, 3}, rng.next_u64());
    const std::vector<std::size_t> idx{3, 0, 4};
    const Tensor back =
        scatter_add_rows(Tensor::zeros({5, 3}), idx, gather_rows(x, idx));
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < 3; ++j) CHECK(back(i, j) == x(i, j));
  }
  SUBCASE("out-of-range index names the value") {
    const Tensor x = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH_AS(gather_rows(x, {7}), doctest::Contains("7"),
                         IndexError);
  }
  SUBCASE("mse of a tensor with itself is zero") {
    const Tensor x = random_tensor({4, 4}, 9);
    CHECK(mse_loss(x, x).item() == 0.0);
  }
  SUBCASE("mse hand value") {
    const Tensor a = Tensor::from_data({1, 2}, {1.0, 3.0});
    const Tensor b = Tensor::from_data({1, 2}, {0.0, 1.0});
    CHECK(mse_loss(a, b).item() == doctest::Approx(2.5));  // (1 + 4) / 2
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum of a tensor gives all-ones gradient") {
    Tensor w = random_tensor({3, 4}, 21).set_requires_grad(true);
    Graph graph;
    GraphScope scope(graph);
    graph.backward(sum_all(w));
    for (double g : w.grad()) CHECK(g == 1.0);
  }
  SUBCASE("scalar mse matches the closed form 2x(wx - y)") {
    Tensor w = Tensor::from_data({1, 1}, {0.7}, true);
    const Tensor x = Tensor::from_data({1, 1}, {1.3});
    const Tensor y = Tensor::from_data({1, 1}, {0.2});
    Graph graph;
    GraphScope scope(graph);
    graph.backward(mse_loss(matmul(w, x), y));
    const double expect = 2.0 * 1.3 * (0.7 * 1.3 - 0.2);
    CHECK(std::abs(w.grad()[0] - expect) < 1e-12);
  }
  SUBCASE("repeated backward accumulates") {
    Tensor w = random_tensor({2, 2}, 5).set_requires_grad(true);
    Graph graph;
    GraphScope scope(graph);
    const Tensor loss = sum_all(w);
    graph.backward(loss);
    graph.backward(loss);
    for (double g : w.grad()) CHECK(g == 2.0);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor w = random_tensor({2, 2}, 5).set_requires_grad(true);
    Graph graph;
    GraphScope scope(graph);
    const Tensor y = scale(w, 2.0);
    CHECK_THROWS_AS(graph.backward(y), ContractError);
  }
}

TEST_CASE("finite differences on a random two-layer net") {
  Tensor x = random_tensor({5, 4}, 100, -0.8, 0.8);
  Tensor w1 = random_tensor({4, 6}, 101, -0.7, 0.7);
  Tensor b1 = random_tensor({6}, 102, -0.2, 0.2);
  Tensor w2 = random_tensor({6, 3}, 103, -0.7, 0.7);
  Tensor b2 = random_tensor({3}, 104, -0.2, 0.2);
  const Tensor target = random_tensor({5, 3}, 105);
  auto loss = [&] {
    const Tensor hidden = relu(add_row_bias(matmul(x, w1), b1));
    return mse_loss(add_row_bias(matmul(hidden, w2), b2), target);
  };
  CHECK(grad_check({x, w1, b1, w2, b2}, loss) < 1e-4);
}

TEST_CASE("finite differences on the remaining ops") {
  SUBCASE("softmax_rows") {
    Tensor x = random_tensor({3, 5}, 200, -2.0, 2.0);
    const Tensor seed = random_tensor({3, 5}, 201);
    auto loss = [&] { return mse_loss(softmax_rows(x), seed); };
    CHECK(grad_check({x}, loss) < 1e-4);
  }
  SUBCASE("layer_norm") {
    Tensor x = random_tensor({4, 6}, 202, -2.0, 2.0);
    Tensor gain = random_tensor({6}, 203, 0.5, 1.5);
    Tensor bias = random_tensor({6}, 204, -0.5, 0.5);
    const Tensor seed = random_tensor({4, 6}, 205);
    auto loss = [&] { return mse_loss(layer_norm(x, gain, bias), seed); };
    CHECK(grad_check({x, gain, bias}, loss) < 1e-4);
  }
  SUBCASE("gather, scatter, scale_rows, transpose, slice, concat") {
    Tensor a = random_tensor({4, 3}, 206);
    Tensor b = random_tensor({2, 3}, 207);
    Tensor s = random_tensor({2, 1}, 208, 0.2, 1.0);
    const Tensor seed = random_tensor({4, 5}, 209);
    auto loss = [&] {
      const Tensor picked = gather_rows(a, {1, 3, 0, 2});
      const Tensor scattered =
          scatter_add_rows(a, {0, 0}, scale_rows(b, s));
      const Tensor wide =
          concat_cols({scattered, slice_cols(transpose(transpose(picked)),
                                             1, 2)});
      return mse_loss(wide, seed);
    };
    CHECK(grad_check({a, b, s}, loss) < 1e-4);
  }
  SUBCASE("tanh and scale") {
    Tensor x = random_tensor({3, 3}, 210, -1.5, 1.5);
    auto loss = [&] { return sum_all(tanh(scale(x, 0.7))); };
    CHECK(grad_check({x}, loss) < 1e-4);
  }
}

TEST_CASE("operations are deterministic and finite") {
  const Tensor a = random_tensor({6, 6}, 300, -5.0, 5.0);
  const Tensor b = random_tensor({6, 6}, 301, -5.0, 5.0);
  const Tensor c1 = matmul(a, b);
  const Tensor c2 = matmul(a, b);
  CHECK(std::memcmp(c1.values().data(), c2.values().data(),
                    c1.numel() * sizeof(double)) == 0);
  const Tensor s1 = softmax_rows(a);
  const Tensor s2 = softmax_rows(a);
  CHECK(std::memcmp(s1.values().data(), s2.values().data(),
                    s1.numel() * sizeof(double)) == 0);
  CHECK(c1.all_finite());
  CHECK(s1.all_finite());
}
