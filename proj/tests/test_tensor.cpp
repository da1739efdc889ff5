#include <doctest.h>

#include <cmath>
#include <random>

#include "camix/tensor.hpp"
#include "support.hpp"

using namespace camix;
using testsup::max_grad_rel_error;
using testsup::random_tensor;

namespace {

// Independent nested-loop convolution, used only as an oracle.
std::vector<double> naive_conv(const std::vector<double>& x,
                               const std::vector<double>& w, std::size_t nb,
                               std::size_t cin, std::size_t h, std::size_t wd,
                               std::size_t cout, std::size_t k,
                               std::size_t groups, std::size_t pad) {
  const std::size_t cgi = cin / groups, cgo = cout / groups;
  const std::size_t ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
  std::vector<double> y(nb * cout * ho * wo, 0.0);
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow) {
          double s = 0.0;
          for (std::size_t cl = 0; cl < cgi; ++cl)
            for (std::size_t ki = 0; ki < k; ++ki)
              for (std::size_t kj = 0; kj < k; ++kj) {
                const std::ptrdiff_t ih = (std::ptrdiff_t)(oh + ki) - (std::ptrdiff_t)pad;
                const std::ptrdiff_t iw = (std::ptrdiff_t)(ow + kj) - (std::ptrdiff_t)pad;
                if (ih < 0 || iw < 0 || ih >= (std::ptrdiff_t)h ||
                    iw >= (std::ptrdiff_t)wd)
                  continue;
                const std::size_t ci = (co / cgo) * cgi + cl;
                s += x[((n * cin + ci) * h + ih) * wd + iw] *
                     w[((co * cgi + cl) * k + ki) * k + kj];
              }
          y[((n * cout + co) * ho + oh) * wo + ow] = s;
        }
  return y;
}

}  // namespace

TEST_CASE("matmul identity and hand example") {
  Tensor eye({1, 0, 0, 1}, {2, 2});
  Tensor b({5, 6, 7, 8}, {2, 2});
  CHECK(matmul(eye, b).data() == b.data());

  Tensor a({1, 2, 3, 4}, {2, 2});
  Tensor ones({1, 1}, {2, 1});
  const auto r = matmul(a, ones).data();
  CHECK(r[0] == doctest::Approx(3));
  CHECK(r[1] == doctest::Approx(7));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a({1, 2, 3, 4}, {2, 2});
  Tensor b({1, 2, 3}, {3, 1});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("[2,2]"), std::invalid_argument);
}

TEST_CASE("gradient of sum(A*B) wrt A equals ones * B^T") {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng, 1.0, false);
  Tensor loss = sum(matmul(a, b));
  backward(loss);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (std::size_t c = 0; c < 2; ++c) expect += b.data()[j * 2 + c];
      CHECK(a.grad()[i * 4 + j] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("conv2d 1x1 identity weight passes input through") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({1, 3, 4, 4}, rng, 1.0, false);
  Tensor w = Tensor::zeros({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1.0;
  CHECK(conv2d(x, w, 1, 0).data() == x.data());
}

TEST_CASE("depthwise 3x3 all-ones kernel sums the 9-neighborhood") {
  Tensor x = Tensor::full({1, 1, 5, 5}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, 1, 1);
  CHECK(y.data()[2 * 5 + 2] == doctest::Approx(9.0));  // interior
  CHECK(y.data()[0] == doctest::Approx(4.0));          // corner
}

TEST_CASE("grouped conv2d equals the naive loop oracle") {
  std::mt19937_64 rng(11);
  for (std::size_t groups : {1u, 5u}) {
    Tensor x = random_tensor({2, 5, 6, 6}, rng, 1.0, false);
    Tensor w = random_tensor({10, 5 / groups, 3, 3}, rng, 1.0, false);
    Tensor y = conv2d(x, w, groups, 1);
    const auto oracle =
        naive_conv(x.data(), w.data(), 2, 5, 6, 6, 10, 3, groups, 1);
    REQUIRE(y.data().size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i)
      CHECK(y.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("grouped conv equals concatenation of per-group dense convs") {
  std::mt19937_64 rng(13);
  const std::size_t g = 2, cin = 8, cout = 4, h = 6, wd = 6;
  Tensor x = random_tensor({2, cin, h, wd}, rng, 1.0, false);
  Tensor w = random_tensor({cout, cin / g, 3, 3}, rng, 1.0, false);
  Tensor y = conv2d(x, w, g, 1);
  // Per-group: slice channels, run dense conv, compare.
  const std::size_t cgi = cin / g, cgo = cout / g;
  for (std::size_t grp = 0; grp < g; ++grp) {
    std::vector<double> xs(2 * cgi * h * wd), ws(cgo * cgi * 9);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < cgi; ++c)
        std::copy_n(x.data().begin() + ((n * cin + grp * cgi + c) * h * wd),
                    h * wd, xs.begin() + ((n * cgi + c) * h * wd));
    std::copy_n(w.data().begin() + grp * cgo * cgi * 9, cgo * cgi * 9,
                ws.begin());
    const auto ys = naive_conv(xs, ws, 2, cgi, h, wd, cgo, 3, 1, 1);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < cgo; ++c)
        for (std::size_t p = 0; p < h * wd; ++p)
          CHECK(y.data()[((n * cout + grp * cgo + c) * h * wd) + p] ==
                doctest::Approx(ys[(n * cgo + c) * h * wd + p])
                    .epsilon(1e-12));
  }
}

TEST_CASE("conv2d channel/group mismatch raises") {
  Tensor x = Tensor::zeros({1, 3, 4, 4});
  Tensor w = Tensor::zeros({4, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w, 2, 1), std::invalid_argument);
}

TEST_CASE("softmax trivial symmetry and single element") {
  Tensor x({0, 0, 0}, {1, 3});
  const auto y = softmax(x, 1).data();
  for (double v : y) CHECK(v == doctest::Approx(1.0 / 3.0));
  Tensor one({42.0}, {1, 1});
  CHECK(softmax(one, 1).data()[0] == doctest::Approx(1.0));
}

TEST_CASE("softmax is stable for large inputs") {
  Tensor x({1000.0, 1000.5}, {1, 2});
  const auto y = softmax(x, 1).data();
  // Matches the explicitly shifted computation.
  const double e = std::exp(0.5);
  CHECK(std::isfinite(y[0]));
  CHECK(y[0] == doctest::Approx(1.0 / (1.0 + e)));
  CHECK(y[1] == doctest::Approx(e / (1.0 + e)));
}

TEST_CASE("softmax rows are nonnegative and sum to 1") {
  std::mt19937_64 rng(17);
  Tensor x = random_tensor({4, 7}, rng, 5.0, false);
  const auto y = softmax(x, 1).data();
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(y[r * 7 + c] >= 0.0);
      s += y[r * 7 + c];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
  std::mt19937_64 rng(19);
  Tensor x = random_tensor({2, 3}, rng);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));

  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
}

TEST_CASE("backward rejects non-scalar loss and double invocation") {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({2, 2}, rng);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);
  Tensor loss = sum(y);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), std::runtime_error);
}

TEST_CASE("gradient checks per op against central differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 3}, rng);
    CHECK(max_grad_rel_error({a, b}, [&] {
            return sum(matmul(a, b));
          }) < 1e-4);

    Tensor x = random_tensor({2, 4, 5, 5}, rng);
    Tensor w = random_tensor({6, 2, 3, 3}, rng);
    CHECK(max_grad_rel_error({x, w}, [&] {
            return sum(mul(conv2d(x, w, 2, 1), conv2d(x, w, 2, 1)));
          }) < 1e-4);

    Tensor s = random_tensor({2, 5}, rng);
    Tensor t = random_tensor({2, 5}, rng);
    CHECK(max_grad_rel_error({s, t}, [&] {
            return sum(mul(softmax(s, 1), t));
          }) < 1e-4);

    Tensor g = random_tensor({3, 3}, rng);
    CHECK(max_grad_rel_error({g}, [&] { return sum(mul(gelu(g), g)); }) <
          1e-4);

    Tensor ln = random_tensor({2, 4, 2, 2}, rng);
    Tensor gamma = random_tensor({4}, rng);
    Tensor beta = random_tensor({4}, rng);
    Tensor probe = random_tensor({2, 4, 2, 2}, rng, 1.0, false);
    CHECK(max_grad_rel_error({ln, gamma, beta}, [&] {
            return sum(mul(layer_norm_chw(ln, gamma, beta), probe));
          }) < 1e-4);

    Tensor ce = random_tensor({4, 2}, rng);
    const std::vector<std::size_t> labels{0, 1, 1, 0};
    CHECK(max_grad_rel_error({ce}, [&] {
            return cross_entropy(ce, labels);
          }) < 1e-4);

    Tensor sh = random_tensor({1, 5, 4, 4}, rng);
    Tensor probe2 = random_tensor({1, 5, 4, 4}, rng, 1.0, false);
    CHECK(max_grad_rel_error({sh}, [&] {
            return sum(mul(shift5(sh), probe2));
          }) < 1e-4);
  }
}

TEST_CASE("shift5 group semantics") {
  // 5 channels, one per group; constant-1 images.
  Tensor x = Tensor::full({1, 5, 3, 3}, 1.0);
  const auto y = shift5(x).data();
  const std::size_t hw = 9;
  // group 0: shifted left -> last column zero
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(y[0 * hw + r * 3 + 2] == 0.0);
    CHECK(y[0 * hw + r * 3 + 0] == 1.0);
  }
  // group 4: identity
  for (std::size_t i = 0; i < hw; ++i) CHECK(y[4 * hw + i] == 1.0);
}

TEST_CASE("shift followed by opposite shift is identity on the interior") {
  std::mt19937_64 rng(29);
  Tensor x = random_tensor({1, 5, 6, 6}, rng, 1.0, false);
  Tensor z = shift5(x);
  const std::size_t hw = 36;
  // identity group untouched
  for (std::size_t i = 0; i < hw; ++i)
    CHECK(z.data()[4 * hw + i] == x.data()[4 * hw + i]);
  // left-shift group: every column moved by exactly one, so shifting the
  // result right recovers the interior
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c + 1 < 6; ++c)
      CHECK(z.data()[0 * hw + r * 6 + c] == x.data()[0 * hw + r * 6 + c + 1]);
  // up and down groups compose to identity away from the border rows
  for (std::size_t r = 1; r + 1 < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(z.data()[2 * hw + r * 6 + c] == x.data()[2 * hw + (r + 1) * 6 + c]);
      CHECK(z.data()[3 * hw + r * 6 + c] == x.data()[3 * hw + (r - 1) * 6 + c]);
    }
}

TEST_CASE("shift5 is norm non-expanding") {
  std::mt19937_64 rng(31);
  Tensor x = random_tensor({2, 10, 5, 5}, rng, 1.0, false);
  double nx = 0.0, ny = 0.0;
  const auto y = shift5(x).data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    nx += x.data()[i] * x.data()[i];
    ny += y[i] * y[i];
  }
  CHECK(ny <= nx + 1e-12);
}

TEST_CASE("shift5 rejects channel counts not divisible by 5") {
  CHECK_THROWS_AS(shift5(Tensor::zeros({1, 4, 3, 3})), std::invalid_argument);
}

TEST_CASE("patchify/unpatchify round-trips and has exact adjoints") {
  std::mt19937_64 rng(37);
  Tensor x = random_tensor({2, 3, 6, 6}, rng, 1.0, false);
  Tensor t = patchify(x, 3);
  CHECK(t.shape() == Shape{2, 4, 27});
  Tensor back = unpatchify(t, 3, 3, 6, 6);
  CHECK(back.data() == x.data());
}
