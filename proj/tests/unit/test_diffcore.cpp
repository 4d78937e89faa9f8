#include "oracles.hpp"

#include "mmrecon/error.hpp"
#include "mmrecon/graph.hpp"
#include "mmrecon/kernels.hpp"
#include "mmrecon/physics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using mmr::ad::Array;
using mmr::ad::Graph;
using mmr::ad::Value;
using oracle::RandomArray;
using oracle::RelErr;

TEST_CASE("array construction validates shape and finiteness")
{
  CHECK_THROWS_AS(Array({2, 3}, std::vector<double>(5)), mmr::ShapeError);
  CHECK_THROWS_AS(Array({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), mmr::NumericalError);
  CHECK_THROWS_AS(Array({1}, {std::numeric_limits<double>::infinity()}), mmr::NumericalError);
  Array a({2, 3});
  CHECK(a.size() == 6);
  CHECK(mmr::ad::NumElements(a.shape()) == a.size());
}

TEST_CASE("fft then ifft returns the input")
{
  auto const x = RandomArray({2, 8, 8}, 11);
  Graph g;
  Value const v = g.ifft2c(g.fft2c(g.input(x)));
  CHECK(RelErr(g.value(v), x) <= 1e-12);
}

TEST_CASE("centered fft matches direct summation")
{
  for (auto [H, W] : {std::pair<std::size_t, std::size_t>{8, 8}, {6, 10}, {7, 5}, {16, 9}}) {
    auto const x = oracle::RandomImage(H, W, H * 100 + W);
    Array k = x.array();
    mmr::kernels::Fft2c(k.data(), 1, H, W);
    CHECK(RelErr(k, oracle::NaiveDft2c(x).array()) <= 1e-12);
    Array back = x.array();
    mmr::kernels::Ifft2c(back.data(), 1, H, W);
    CHECK(RelErr(back, oracle::NaiveDft2c(x, true).array()) <= 1e-12);
  }
}

TEST_CASE("fft of a centered delta is flat")
{
  mmr::ComplexImage x(8, 8);
  x.set(4, 4, 1.0);
  Array k = x.array();
  mmr::kernels::Fft2c(k.data(), 1, 8, 8);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(k[i] == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
    CHECK(std::abs(k[64 + i]) < 1e-15);
  }
}

TEST_CASE("relu")
{
  Graph g;
  Value const v = g.relu(g.input(Array({3}, {-1.0, 0.0, 2.0})));
  CHECK(g.value(v) == Array({3}, {0.0, 0.0, 2.0}));
}

TEST_CASE("conv2d with an identity kernel leaves the image unchanged")
{
  auto const x = RandomArray({1, 5, 5}, 3);
  Array w({1, 1, 3, 3});
  w[4] = 1.0;
  Graph g;
  CHECK(g.value(g.conv2d(g.input(x), g.input(w))) == x);
}

TEST_CASE("conv2d matches a direct zero-padded correlation")
{
  std::size_t const cin = 3, cout = 2, H = 6, W = 7, k = 3;
  auto const x = RandomArray({cin, H, W}, 5);
  auto const w = RandomArray({cout, cin, k, k}, 6);
  Graph g;
  auto const &out = g.value(g.conv2d(g.input(x), g.input(w)));
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        double s = 0.0;
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              long const sy = static_cast<long>(y + dy) - 1, sx = static_cast<long>(xx + dx) - 1;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) { continue; }
              s += w[((o * cin + c) * k + dy) * k + dx] * x[(c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx)];
            }
          }
        }
        CHECK(out[(o * H + y) * W + xx] == doctest::Approx(s).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("shape errors name the op and both shapes")
{
  Graph g;
  Value const a = g.input(Array({2, 3}));
  Value const b = g.input(Array({3, 2}));
  try {
    g.add(a, b);
    FAIL("expected a ShapeError");
  } catch (mmr::ShapeError const &e) {
    std::string const msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(g.conv2d(g.input(Array({2, 4, 4})), g.input(Array({1, 3, 3, 3}))), mmr::ShapeError);
  CHECK_THROWS_AS(g.fft2c(g.input(Array({3, 4, 4}))), mmr::ShapeError);
}

TEST_CASE("backward rejects a non-scalar loss")
{
  Graph g;
  Value const p = g.parameter(RandomArray({4}, 1));
  CHECK_THROWS_AS(g.backward(g.relu(p)), mmr::ShapeError);
}

TEST_CASE("gradient of sum(p*p) is exactly 2p")
{
  auto const p0 = RandomArray({4, 4}, 7);
  Graph g;
  Value const p = g.parameter(p0);
  auto const grads = g.backward(g.sum(g.mul(p, p)));
  REQUIRE(grads.size() == 1);
  for (std::size_t i = 0; i < p0.size(); ++i) { CHECK(grads[0][i] == 2.0 * p0[i]); }
}

TEST_CASE("unreachable parameters get zero gradients of the right shape")
{
  Graph g;
  Value const p = g.parameter(RandomArray({3}, 1));
  Value const q = g.parameter(RandomArray({2, 2}, 2));
  auto const grads = g.backward(g.sum(p));
  CHECK(grads[1].shape() == g.shape(q));
  CHECK(mmr::ad::Norm2(grads[1]) == 0.0);
}

TEST_CASE("fft l2 loss gradient agrees with central differences")
{
  Array p0 = RandomArray({2, 8, 8}, 21);
  auto const k = RandomArray({2, 8, 8}, 22);
  auto loss = [&](Graph &g, Value p) { return g.l2norm(g.sub(g.fft2c(p), g.input(k))); };
  Graph g;
  Value const p = g.parameter(p0);
  auto const grad = g.backward(loss(g, p))[0];

  mmr::Rng rng(23);
  std::uniform_int_distribution<std::size_t> pick(0, p0.size() - 1);
  for (int n = 0; n < 20; ++n) {
    std::size_t const i = pick(rng);
    double const fd = oracle::CentralDifference(
      [&] {
        Graph h;
        return h.value(loss(h, h.input(p0))).item();
      },
      p0[i]);
    CHECK(RelErr(grad[i], fd) <= 1e-5);
  }
}

namespace {

// 5 CG iterations on a fixed SPD system A x = b, starting from 0.
Value CgSolve(Graph &g, Array const &A, Value b, std::size_t n, int iters)
{
  auto matvec = [&](Value v) {
    // (Av)_i = <row_i(A), v>, assembled from unit vectors.
    Value acc = g.input(Array({n}));
    for (std::size_t i = 0; i < n; ++i) {
      Array e({n});
      e[i] = 1.0;
      Array row({n});
      for (std::size_t j = 0; j < n; ++j) { row[j] = A[i * n + j]; }
      acc = g.add(acc, g.scaleBy(g.input(e), g.dot(g.input(row), v)));
    }
    return acc;
  };
  Value x = g.input(Array({n}));
  Value r = b;
  Value p = r;
  Value rs = g.dot(r, r);
  for (int it = 0; it < iters; ++it) {
    Value const ap = matvec(p);
    Value const alpha = g.div(rs, g.dot(p, ap));
    x = g.add(x, g.scaleBy(p, alpha));
    r = g.sub(r, g.scaleBy(ap, alpha));
    Value const next = g.dot(r, r);
    p = g.add(r, g.scaleBy(p, g.div(next, rs)));
    rs = next;
  }
  return x;
}

} // namespace

TEST_CASE("gradient through unrolled CG with respect to the right-hand side")
{
  std::size_t const n = 8;
  auto const M = RandomArray({n, n}, 31);
  Array A({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) { s += M[k * n + i] * M[k * n + j]; }
      A[i * n + j] = s + (i == j ? 1.0 : 0.0);
    }
  }
  Array b0 = RandomArray({n}, 32);
  auto const target = RandomArray({n}, 33);
  auto loss = [&](Graph &g, Value b) { return g.l2norm(g.sub(CgSolve(g, A, b, n, 5), g.input(target))); };
  Graph g;
  Value const b = g.parameter(b0);
  auto const grad = g.backward(loss(g, b))[0];
  for (std::size_t i = 0; i < n; ++i) {
    double const fd = oracle::CentralDifference(
      [&] {
        Graph h;
        return h.value(loss(h, h.input(b0))).item();
      },
      b0[i]);
    CHECK(RelErr(grad[i], fd) <= 1e-5);
  }
}

namespace {

// <L x, y> versus <x, L^T y> for a linear graph op, the transpose obtained by
// differentiating <L x, y> with respect to x.
double AdjointGap(std::function<Value(Graph &, Value)> const &op, Array const &x, Array const &y)
{
  Graph g;
  Value const xv = g.parameter(x);
  Value const lx = op(g, xv);
  double const lhs = mmr::ad::Dot(g.value(lx), y);
  auto const lty = g.backward(g.dot(lx, g.input(y)))[0];
  double const rhs = mmr::ad::Dot(x, lty);
  return std::abs(lhs - rhs) / (mmr::ad::Norm2(g.value(lx)) * mmr::ad::Norm2(y));
}

} // namespace

TEST_CASE("linear primitives satisfy the adjoint identity")
{
  auto const coils = std::make_shared<Array const>(mmr::MakeCoilMaps(3, 8, 6, 4).array());
  auto const keep = oracle::RandomColumns(6, 3, 9).flags();
  auto const w = RandomArray({4, 2, 3, 3}, 5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto const x = RandomArray({2, 8, 6}, 100 + seed);
    auto const y = RandomArray({2, 8, 6}, 200 + seed);
    auto const yc = RandomArray({3, 2, 8, 6}, 300 + seed);
    CHECK(AdjointGap([](Graph &g, Value v) { return g.fft2c(v); }, x, y) <= 1e-10);
    CHECK(AdjointGap([](Graph &g, Value v) { return g.ifft2c(v); }, x, y) <= 1e-10);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.maskColumns(v, keep); }, x, y) <= 1e-10);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.coilExpand(v, coils); }, x, yc) <= 1e-10);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.coilCombine(v, coils); }, yc, y) <= 1e-10);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.coilGram(v, coils, keep); }, x, y) <= 1e-10);
    CHECK(AdjointGap([](Graph &g, Value v) { return g.scale(v, -2.5); }, x, y) <= 1e-10);
    auto const yf = RandomArray({4, 8, 6}, 400 + seed);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.conv2d(v, g.input(w)); }, x, yf) <= 1e-10);
    CHECK(AdjointGap([&](Graph &g, Value v) { return g.conv2d(g.input(x), v); }, w, yf) <= 1e-10);
  }
}

TEST_CASE("finite differences agree for every differentiable primitive")
{
  // Each primitive feeds a smooth scalar head; coordinates sampled at random.
  auto const coils = std::make_shared<Array const>(mmr::MakeCoilMaps(2, 6, 6, 4).array());
  auto const keep = oracle::RandomColumns(6, 4, 2).flags();
  Array p0 = RandomArray({2, 6, 6}, 41);
  Array w0 = RandomArray({3, 2, 3, 3}, 42, 0.3);
  Array b0 = RandomArray({3}, 43);
  Array s0 = Array::Scalar(0.7);
  auto const head = RandomArray({3, 6, 6}, 44);
  auto const headC = RandomArray({2, 6, 6}, 45);

  auto build = [&](Graph &g, bool trainable) {
    auto place = [&](Array const &a) { return trainable ? g.parameter(a) : g.input(a); };
    Value const p = place(p0), w = place(w0), b = place(b0), s = place(s0);
    Value h = g.biasAdd(g.conv2d(p, w), b);
    h = g.relu(h);
    Value t = g.mul(h, g.input(head));
    Value const e = g.exp(s);
    Value z = g.coilCombine(g.ifft2c(g.maskColumns(g.fft2c(g.coilExpand(p, coils)), keep)), coils);
    z = g.add(g.coilGram(z, coils, keep), g.scaleBy(z, e));
    Value const q = g.div(g.dot(z, g.input(headC)), g.add(g.l2norm(z), e));
    return g.add(g.add(g.sum(t), g.l1norm(g.sub(z, g.input(headC)))), g.scale(q, 3.0));
  };
  Graph g;
  auto const grads = g.backward(build(g, true));
  auto value = [&] {
    Graph h;
    return h.value(build(h, false)).item();
  };
  std::vector<Array *> params{&p0, &w0, &b0, &s0};
  mmr::Rng rng(46);
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, params[k]->size() - 1);
    for (int n = 0; n < 8; ++n) {
      std::size_t const i = pick(rng);
      double const fd = oracle::CentralDifference(value, (*params[k])[i]);
      CHECK(RelErr(grads[k][i], fd) <= 1e-5);
    }
  }
}

TEST_CASE("identical graphs give bit-identical values and gradients")
{
  auto run = [] {
    Graph g;
    Value const p = g.parameter(RandomArray({2, 8, 8}, 51));
    Value const w = g.parameter(RandomArray({4, 2, 3, 3}, 52));
    Value const loss = g.add(g.l1norm(g.fft2c(p)), g.l2norm(g.conv2d(g.relu(p), w)));
    auto grads = g.backward(loss);
    return std::make_pair(g.value(loss).item(), grads);
  };
  auto const a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("division by a zero scalar is a numerical error")
{
  Graph g;
  CHECK_THROWS_AS(g.div(g.input(Array::Scalar(1.0)), g.input(Array::Scalar(0.0))), mmr::NumericalError);
}
