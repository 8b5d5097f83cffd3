#include <cmath>

#include "doctest.h"
#include "ste/nn/grad_check.hpp"

using namespace ste;
using namespace ste::nn;

namespace {

template <class Real>
Param<Real>& rand_param(ParamSet<Real>& ps, const std::string& name, const Shape& s, Rng& rng,
                        double lo = -1, double hi = 1) {
  Param<Real>& p = ps.add(name, s);
  for (auto& v : p.value.data) v = static_cast<Real>(rng.uniform(lo, hi));
  return p;
}

// Random fixed weights so every output entry carries a different gradient.
template <class Real>
Var weighted_sum(Graph<Real>& g, Var y, std::uint64_t seed) {
  Tensor<Real> w(g.value(y).shape);
  Rng rng(seed);
  for (auto& v : w.data) v = static_cast<Real>(rng.uniform(-1, 1));
  return g.sum(g.mul(y, g.input(w)));
}

template <class Real>
double check_op(const std::function<Var(Graph<Real>&, ParamSet<Real>&)>& op,
                const std::function<void(ParamSet<Real>&, Rng&)>& init, std::uint64_t seed = 1) {
  ParamSet<Real> ps;
  Rng rng(seed);
  init(ps, rng);
  const auto r = grad_check<Real>(ps, [&](Graph<Real>& g) { return weighted_sum(g, op(g, ps), 99); });
  CAPTURE(r.worst);
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("conv2d with a Dirac kernel is the identity") {
  ParamSet<float> ps;
  Rng rng(3);
  auto& x = rand_param(ps, "x", {2, 3, 5, 6}, rng);
  auto& w = ps.add("w", {3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) w.value.data[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0f;
  Graph<float> g;
  const Var y = g.conv2d(g.param(x), g.param(w), Var{}, 1);
  CHECK(g.value(y) == x.value);
}

TEST_CASE("lstm_cell with zero weights and state outputs zeros") {
  ParamSet<float> ps;
  Rng rng(4);
  auto& x = rand_param(ps, "x", {3, 5}, rng);
  ps.add("h", {3, 4});
  ps.add("c", {3, 4});
  ps.add("wx", {5, 16});
  ps.add("wh", {4, 16});
  ps.add("b", {16});
  Graph<float> g;
  const Var y = g.lstm_cell(g.param(x), g.param(ps.get("h")), g.param(ps.get("c")),
                            g.param(ps.get("wx")), g.param(ps.get("wh")), g.param(ps.get("b")));
  for (float v : g.value(y).data) CHECK(v == 0.0f);
}

TEST_CASE("shape mismatches and non-finite values are rejected") {
  Graph<float> g;
  const Var a = g.input(Tensor<float>({2, 3}, 1.0f));
  const Var b = g.input(Tensor<float>({3, 2}, 1.0f));
  CHECK_THROWS_AS(g.add(a, b), InvalidArgument);
  CHECK_THROWS_AS(g.mul(a, b), InvalidArgument);
  CHECK_THROWS_AS(g.l1(a, b), InvalidArgument);
  CHECK_THROWS_AS(g.matmul(a, a), InvalidArgument);
  CHECK_THROWS_AS(g.concat(a, b), InvalidArgument);
  const Var z = g.input(Tensor<float>({2, 3}, 0.0f));
  CHECK_THROWS_AS(g.div(a, z), NumericError);
  CHECK_THROWS_AS(g.input(Tensor<float>({1}, NAN)), NumericError);
}

TEST_CASE("relu and leaky relu take the negative-side slope at zero") {
  ParamSet<float> ps;
  auto& x = ps.add("x", {3});
  x.value.data = {-1.0f, 0.0f, 2.0f};
  Graph<float> g;
  const Var v = g.param(x);
  g.backward(g.add(g.sum(g.relu(v)), g.sum(g.leaky_relu(v))));
  CHECK(x.grad.data[0] == doctest::Approx(0.2));
  CHECK(x.grad.data[1] == doctest::Approx(0.2));
  CHECK(x.grad.data[2] == doctest::Approx(2.0));
}

// Finite differences need double storage: float rounding of the loss alone is
// ~1e-7 relative, which becomes ~1e-3 in a central difference at eps 1e-4.
TEST_CASE_TEMPLATE("every op matches finite differences", Real, double) {
  using PS = ParamSet<Real>;
  using G = Graph<Real>;
  const double tol = 1e-3;
  auto unary = [&](Shape s, double lo, double hi) {
    return [=](PS& ps, Rng& rng) { rand_param(ps, "a", s, rng, lo, hi); };
  };
  auto binary = [&](Shape s, double lo, double hi) {
    return [=](PS& ps, Rng& rng) {
      rand_param(ps, "a", s, rng, lo, hi);
      rand_param(ps, "b", s, rng, lo, hi);
    };
  };
  auto A = [](G& g, PS& ps) { return g.param(ps.get("a")); };
  auto B = [](G& g, PS& ps) { return g.param(ps.get("b")); };

  SUBCASE("conv2d stride 1 and 2") {
    // co = 2 takes the direct path at stride 1, co = 6 the im2col path.
    for (int stride : {1, 2})
      for (int k : {1, 3})
        for (int co : {2, 6}) {
        CAPTURE(stride);
        CAPTURE(k);
        CAPTURE(co);
        const double e = check_op<Real>(
            [&](G& g, PS& ps) { return g.conv2d(A(g, ps), g.param(ps.get("w")), g.param(ps.get("bias")), stride); },
            [&](PS& ps, Rng& rng) {
              rand_param(ps, "a", {2, 3, 6, 5}, rng);
              rand_param(ps, "w", {co, 3, k, k}, rng);
              rand_param(ps, "bias", {co}, rng);
            });
        CHECK(e <= tol);
      }
  }
  SUBCASE("upsample") {
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.upsample_nearest(A(g, ps), 2); },
                         unary({2, 2, 3, 4}, -1, 1)) <= tol);
  }
  SUBCASE("activations") {
    // Keep samples away from the relu kink.
    auto away = [](PS& ps, Rng& rng) {
      auto& p = rand_param(ps, "a", {3, 7}, rng, 0.05, 2);
      for (std::size_t i = 0; i < p.value.size(); i += 2) p.value.data[i] = -p.value.data[i];
    };
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.relu(A(g, ps)); }, away) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.leaky_relu(A(g, ps)); }, away) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.sigmoid(A(g, ps)); }, unary({3, 7}, -3, 3)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.tanh(A(g, ps)); }, unary({3, 7}, -2, 2)) <= tol);
  }
  SUBCASE("elementwise") {
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.add(A(g, ps), B(g, ps)); }, binary({4, 5}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.sub(A(g, ps), B(g, ps)); }, binary({4, 5}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.mul(A(g, ps), B(g, ps)); }, binary({4, 5}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.div(A(g, ps), B(g, ps)); }, binary({4, 5}, 0.5, 2)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.affine(A(g, ps), -1.5, 0.3); }, unary({4, 5}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.pow(A(g, ps), 2.0); }, unary({4, 5}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.pow(A(g, ps), 0.5); }, unary({4, 5}, 0.3, 2)) <= tol);
  }
  SUBCASE("concat") {
    CHECK(check_op<Real>(
              [&](G& g, PS& ps) { return g.concat(A(g, ps), g.param(ps.get("c"))); },
              [](PS& ps, Rng& rng) {
                rand_param(ps, "a", {2, 3, 2, 2}, rng);
                rand_param(ps, "c", {2, 1, 2, 2}, rng);
              }) <= tol);
  }
  SUBCASE("reductions") {
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.sum(A(g, ps)); }, unary({3, 4}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.mean(A(g, ps)); }, unary({3, 4}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.l1(A(g, ps), B(g, ps)); }, binary({3, 4}, -1, 1)) <= tol);
  }
  SUBCASE("matrix ops") {
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.matmul(A(g, ps), B(g, ps)); },
                         [](PS& ps, Rng& rng) {
                           rand_param(ps, "a", {3, 4}, rng);
                           rand_param(ps, "b", {4, 5}, rng);
                         }) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.add_rowvec(A(g, ps), B(g, ps)); },
                         [](PS& ps, Rng& rng) {
                           rand_param(ps, "a", {3, 4}, rng);
                           rand_param(ps, "b", {4}, rng);
                         }) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.slice_cols(A(g, ps), 1, 3); }, unary({3, 4}, -1, 1)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.log_softmax(A(g, ps)); }, unary({3, 5}, -2, 2)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.pick(A(g, ps), {0, 4, 2}); }, unary({3, 5}, -2, 2)) <= tol);
    CHECK(check_op<Real>([&](G& g, PS& ps) { return g.embedding(A(g, ps), {1, 0, 1, 3}); }, unary({4, 3}, -1, 1)) <= tol);
  }
  SUBCASE("lstm_cell") {
    const double e = check_op<Real>(
        [&](G& g, PS& ps) {
          return g.lstm_cell(A(g, ps), g.param(ps.get("h")), g.param(ps.get("c")), g.param(ps.get("wx")),
                             g.param(ps.get("wh")), g.param(ps.get("b")));
        },
        [](PS& ps, Rng& rng) {
          rand_param(ps, "a", {2, 3}, rng);
          rand_param(ps, "h", {2, 4}, rng);
          rand_param(ps, "c", {2, 4}, rng);
          rand_param(ps, "wx", {3, 16}, rng, -0.5, 0.5);
          rand_param(ps, "wh", {4, 16}, rng, -0.5, 0.5);
          rand_param(ps, "b", {16}, rng, -0.5, 0.5);
        });
    CHECK(e <= tol);
  }
}

TEST_CASE("linear layer with L1 loss passes grad_check at 1e-4") {
  ParamSet<double> ps;
  Rng rng(8);
  rand_param(ps, "w", {4, 3}, rng);
  rand_param(ps, "b", {3}, rng);
  Tensor<double> x({5, 4}), t({5, 3});
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  for (auto& v : t.data) v = rng.uniform(-1, 1);
  const auto r = grad_check<double>(ps, [&](Graph<double>& g) {
    return g.l1(g.add_rowvec(g.matmul(g.input(x), g.param(ps.get("w"))), g.param(ps.get("b"))), g.input(t));
  });
  CAPTURE(r.worst);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("float gradients agree with double gradients") {
  ParamSet<float> pf;
  Rng rng(21);
  rand_param(pf, "x", {2, 3, 8, 8}, rng, 0, 1);
  rand_param(pf, "w1", {6, 3, 3, 3}, rng, -0.3, 0.3);
  rand_param(pf, "b1", {6}, rng, -0.1, 0.1);
  rand_param(pf, "w2", {2, 6, 3, 3}, rng, -0.3, 0.3);
  const ParamSet<double> pd0 = cast_params<double>(pf);
  ParamSet<double> pd = pd0;
  auto loss = [](auto& g, auto& ps) {
    const Var h = g.leaky_relu(g.conv2d(g.param(ps.get("x")), g.param(ps.get("w1")), g.param(ps.get("b1")), 2));
    const Var y = g.sigmoid(g.conv2d(g.upsample_nearest(h, 2), g.param(ps.get("w2")), Var{}, 1));
    return g.mean(g.pow(y, 2.0));
  };
  Graph<float> gf;
  gf.backward(loss(gf, pf));
  Graph<double> gd;
  gd.backward(loss(gd, pd));
  for (std::size_t i = 0; i < pf.size(); ++i)
    for (std::size_t k = 0; k < pf.at(i).grad.size(); ++k) {
      const double a = pf.at(i).grad.data[k], b = pd.at(i).grad.data[k];
      CHECK(std::abs(a - b) <= 1e-4 * std::max(std::abs(b), 1e-3));
    }
}

TEST_CASE("backward is linear in the loss") {
  ParamSet<float> ps;
  Rng rng(12);
  rand_param(ps, "a", {3, 4}, rng);
  rand_param(ps, "b", {4, 2}, rng);
  auto grads = [&](int which) {
    Graph<float> g;
    const Var m = g.matmul(g.param(ps.get("a")), g.param(ps.get("b")));
    const Var l1 = g.sum(g.tanh(m));
    const Var l2 = g.mean(g.pow(m, 2.0));
    g.backward(which == 0 ? l1 : which == 1 ? l2 : g.add(l1, l2));
    std::vector<float> out = ps.get("a").grad.data;
    out.insert(out.end(), ps.get("b").grad.data.begin(), ps.get("b").grad.data.end());
    ps.zero_grad();
    return out;
  };
  const auto g1 = grads(0), g2 = grads(1), g12 = grads(2);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g12[i] - (g1[i] + g2[i])) <= 1e-6);
}

TEST_CASE("conv2d serial and parallel agree bit for bit") {
  ParamSet<float> ps;
  Rng rng(5);
  rand_param(ps, "x", {6, 4, 9, 11}, rng);
  rand_param(ps, "w", {5, 4, 3, 3}, rng);
  rand_param(ps, "b", {5}, rng);
  auto run = [&](Exec e) {
    Graph<float> g(e);
    const Var y = g.conv2d(g.param(ps.get("x")), g.param(ps.get("w")), g.param(ps.get("b")), 2);
    g.backward(weighted_sum(g, y, 4));
    auto out = g.value(y).data;
    for (const char* n : {"x", "w", "b"}) {
      out.insert(out.end(), ps.get(n).grad.data.begin(), ps.get(n).grad.data.end());
    }
    ps.zero_grad();
    return out;
  };
  CHECK(run(Exec::serial) == run(Exec::parallel));
  CHECK(run(Exec::parallel) == run(Exec::parallel));
}

TEST_CASE("adam") {
  SUBCASE("no gradients is a contract error") {
    ParamSet<float> ps;
    ps.add("w", {2});
    CHECK_THROWS_AS(adam_step(ps, 0.1), ContractError);
  }
  SUBCASE("zero gradients leave values unchanged and advance the step") {
    ParamSet<float> ps;
    auto& p = ps.add("w", {3});
    p.value.data = {1, 2, 3};
    p.grad = Tensor<float>({3});
    p.has_grad = true;
    adam_step(ps, 0.1);
    CHECK(p.value.data == std::vector<float>{1, 2, 3});
    CHECK(ps.step == 1);
    CHECK(!p.has_grad);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    ParamSet<double> ps;
    auto& p = ps.add("w", {4});
    p.grad = Tensor<double>({4});
    p.grad.data = {0.3, -2.0, 1e-3, -5e-2};
    p.has_grad = true;
    adam_step(ps, 0.01);
    const double sgn[4] = {1, -1, 1, -1};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(p.value.data[i] + 0.01 * sgn[i]) <= 1e-7);
  }
  SUBCASE("two steps match a scalar trace") {
    ParamSet<float> ps;
    auto& p = ps.add("w", {1});
    p.value.data = {0.5f};
    double w = 0.5, m = 0, v = 0;
    const double g[2] = {0.2, -0.7};
    for (int t = 1; t <= 2; ++t) {
      p.grad = Tensor<float>({1}, static_cast<float>(g[t - 1]));
      p.has_grad = true;
      adam_step(ps, 0.001);
      const double gg = static_cast<float>(g[t - 1]);
      m = 0.5 * m + 0.5 * gg;
      v = 0.9 * v + 0.1 * gg * gg;
      const double mh = m / (1 - std::pow(0.5, t)), vh = v / (1 - std::pow(0.9, t));
      w -= 0.001 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(p.value.data[0] - w) <= 1e-7);
    }
  }
  SUBCASE("non-finite gradient leaves the set untouched") {
    ParamSet<float> ps;
    auto& p = ps.add("w", {2});
    p.grad = Tensor<float>({2});
    p.grad.data[1] = INFINITY;
    p.has_grad = true;
    const auto h = ps.hash();
    CHECK_THROWS_AS(adam_step(ps, 0.1), NumericError);
    CHECK(ps.hash() == h);
    CHECK(ps.step == 0);
  }
}

TEST_CASE("param set copy, hash and cast") {
  ParamSet<float> ps;
  Rng rng(2);
  rand_param(ps, "a", {2, 2}, rng);
  ParamSet<float> cp = ps;
  CHECK(cp.hash() == ps.hash());
  cp.get("a").value.data[0] += 1;
  CHECK(cp.hash() != ps.hash());
  CHECK(cast_params<float>(cast_params<double>(ps)).hash() == ps.hash());
  CHECK_THROWS_AS(ps.add("a", {1}), InvalidArgument);
  CHECK_THROWS_AS(ps.get("zz"), InvalidArgument);
}
