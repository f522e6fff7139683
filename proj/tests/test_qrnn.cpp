#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "loco/optim.hpp"
#include "loco/qrnn.hpp"

using namespace loco;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::matrix(r, c);
  for (double& x : t.data()) x = n(rng);
  return t;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain loops over one sequence, written against the parameter layout only.
Tensor scalar_layer(const Tensor& x, const Tensor& W, const Tensor& b, const QrnnLayerSpec& s,
                    std::vector<double> c) {
  const std::size_t T = x.rows(), H = s.hidden, D = s.input_dim;
  Tensor h = Tensor::matrix(T, H);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> pre(b.data().begin(), b.data().end());
    for (std::size_t j = 0; j < s.kernel; ++j) {
      const long src = static_cast<long>(t) - static_cast<long>(s.kernel - 1 - j);
      if (src < 0) continue;
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t g = 0; g < pre.size(); ++g) pre[g] += x(src, d) * W(j * D + d, g);
      }
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double z = std::tanh(pre[k]);
      const double f = sigm(pre[H + k]);
      c[k] = f * c[k] + (1.0 - f) * z;
      h(t, k) = s.pooling == Pooling::kFo ? sigm(pre[2 * H + k]) * c[k] : c[k];
    }
  }
  return h;
}

std::vector<Var> rows_of(Graph& g, const Tensor& x) {
  Var all = g.input(x);
  std::vector<Var> xs;
  for (std::size_t t = 0; t < x.rows(); ++t) xs.push_back(g.slice(all, 0, t, t + 1));
  return xs;
}

}  // namespace

TEST_CASE("layer forward equals a scalar recurrence") {
  std::mt19937_64 rng(3);
  for (Pooling pooling : {Pooling::kFo, Pooling::kF}) {
    for (std::size_t kernel : {1u, 2u, 3u}) {
      QrnnLayerSpec spec{4, 5, kernel, pooling};
      ParameterSet p;
      init_qrnn_layer(p, "q", spec, rng);
      p.value("q.b") = random_matrix(1, spec.gate_count() * 5, rng, 0.5);
      const Tensor x = random_matrix(9, 4, rng);
      const Tensor c0 = random_matrix(1, 5, rng, 0.3);
      auto [h, cell] = qrnn_layer_forward(x, p, "q", spec, c0);
      const Tensor oracle =
          scalar_layer(x, p.value("q.W"), p.value("q.b"), spec, {c0.data().begin(), c0.data().end()});
      for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("saturated forget gate carries the initial cell") {
  std::mt19937_64 rng(4);
  QrnnLayerSpec spec{3, 4, 2, Pooling::kFo};
  ParameterSet p;
  init_qrnn_layer(p, "q", spec, rng);
  for (std::size_t k = 0; k < 4; ++k) p.value("q.b")[4 + k] = 40.0;
  const Tensor x = random_matrix(30, 3, rng, 0.5);
  const Tensor c0 = random_matrix(1, 4, rng);
  auto [h, cell] = qrnn_layer_forward(x, p, "q", spec, c0);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::fabs(cell[k] - c0[k]) <= 1e-8);
}

TEST_CASE("closed forget gate gives the memoryless candidate") {
  std::mt19937_64 rng(5);
  QrnnLayerSpec spec{3, 4, 2, Pooling::kF};
  ParameterSet p;
  init_qrnn_layer(p, "q", spec, rng);
  auto& W = p.value("q.W");
  for (std::size_t r = 0; r < W.rows(); ++r) {
    for (std::size_t k = 4; k < 8; ++k) W(r, k) = 0.0;
  }
  for (std::size_t k = 4; k < 8; ++k) p.value("q.b")[k] = -60.0;
  const Tensor x = random_matrix(6, 3, rng);
  auto [h, cell] = qrnn_layer_forward(x, p, "q", spec, random_matrix(1, 4, rng));
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t k = 0; k < 4; ++k) {
      double z = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        if (t + j < 1) continue;
        for (std::size_t d = 0; d < 3; ++d) z += x(t + j - 1, d) * W(j * 3 + d, k);
      }
      CHECK(h(t, k) == doctest::Approx(std::tanh(z)).epsilon(1e-12));
    }
  }
}

TEST_CASE("layers are causal") {
  std::mt19937_64 rng(6);
  QrnnLayerSpec spec{2, 3, 3, Pooling::kFo};
  ParameterSet p;
  init_qrnn_layer(p, "q", spec, rng);
  const Tensor x = random_matrix(8, 2, rng);
  const Tensor c0 = Tensor::matrix(1, 3);
  const Tensor base = qrnn_layer_forward(x, p, "q", spec, c0).first;
  for (std::size_t s = 0; s < 8; ++s) {
    Tensor y = x;
    y(s, 0) += 1.0;
    y(s, 1) -= 0.7;
    const Tensor h = qrnn_layer_forward(y, p, "q", spec, c0).first;
    for (std::size_t t = 0; t < 8; ++t) {
      double diff = 0.0;
      for (std::size_t k = 0; k < 3; ++k) diff = std::max(diff, std::fabs(h(t, k) - base(t, k)));
      if (t < s) CHECK(diff == 0.0);
      if (t == s) CHECK(diff > 0.0);
    }
  }
}

TEST_CASE("parallel and sequential convolution agree") {
  std::mt19937_64 rng(7);
  QrnnLayerSpec spec{3, 6, 2, Pooling::kFo};
  ParameterSet p;
  init_qrnn_layer(p, "q", spec, rng);
  const Tensor x = random_matrix(3 * 10, 3, rng);  // batch 3, 10 steps, time-major
  Graph g;
  ParamScope scope(g, p);
  Var all = g.input(x);
  std::vector<Var> xs;
  for (std::size_t t = 0; t < 10; ++t) xs.push_back(g.slice(all, 0, 3 * t, 3 * t + 3));
  Var c0 = g.input(random_matrix(3, 6, rng));
  auto a = qrnn_layer(scope, "q", spec, xs, c0, ConvMode::kParallel);
  auto b = qrnn_layer(scope, "q", spec, xs, c0, ConvMode::kSequential);
  for (std::size_t t = 0; t < 10; ++t) {
    const Tensor& ha = g.value(a.hidden[t]);
    const Tensor& hb = g.value(b.hidden[t]);
    for (std::size_t i = 0; i < ha.size(); ++i) CHECK(std::fabs(ha[i] - hb[i]) <= 1e-12);
  }
}

TEST_CASE("layer input checks") {
  std::mt19937_64 rng(8);
  QrnnLayerSpec spec{3, 2, 2, Pooling::kFo};
  ParameterSet p;
  init_qrnn_layer(p, "q", spec, rng);
  CHECK_THROWS_AS(qrnn_layer_forward(Tensor::matrix(4, 2), p, "q", spec, Tensor::matrix(1, 2)),
                  ShapeError);
  Graph g;
  ParamScope scope(g, p);
  std::vector<Var> none;
  CHECK_THROWS_AS(qrnn_layer(scope, "q", spec, none, g.input(Tensor::matrix(1, 2))),
                  std::invalid_argument);
  std::vector<Var> xs{g.input(Tensor::matrix(1, 3))};
  CHECK_THROWS_AS(qrnn_layer(scope, "q", spec, xs, g.input(Tensor::matrix(1, 3))), ShapeError);
}

TEST_CASE("encoder-decoder gradients match finite differences") {
  std::mt19937_64 rng(9);
  for (auto cond : {DecoderConditioning::kInitialState, DecoderConditioning::kConcatInput}) {
    QrnnConfig cfg;
    cfg.input_dim = 3;
    cfg.target_dim = 2;
    cfg.hidden = 4;
    cfg.layers = 2;
    cfg.conditioning = cond;
    cfg.residual_output = cond == DecoderConditioning::kInitialState;
    QrnnEncoderDecoder net(cfg, "ed");
    ParameterSet p;
    net.init(p, rng);
    for (const auto& name : p.names()) {
      if (name.ends_with(".b")) p.value(name) = random_matrix(1, p.value(name).cols(), rng, 0.3);
    }
    const Tensor x = random_matrix(2 * 5, 3, rng);
    const Tensor seed = random_matrix(2, 2, rng);
    const Tensor target = random_matrix(2 * 4, 2, rng);
    auto build = [&](Graph& g) {
      ParamScope scope(g, p);
      Var all = g.input(x);
      std::vector<Var> xs;
      for (std::size_t t = 0; t < 5; ++t) xs.push_back(g.slice(all, 0, 2 * t, 2 * t + 2));
      auto ys = net.decode(scope, net.encode(scope, xs), g.input(seed), 4);
      Var pred = g.concat(ys, 0);
      Var d = g.sub(pred, g.input(target));
      return g.mean(g.hadamard(d, d));
    };
    const auto report = finite_diff_check(p, build, 1e-5);
    CHECK(report.elements_checked == p.element_count());
    CHECK(report.max_relative_error <= 1e-4);
  }
}

TEST_CASE("decoder feeds back its output unless teacher-forced") {
  std::mt19937_64 rng(10);
  QrnnConfig cfg;
  cfg.input_dim = 2;
  cfg.target_dim = 2;
  cfg.hidden = 3;
  cfg.layers = 1;
  QrnnEncoderDecoder net(cfg, "ed");
  ParameterSet p;
  net.init(p, rng);
  Graph g;
  ParamScope scope(g, p);
  std::vector<Var> xs = rows_of(g, random_matrix(4, 2, rng));
  Var ctx = net.encode(scope, xs);
  Var seed = g.input(random_matrix(1, 2, rng));
  const auto free = net.decode(scope, ctx, seed, 5);
  REQUIRE(free.size() == 5);

  // Teacher equal to the free-running outputs reproduces them.
  std::vector<Var> same;
  for (Var y : free) same.push_back(g.input(g.value(y)));
  const auto forced = net.decode(scope, ctx, seed, 5, &same);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(g.value(forced[j])[i] == doctest::Approx(g.value(free[j])[i]).epsilon(1e-13));
    }
  }
  // A different teacher changes later steps but never the first.
  std::vector<Var> other;
  for (int j = 0; j < 5; ++j) other.push_back(g.input(random_matrix(1, 2, rng)));
  const auto diverted = net.decode(scope, ctx, seed, 5, &other);
  CHECK(g.value(diverted[0]) == g.value(free[0]));
  CHECK_FALSE(g.value(diverted[1]) == g.value(free[1]));
  std::vector<Var> short_teacher(other.begin(), other.begin() + 2);
  CHECK_THROWS_AS(net.decode(scope, ctx, seed, 5, &short_teacher), std::invalid_argument);
  CHECK(net.decode(scope, ctx, seed, 0).empty());
}

TEST_CASE("context sets the decoder's initial cells") {
  std::mt19937_64 rng(11);
  QrnnConfig cfg;
  cfg.input_dim = 2;
  cfg.target_dim = 2;
  cfg.hidden = 3;
  cfg.layers = 2;
  QrnnEncoderDecoder net(cfg, "ed");
  ParameterSet p;
  net.init(p, rng);
  Graph g;
  ParamScope scope(g, p);
  Var seed = g.input(random_matrix(1, 2, rng));
  Var c1 = g.input(random_matrix(1, 6, rng));
  Var c2 = g.input(random_matrix(1, 6, rng));
  CHECK_FALSE(g.value(net.decode(scope, c1, seed, 1)[0]) == g.value(net.decode(scope, c2, seed, 1)[0]));
  CHECK_THROWS_AS(net.decode(scope, g.input(Tensor::matrix(1, 5)), seed, 1), ShapeError);
  CHECK(net.context_dim() == 6);
  CHECK(net.decoder_layer(0).input_dim == 2);
  cfg.conditioning = DecoderConditioning::kConcatInput;
  CHECK(QrnnEncoderDecoder(cfg, "x").decoder_layer(0).input_dim == 8);
}

TEST_CASE("residual output adds the decoder input") {
  std::mt19937_64 rng(12);
  QrnnConfig cfg;
  cfg.input_dim = 2;
  cfg.target_dim = 2;
  cfg.hidden = 3;
  cfg.layers = 1;
  cfg.residual_output = true;
  QrnnEncoderDecoder net(cfg, "ed");
  ParameterSet p;
  net.init(p, rng);
  p.value("ed.out.W") = Tensor::matrix(3, 2);
  p.value("ed.out.b") = Tensor::matrix(1, 2);
  Graph g;
  ParamScope scope(g, p);
  auto xs = rows_of(g, random_matrix(3, 2, rng));
  const Tensor s = random_matrix(1, 2, rng);
  const auto ys = net.decode(scope, net.encode(scope, xs), g.input(s), 4);
  for (Var y : ys) CHECK(g.value(y) == s);
}
