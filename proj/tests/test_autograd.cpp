#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "phasor/graph.hpp"
#include "phasor/model.hpp"
#include "phasor/train.hpp"

using namespace phasor;

namespace {

ComplexTensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  ComplexTensor t(std::move(shape));
  for (auto& v : t.re) v = dist(rng);
  for (auto& v : t.im) v = dist(rng);
  return t;
}

double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

// Central finite differences over every entry of every leaf, compared
// against one analytic backward pass. loss_fn must recompute the forward
// from the leaves' current values.
void check_gradients(const std::vector<ComplexTensor*>& leaves,
                     const std::function<double()>& loss_fn,
                     const std::function<std::vector<ComplexTensor>()>& grad_fn,
                     double h = 1e-5, double tol = 1e-4) {
  const std::vector<ComplexTensor> analytic = grad_fn();
  REQUIRE(analytic.size() == leaves.size());
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    for (int plane = 0; plane < 2; ++plane) {
      std::vector<double>& data = plane == 0 ? leaves[p]->re : leaves[p]->im;
      const std::vector<double>& grad = plane == 0 ? analytic[p].re : analytic[p].im;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double keep = data[i];
        data[i] = keep + h;
        const double up = loss_fn();
        data[i] = keep - h;
        const double down = loss_fn();
        data[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        INFO("leaf ", p, " plane ", plane, " index ", i, " fd=", fd, " analytic=", grad[i]);
        CHECK(rel_err(fd, grad[i]) < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("relu2 pointwise derivative is 2·max(0,x)") {
  ComplexTensor x({2});
  x.re = {3.0, -1.0};
  x.im = {0.5, -2.0};
  Graph g;
  const auto xid = g.param(&x);
  const auto loss = g.sum(g.relu2(xid));
  g.backward(loss);
  const ComplexTensor& dx = g.grad(xid);
  CHECK(dx.re[0] == 6.0);
  CHECK(dx.re[1] == 0.0);
  CHECK(dx.im[0] == 1.0);
  CHECK(dx.im[1] == 0.0);
}

TEST_CASE("hermitian matmul backward formula and finite differences") {
  std::mt19937_64 rng(1);
  ComplexTensor x = random_tensor({2, 3}, rng);
  ComplexTensor w = random_tensor({3, 2}, rng);

  // With a sum loss the upstream gradient is all-ones on both planes;
  // dL/dx_re must equal (G_re)·W_reᵀ + (G_im)·W_imᵀ row by row.
  Graph g;
  const auto xid = g.param(&x);
  const auto wid = g.param(&w);
  g.backward(g.sum(g.linear(xid, wid, Mode::full_precision)));
  const ComplexTensor& dx = g.grad(xid);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 3; ++t) {
      double want = 0.0;
      for (std::size_t j = 0; j < 2; ++j) want += w.re[t * 2 + j] + w.im[t * 2 + j];
      CHECK(dx.re[i * 3 + t] == doctest::Approx(want).epsilon(1e-12));
    }
  }

  const auto loss_fn = [&]() {
    Graph gg;
    return gg.scalar_value(gg.sum(gg.linear(gg.param(&x), gg.param(&w), Mode::full_precision)));
  };
  const auto grad_fn = [&]() {
    Graph gg;
    const auto a = gg.param(&x);
    const auto b = gg.param(&w);
    gg.backward(gg.sum(gg.linear(a, b, Mode::full_precision)));
    return std::vector<ComplexTensor>{gg.grad(a), gg.grad(b)};
  };
  check_gradients({&x, &w}, loss_fn, grad_fn);
}

TEST_CASE("elementwise ops and norms match finite differences") {
  std::mt19937_64 rng(2);

  SUBCASE("complex elementwise product") {
    ComplexTensor a = random_tensor({6}, rng);
    ComplexTensor b = random_tensor({6}, rng);
    const auto loss_fn = [&]() {
      Graph g;
      return g.scalar_value(g.sum(g.cmul(g.param(&a), g.param(&b))));
    };
    const auto grad_fn = [&]() {
      Graph g;
      const auto ai = g.param(&a);
      const auto bi = g.param(&b);
      g.backward(g.sum(g.cmul(ai, bi)));
      return std::vector<ComplexTensor>{g.grad(ai), g.grad(bi)};
    };
    check_gradients({&a, &b}, loss_fn, grad_fn);
  }

  SUBCASE("component-wise rmsnorm with gains") {
    ComplexTensor x = random_tensor({3, 4}, rng);
    ComplexTensor gain = random_tensor({4}, rng);
    const double eps = 1e-6;
    // relu2 downstream makes the loss depend nonlinearly on the norm.
    const auto loss_fn = [&]() {
      Graph g;
      return g.scalar_value(g.sum(g.relu2(g.rmsnorm(g.param(&x), g.param(&gain), eps))));
    };
    const auto grad_fn = [&]() {
      Graph g;
      const auto xi = g.param(&x);
      const auto gi = g.param(&gain);
      g.backward(g.sum(g.relu2(g.rmsnorm(xi, gi, eps))));
      return std::vector<ComplexTensor>{g.grad(xi), g.grad(gi)};
    };
    check_gradients({&x, &gain}, loss_fn, grad_fn);
  }

  SUBCASE("rope rotation") {
    ComplexTensor x = random_tensor({3, 2, 4}, rng);
    const std::vector<std::size_t> pos = {0, 5, 11};
    const auto loss_fn = [&]() {
      Graph g;
      return g.scalar_value(g.sum(g.relu2(g.rope(g.param(&x), pos, 100.0))));
    };
    const auto grad_fn = [&]() {
      Graph g;
      const auto xi = g.param(&x);
      g.backward(g.sum(g.relu2(g.rope(xi, pos, 100.0))));
      return std::vector<ComplexTensor>{g.grad(xi)};
    };
    check_gradients({&x}, loss_fn, grad_fn);
  }
}

TEST_CASE("attention backward matches finite differences") {
  std::mt19937_64 rng(3);
  ComplexTensor q = random_tensor({4, 2, 3}, rng, 0.7);
  ComplexTensor k = random_tensor({4, 2, 3}, rng, 0.7);
  ComplexTensor v = random_tensor({4, 2, 3}, rng, 0.7);
  for (bool causal : {true, false}) {
    const auto loss_fn = [&]() {
      Graph g;
      return g.scalar_value(
          g.sum(g.relu2(g.attention(g.param(&q), g.param(&k), g.param(&v), causal, 6))));
    };
    const auto grad_fn = [&]() {
      Graph g;
      const auto qi = g.param(&q);
      const auto ki = g.param(&k);
      const auto vi = g.param(&v);
      g.backward(g.sum(g.relu2(g.attention(qi, ki, vi, causal, 6))));
      return std::vector<ComplexTensor>{g.grad(qi), g.grad(ki), g.grad(vi)};
    };
    check_gradients({&q, &k, &v}, loss_fn, grad_fn, 1e-5, 2e-4);
  }
}

TEST_CASE("score plus cross-entropy backward matches finite differences") {
  std::mt19937_64 rng(4);
  ComplexTensor h = random_tensor({3, 4}, rng);
  ComplexTensor head = random_tensor({5, 4}, rng);
  const std::vector<int> targets = {1, 4, 0};
  const auto loss_fn = [&]() {
    Graph g;
    return g.scalar_value(g.cross_entropy(g.score(g.param(&h), g.param(&head)), targets));
  };
  const auto grad_fn = [&]() {
    Graph g;
    const auto hi = g.param(&h);
    const auto wi = g.param(&head);
    g.backward(g.cross_entropy(g.score(hi, wi), targets));
    return std::vector<ComplexTensor>{g.grad(hi), g.grad(wi)};
  };
  check_gradients({&h, &head}, loss_fn, grad_fn);
}

TEST_CASE("STE passes gradients through the quantizers unchanged") {
  std::mt19937_64 rng(5);
  ComplexTensor x = random_tensor({2, 4}, rng);
  ComplexTensor w = random_tensor({4, 3}, rng);

  Graph qat;
  const auto xq_id = qat.param(&x);
  const auto wq_id = qat.param(&w);
  qat.backward(qat.sum(qat.linear(xq_id, wq_id, Mode::qat)));

  // Swap test: replace each quantize–dequantize pair by identity and
  // substitute the quantized values in the forward only.
  ComplexTensor xq = dequantize_activation(quantize_activation(x));
  ComplexTensor wq = dequantize_weights(quantize_weights(w));
  Graph full;
  const auto xf_id = full.param(&xq);
  const auto wf_id = full.param(&wq);
  full.backward(full.sum(full.linear(xf_id, wf_id, Mode::full_precision)));

  CHECK(qat.grad(xq_id).re == full.grad(xf_id).re);
  CHECK(qat.grad(xq_id).im == full.grad(xf_id).im);
  CHECK(qat.grad(wq_id).re == full.grad(wf_id).re);
  CHECK(qat.grad(wq_id).im == full.grad(wf_id).im);
}

TEST_CASE("full-model gradients match central finite differences") {
  ModelConfig cfg;
  cfg.vocab_size = 16;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_head = 4;
  cfg.d_ffn = 12;
  cfg.n_layers = 2;
  cfg.max_seq = 16;
  Model m = init_model(cfg, 11);
  const std::vector<int> ids = {3, 7, 1, 15, 2, 9};
  const std::vector<int> targets = {7, 1, 15, 2, 9, 4};

  const auto loss_fn = [&]() {
    ModelTape t = build_model_tape(m, ids, Mode::full_precision, &targets);
    return t.graph.scalar_value(t.loss);
  };
  ModelTape tape = build_model_tape(m, ids, Mode::full_precision, &targets);
  tape.graph.backward(tape.loss);

  std::vector<ComplexTensor*> params;
  for_each_param(m, [&](const std::string&, ComplexTensor& p) { params.push_back(&p); });

  std::mt19937_64 rng(6);
  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const ComplexTensor& analytic = tape.graph.grad(tape.params[p]);
    for (int probe = 0; probe < 3; ++probe) {
      const std::size_t i = rng() % params[p]->numel();
      const bool use_im = (rng() & 1) != 0;
      std::vector<double>& data = use_im ? params[p]->im : params[p]->re;
      const double keep = data[i];
      data[i] = keep + h;
      const double up = loss_fn();
      data[i] = keep - h;
      const double down = loss_fn();
      data[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = use_im ? analytic.im[i] : analytic.re[i];
      max_rel = std::max(max_rel, rel_err(fd, an));
    }
  }
  CHECK(max_rel < 1e-4);
}
