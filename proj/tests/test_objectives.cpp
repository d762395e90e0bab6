#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sarw/mixing.hpp"
#include "sarw/objectives.hpp"
#include "testutil.hpp"

using namespace sarw;
using namespace sarw::testutil;

namespace {

struct LossInstance {
  Tensor<double> t1_hat, t2_hat, t1, t2;
  Grid<uint8_t> selector;
  GridF weights;
  int mask_unit;

  LossInstance(int h, int w, int unit, Rng& rng) : mask_unit(unit) {
    t1_hat = random_tensor<double>({2, h, w}, rng);
    t2_hat = random_tensor<double>({2, h, w}, rng);
    t1 = random_tensor<double>({2, h, w}, rng);
    t2 = random_tensor<double>({2, h, w}, rng);
    weights = random_grid(h, w, rng, 1.0f, 2.718f);
    selector = Grid<uint8_t>(h, w);
    // one value per unit
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        Rng unit_rng = Rng::fork(99, (y / unit) * 1000 + (x / unit), 0);
        selector.at(y, x) = unit_rng.uniform() < 0.5 ? 0 : 1;
      }
  }
};

/// Scalar triple-loop reference: units, then slots, independent of the
/// production accumulation.
double oracle_loss(const LossInstance& in) {
  const int h = in.t1_hat.dim(1), w = in.t1_hat.dim(2), u = in.mask_unit;
  const int uy = h / u, ux = w / u;
  double total = 0.0;
  for (int n = 0; n < uy * ux; ++n) {
    double unit_sum = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int s = 0; s < u * u; ++s) {
        const int y = (n / ux) * u + s / u;
        const int x = (n % ux) * u + s % u;
        const size_t i = (static_cast<size_t>(c) * h + y) * w + x;
        const double d1 = in.t1_hat.data[i] - in.t1.data[i];
        const double d2 = in.t2_hat.data[i] - in.t2.data[i];
        const double m = in.selector.at(y, x);
        unit_sum += in.weights.at(y, x) * (d1 * d1 * (1.0 - m) + d2 * d2 * m);
      }
    total += unit_sum / (2.0 * u * u);
  }
  return total / (uy * ux);
}

}  // namespace

TEST_CASE("perfect reconstruction gives zero loss") {
  Rng rng(1);
  LossInstance in(64, 64, 32, rng);
  in.t1_hat = in.t1;
  in.t2_hat = in.t2;
  const auto out = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                     in.selector, in.weights, in.mask_unit);
  CHECK(out.loss == 0.0);
  for (double g : out.grad1.data) CHECK(g == 0.0);
  for (double g : out.grad2.data) CHECK(g == 0.0);
}

TEST_CASE("unit weights, one unit, unit error on the active term give loss 1") {
  const int u = 32;
  Tensor<double> t1({2, u, u}), t2({2, u, u}), t1h({2, u, u}), t2h({2, u, u});
  for (auto& x : t1h.data) x = 1.0;  // error 1 everywhere on term 1
  Grid<uint8_t> selector(u, u, 0);   // term 1 active on the single unit
  GridF weights(u, u, 1.0f);
  const auto out = weighted_dual_reconstruction_loss(t1h, t2h, t1, t2, selector, weights, u);
  CHECK(out.loss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss matches the scalar triple-loop oracle on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int unit = 32;
    const int h = (1 + static_cast<int>(rng.uniform_index(2))) * unit;
    const int w = (1 + static_cast<int>(rng.uniform_index(2))) * unit;
    LossInstance in(h, w, unit, rng);
    const auto out = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                       in.selector, in.weights, in.mask_unit);
    CHECK(rel_err(out.loss, oracle_loss(in)) < 1e-6);
  }
}

TEST_CASE("unit-weight loss equals the unweighted dual loss exactly") {
  Rng rng(11);
  LossInstance in(64, 96, 32, rng);
  in.weights = GridF(64, 96, 1.0f);
  const auto weighted = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                          in.selector, in.weights, in.mask_unit);
  const auto plain = dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2, in.selector,
                                              in.mask_unit);
  CHECK(weighted.loss == plain.loss);
  CHECK(weighted.grad1.data == plain.grad1.data);
  CHECK(weighted.grad2.data == plain.grad2.data);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(13);
  LossInstance in(64, 64, 32, rng);
  const auto out = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                     in.selector, in.weights, in.mask_unit);
  const double eps = 1e-5;
  for (int probe = 0; probe < 50; ++probe) {
    const size_t i = rng.uniform_index(in.t1_hat.numel());
    for (int which = 0; which < 2; ++which) {
      Tensor<double>& hat = which == 0 ? in.t1_hat : in.t2_hat;
      const Tensor<double>& grad = which == 0 ? out.grad1 : out.grad2;
      const double orig = hat.data[i];
      hat.data[i] = orig + eps;
      const double up = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                          in.selector, in.weights, in.mask_unit)
                            .loss;
      hat.data[i] = orig - eps;
      const double down = weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2,
                                                            in.selector, in.weights, in.mask_unit)
                              .loss;
      hat.data[i] = orig;
      const double fd = (up - down) / (2 * eps);
      CHECK(close(fd, grad.data[i], 1e-6, 1e-12));
    }
  }
}

TEST_CASE("raising a pixel's weight raises the loss iff its active error is nonzero") {
  Rng rng(17);
  LossInstance in(32, 32, 32, rng);
  // Pixel (3, 5) active on term 1: give it a known error, then a zero error.
  in.selector = Grid<uint8_t>(32, 32, 0);
  auto loss_with_weight = [&](float w) {
    GridF weights = in.weights;
    weights.at(3, 5) = w;
    return weighted_dual_reconstruction_loss(in.t1_hat, in.t2_hat, in.t1, in.t2, in.selector,
                                             weights, in.mask_unit)
        .loss;
  };
  const size_t i = static_cast<size_t>(0) * 32 * 32 + 3 * 32 + 5;
  in.t1_hat.data[i] = in.t1.data[i] + 0.5;
  in.t1_hat.data[i + 32 * 32] = in.t1.data[i + 32 * 32] + 0.5;  // second channel too
  CHECK(loss_with_weight(2.0f) > loss_with_weight(1.0f));
  in.t1_hat.data[i] = in.t1.data[i];
  in.t1_hat.data[i + 32 * 32] = in.t1.data[i + 32 * 32];
  CHECK(loss_with_weight(2.0f) == loss_with_weight(1.0f));
}

TEST_CASE("equal errors with weights e and 1 give gradients in exact ratio e") {
  const int u = 32;
  Tensor<double> t1({2, u, 2 * u}), t2({2, u, 2 * u});
  Tensor<double> t1h = t1, t2h = t2;
  Grid<uint8_t> selector(u, 2 * u, 0);
  GridF weights(u, 2 * u, 1.0f);
  weights.at(0, 0) = static_cast<float>(std::exp(1.0));
  weights.at(0, u) = 1.0f;
  t1h.data[0] = 0.25;       // pixel (0,0), channel 0
  t1h.data[u] = 0.25;       // pixel (0,u), channel 0 — same error, weight 1
  const auto out = weighted_dual_reconstruction_loss(t1h, t2h, t1, t2, selector, weights, u);
  CHECK(out.grad1.data[0] / out.grad1.data[u] ==
        doctest::Approx(static_cast<double>(weights.at(0, 0))).epsilon(1e-6));
}

TEST_CASE("loss validates shapes and weight range") {
  Rng rng(19);
  LossInstance in(64, 64, 32, rng);
  Tensor<double> wrong({2, 32, 64});
  CHECK_THROWS_AS(static_cast<void>(weighted_dual_reconstruction_loss(
                      wrong, in.t2_hat, in.t1, in.t2, in.selector, in.weights, 32)),
                  ShapeError);
  GridF bad_w = in.weights;
  bad_w.at(0, 0) = 3.5f;
  CHECK_THROWS_AS(static_cast<void>(weighted_dual_reconstruction_loss(
                      in.t1_hat, in.t2_hat, in.t1, in.t2, in.selector, bad_w, 32)),
                  RadiometryError);
  in.t1_hat.data[0] = std::nan("");
  CHECK_THROWS_AS(static_cast<void>(weighted_dual_reconstruction_loss(
                      in.t1_hat, in.t2_hat, in.t1, in.t2, in.selector, in.weights, 32)),
                  NumericError);
}

TEST_CASE("multilabel soft margin loss: zeros give ln 2 per class") {
  std::vector<double> logits(5, 0.0);
  std::vector<uint8_t> labels = {1, 0, 1, 0, 1};
  const auto out = multilabel_soft_margin_loss(logits, labels);
  CHECK(out.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("multilabel soft margin loss saturates for confident correct logits") {
  std::vector<double> logits = {20.0};
  std::vector<uint8_t> labels = {1};
  CHECK(multilabel_soft_margin_loss(logits, labels).loss < 1e-8);
}

TEST_CASE("multilabel soft margin loss matches the direct formula and finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_index(12));
    std::vector<double> logits(k);
    std::vector<uint8_t> labels(k);
    for (int i = 0; i < k; ++i) {
      logits[i] = rng.uniform(-8.0, 8.0);
      labels[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    const auto out = multilabel_soft_margin_loss(logits, labels);

    double expected = 0.0;
    for (int i = 0; i < k; ++i) {
      const double sigma = 1.0 / (1.0 + std::exp(-logits[i]));
      expected += labels[i] ? -std::log(sigma) : -std::log(1.0 - sigma);
    }
    expected /= k;
    CHECK(rel_err(out.loss, expected) < 1e-10);

    const double eps = 1e-5;
    for (int i = 0; i < k; ++i) {
      auto up = logits, down = logits;
      up[i] += eps;
      down[i] -= eps;
      const double fd = (multilabel_soft_margin_loss(up, labels).loss -
                         multilabel_soft_margin_loss(down, labels).loss) /
                        (2 * eps);
      CHECK(close(fd, out.grad[i], 1e-6, 1e-9));
    }
  }
}

TEST_CASE("binary cross entropy: equal logits give ln 2, saturation gives ~0") {
  CHECK(binary_cross_entropy_logits<double>({1.5, 1.5}, 0).loss ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(binary_cross_entropy_logits<double>({20.0, 0.0}, 0).loss < 1e-8);
}

TEST_CASE("binary cross entropy matches oracle and finite differences") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits = {rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)};
    const int label = rng.uniform() < 0.5 ? 0 : 1;
    const auto out = binary_cross_entropy_logits(logits, label);
    const double p = std::exp(logits[label]) / (std::exp(logits[0]) + std::exp(logits[1]));
    CHECK(rel_err(out.loss, -std::log(p)) < 1e-10);

    const double eps = 1e-5;
    for (int i = 0; i < 2; ++i) {
      auto up = logits, down = logits;
      up[i] += eps;
      down[i] -= eps;
      const double fd = (binary_cross_entropy_logits(up, label).loss -
                         binary_cross_entropy_logits(down, label).loss) /
                        (2 * eps);
      CHECK(close(fd, out.grad[i], 1e-6, 1e-9));
    }
  }
}
