#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "slimkit/arch.hpp"
#include "slimkit/data.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/meters.hpp"
#include "slimkit/quantization.hpp"
#include "slimkit/svd.hpp"
#include "slimkit/train.hpp"

#include "helpers.hpp"

using namespace slimkit;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                     double scale = 2.0) {
  Matrix m(rows, cols);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : m.data) v = u(rng);
  return m;
}

double rank_r_error(const Matrix& a, const Matrix& approx) {
  return frobenius_norm(subtract(a, approx));
}

}  // namespace

TEST_CASE("svd: full-rank reconstruction is near exact") {
  auto rng = make_rng(1001);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 2 + trial % 15, cols = 2 + (trial * 7) % 15;
    const Matrix a = random_matrix(rng, rows, cols);
    const SvdResult s = svd(a);
    CHECK(rank_r_error(a, svd_reconstruct(s, std::min(rows, cols))) < 1e-8);
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
      CHECK(s.singular_values[i] >= 0.0);
      if (i > 0) CHECK(s.singular_values[i - 1] >= s.singular_values[i]);
    }
  }
}

TEST_CASE("svd: rank-1 outer product is reconstructed exactly at rank 1") {
  auto rng = make_rng(1002);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix a(6, 1), b(1, 4);
  for (double& v : a.data) v = u(rng);
  for (double& v : b.data) v = u(rng);
  const Matrix outer = matmul(a, b);
  const SvdResult s = svd(outer);
  CHECK(rank_r_error(outer, svd_reconstruct(s, 1)) < 1e-8);
  for (std::size_t i = 1; i < s.singular_values.size(); ++i) {
    CHECK(s.singular_values[i] < 1e-10);
  }
}

TEST_CASE("svd: truncation beats 1000 random same-rank candidates") {
  // Sampling variant of the minimum-error property of the truncated
  // decomposition: no sampled rank-3 candidate may do better.
  auto rng = make_rng(1003);
  const Matrix a = random_matrix(rng, 8, 6);
  const SvdResult s = svd(a);
  const double svd_err = rank_r_error(a, svd_reconstruct(s, 3));
  const double scale = frobenius_norm(a);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix u = random_matrix(rng, 8, 3, scale);
    Matrix v = random_matrix(rng, 3, 6, 1.0);
    CHECK(svd_err <= rank_r_error(a, matmul(u, v)) + 1e-12);
  }
}

TEST_CASE("lowrank_factorize: full rank reproduces the effective weights") {
  auto rng = make_rng(1004);
  Model m = make_model(5, {6}, 3, rng());
  const std::size_t full = std::min(m.layers[0].out_dim(), m.layers[0].in_dim());
  const Model f = lowrank_factorize(m, 0, full);
  REQUIRE(f.layers[0].lowrank.has_value());
  const Matrix rebuilt = matmul(f.layers[0].lowrank->u, f.layers[0].lowrank->v);
  CHECK(frobenius_norm(subtract(rebuilt, hadamard(m.layers[0].weights, m.layers[0].mask))) <
        1e-8);
}

TEST_CASE("lowrank_factorize: rank bounds and cost accounting") {
  Model m = make_model(8, {6}, 3, 4);
  CHECK_THROWS_AS(lowrank_factorize(m, 0, 0), DomainError);
  CHECK_THROWS_AS(lowrank_factorize(m, 0, 7), DomainError);
  CHECK_THROWS_AS(lowrank_factorize(m, 5, 1), DomainError);

  const Model f = lowrank_factorize(m, 0, 2);
  // 8*6 dense -> 2*(8+6) factor entries.
  CHECK(param_count(f) == param_count(m) - 48 + 28);
}

TEST_CASE("inject_adapter: forward outputs are identical before and after") {
  auto rng = make_rng(1005);
  const Model m = testing::random_model(rng);
  const Dataset d = testing::random_dataset(rng, m, 10);
  const Matrix before = forward(m, d.inputs);
  const Model adapted = inject_adapter(m, 0, 2, 99);
  const Matrix after = forward(adapted, d.inputs);
  CHECK(max_abs_diff(before, after) < 1e-12);
  CHECK(adapted.layers[0].base_frozen);
}

TEST_CASE("inject_adapter: parameter count grows by rank * (in + out)") {
  Model m = make_model(7, {5}, 3, 6);
  const std::size_t rank = 2;
  const Model adapted = inject_adapter(m, 0, rank, 1);
  CHECK(param_count(adapted) == param_count(m) + rank * (7 + 5));
}

TEST_CASE("peft_finetune: base weights bit-identical, adapters move, loss drops") {
  DatasetSpec spec;
  spec.n = 200;
  spec.dims = 5;
  spec.classes = 2;
  spec.noise = 0.4;
  const DataBundle data = generate_dataset(spec, 1006);
  Model base = make_model(5, {8}, 2, 1006);
  Model adapted = inject_adapter(base, 0, 2, 7);
  adapted = inject_adapter(adapted, 1, 2, 8);

  const double loss_before = loss(adapted, data.validation, LossKind::kCrossEntropy);
  const Model tuned = peft_finetune(adapted, data.train, 30, 0.1);
  const double loss_after = loss(tuned, data.validation, LossKind::kCrossEntropy);

  for (std::size_t li = 0; li < tuned.layers.size(); ++li) {
    CHECK(max_abs_diff(tuned.layers[li].weights, adapted.layers[li].weights) == 0.0);
    for (std::size_t j = 0; j < tuned.layers[li].bias.size(); ++j) {
      CHECK(tuned.layers[li].bias[j] == adapted.layers[li].bias[j]);
    }
  }
  CHECK(loss_after < loss_before);
  bool adapter_moved = false;
  for (std::size_t li = 0; li < tuned.layers.size(); ++li) {
    if (max_abs_diff(tuned.layers[li].adapter->b, adapted.layers[li].adapter->b) > 0.0) {
      adapter_moved = true;
    }
  }
  CHECK(adapter_moved);
}

TEST_CASE("peft_finetune: zero epochs is the identity; nothing trainable fails") {
  const DataBundle data = generate_dataset(DatasetSpec{}, 1007);
  Model m = make_model(4, {5}, 2, 1007);
  CHECK(models_equal(peft_finetune(m, data.train, 0, 0.05), m));

  for (DenseLayer& l : m.layers) l.base_frozen = true;
  CHECK_THROWS_AS(peft_finetune(m, data.train, 1, 0.05), ConfigError);
}

TEST_CASE("resize: shape rebuild with fresh seeded weights") {
  Model m = make_model(6, {10, 10}, 3, 42);
  const Model same_shape = resize(m, 2, 10, 43);
  CHECK(same_shape.layers.size() == m.layers.size());
  CHECK(same_shape.layers[0].out_dim() == 10);
  CHECK_FALSE(models_equal(same_shape, m));  // new init, same architecture

  const Model halved = resize(m, 2, 5, 44);
  CHECK(param_count(halved) < param_count(m));

  const Model tiny = resize(m, 1, 1, 45);
  CHECK(param_count(tiny) == 6 * 1 + 1 + 1 * 3 + 3);
}

TEST_CASE("weight_share: cluster count equals alive weights keeps values") {
  auto rng = make_rng(1008);
  const Model m = testing::random_model(rng);
  const std::size_t alive = m.layers[0].alive_count();
  const Model shared = weight_share(m, 0, alive);
  CHECK(max_abs_diff(shared.layers[0].weights, m.layers[0].weights) < 1e-12);
  CHECK(shared.layers[0].shared_clusters == alive);
}

TEST_CASE("weight_share: one cluster collapses to the layer mean") {
  Model m = make_model(3, {}, 2, 5);
  m.layers[0].weights.data = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const Model shared = weight_share(m, 0, 1);
  for (double v : shared.layers[0].weights.data) CHECK(v == doctest::Approx(3.5));
}

TEST_CASE("weight_share: (1,1,1,5,5,5) with two clusters finds centers {1,5}") {
  // Exhaustive oracle over all 2-partitions of the 6 points agrees: the best
  // split is {1,1,1} | {5,5,5} with centers 1 and 5.
  Model m = make_model(3, {}, 2, 5);
  m.layers[0].weights.data = {1.0, 1.0, 1.0, 5.0, 5.0, 5.0};

  double best_cost = 1e300;
  std::vector<double> best_centers;
  const std::vector<double> values = m.layers[0].weights.data;
  for (std::size_t mask = 1; mask + 1 < (1u << 6); ++mask) {
    double s0 = 0, s1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (mask & (1u << i)) {
        s0 += values[i];
        ++n0;
      } else {
        s1 += values[i];
        ++n1;
      }
    }
    const double c0 = s0 / static_cast<double>(n0), c1 = s1 / static_cast<double>(n1);
    double cost = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      const double c = (mask & (1u << i)) ? c0 : c1;
      cost += (values[i] - c) * (values[i] - c);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_centers = {std::min(c0, c1), std::max(c0, c1)};
    }
  }
  REQUIRE(best_centers.size() == 2);
  CHECK(best_centers[0] == doctest::Approx(1.0));
  CHECK(best_centers[1] == doctest::Approx(5.0));

  const Model shared = weight_share(m, 0, 2);
  std::vector<double> got = shared.layers[0].weights.data;
  std::sort(got.begin(), got.end());
  CHECK(got.front() == doctest::Approx(1.0));
  CHECK(got.back() == doctest::Approx(5.0));
}

TEST_CASE("weight_share: distinct values bounded by the cluster count") {
  auto rng = make_rng(1009);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = testing::random_model(rng);
    const std::size_t alive = m.layers[0].alive_count();
    const std::size_t k = 1 + static_cast<std::size_t>(rng() % alive);
    const Model shared = weight_share(m, 0, k);
    std::vector<double> vals;
    for (std::size_t i = 0; i < shared.layers[0].weights.data.size(); ++i) {
      if (shared.layers[0].mask.data[i] != 0.0) {
        vals.push_back(shared.layers[0].weights.data[i]);
      }
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    CHECK(vals.size() <= k);
  }
}

TEST_CASE("weight_share: memory meter counts codebook plus index bits") {
  Model m = make_model(4, {}, 4, 3);  // 16 weights + 4 biases
  const Model shared = weight_share(m, 0, 4);
  // 4 centers * 8 bytes + 16 * ceil(log2 4)=2 bits / 8 + biases.
  CHECK(memory_bytes(shared) ==
        doctest::Approx(4 * 8.0 + 16 * 2.0 / 8.0 + 4 * 8.0));
}

TEST_CASE("peft_finetune: quantized adapter layer keeps the frozen base bit-identical") {
  const DataBundle data = generate_dataset(DatasetSpec{}, 1012);
  Model m = make_model(4, {6}, 2, 1012);
  m = inject_adapter(m, 0, 2, 3);
  m = inject_adapter(m, 1, 1, 4);
  // Quantize after injection: frozen dense weights land on the grid once.
  m = quantize_model(m, 8);
  const Model tuned = peft_finetune(m, data.train, 10, 0.05);
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    for (std::size_t i = 0; i < m.layers[li].weights.data.size(); ++i) {
      CHECK(tuned.layers[li].weights.data[i] == m.layers[li].weights.data[i]);
    }
    CHECK(tuned.layers[li].quant_bits == 8);
    CHECK_FALSE(tuned.layers[li].quant_simulated);
  }
}

TEST_CASE("weight_share: domain errors") {
  auto rng = make_rng(1010);
  const Model m = testing::random_model(rng);
  CHECK_THROWS_AS(weight_share(m, 0, 0), DomainError);
  CHECK_THROWS_AS(weight_share(m, 0, m.layers[0].alive_count() + 1), DomainError);
  const Model f = lowrank_factorize(m, 0, 1);
  CHECK_THROWS_AS(weight_share(f, 0, 1), DomainError);
}

TEST_CASE("arch rules pass the double-application determinism contract") {
  auto rng = make_rng(1011);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = testing::random_model(rng);
    const std::size_t rank = 1 + trial % 2;
    CHECK(models_equal(lowrank_factorize(m, 0, rank), lowrank_factorize(m, 0, rank)));
    CHECK(models_equal(inject_adapter(m, 0, rank, 5), inject_adapter(m, 0, rank, 5)));
    CHECK(models_equal(resize(m, 2, 4, 9), resize(m, 2, 4, 9)));
    const std::size_t k = 1 + trial;
    if (k <= m.layers[0].alive_count()) {
      CHECK(models_equal(weight_share(m, 0, k), weight_share(m, 0, k)));
    }
  }
}
