#include <doctest.h>

#include <cmath>

#include "lnlab/attention.hpp"
#include "lnlab/error.hpp"
#include "lnlab/ffn.hpp"
#include "lnlab/rng.hpp"
#include "support/oracles.hpp"

using namespace lnlab;

namespace {

AttentionParams random_attention(std::size_t d, std::size_t k, std::size_t heads, RngStream& rng) {
  AttentionParams p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.heads.push_back({random_normal(k, d, 0.7, rng), random_normal(k, d, 0.7, rng),
                       random_normal(k, d, 0.7, rng), random_normal(d, k, 0.7, rng)});
  }
  return p;
}

FfnParams random_ffn(std::size_t d, std::size_t m, Activation act, RngStream& rng) {
  return {random_normal(m, d, 0.7, rng), random_normal(d, m, 0.7, rng), act};
}

// Loop-level evaluation of multi-head attention, written without the library's matmul.
Matrix scripted_attention(const Matrix& x, const AttentionParams& p) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  Matrix out(d, n);
  for (const auto& h : p.heads) {
    const std::size_t k = h.query.rows();
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<long double> logits(n);
      for (std::size_t l = 0; l < n; ++l) {
        long double s = 0.0L;
        for (std::size_t r = 0; r < k; ++r) {
          long double kx = 0.0L;
          long double qx = 0.0L;
          for (std::size_t c = 0; c < d; ++c) {
            kx += h.key(r, c) * x(c, l);
            qx += h.query(r, c) * x(c, j);
          }
          s += kx * qx;
        }
        logits[l] = s / std::sqrt(static_cast<long double>(k));
      }
      const auto a = oracle::softmax_ld(logits);
      for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t r = 0; r < k; ++r) {
          long double vx = 0.0L;
          for (std::size_t c = 0; c < d; ++c) vx += h.value(r, c) * x(c, l);
          for (std::size_t o = 0; o < d; ++o) out(o, j) += static_cast<double>(a[l] * h.out(o, r) * vx);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("uniform attention reproduces the column mean") {
  RngStream rng(1);
  AttentionParams p = random_attention(4, 3, 2, rng);
  for (auto& h : p.heads) {
    h.query = Matrix(3, 4);
    h.key = Matrix(3, 4);
  }
  const Matrix x = random_normal(4, 5, 1.0, rng);
  const Matrix y = attn_forward(x, p);
  Matrix expected(4, 5);
  for (const auto& h : p.heads) {
    const Matrix wvx = matmul(h.out, matmul(h.value, x));
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t l = 0; l < 5; ++l)
        for (std::size_t r = 0; r < 4; ++r) expected(r, j) += wvx(r, l) / 5.0;
  }
  CHECK(max_abs_diff(y, expected) <= 1e-14);
  for (std::size_t j = 1; j < 5; ++j)
    for (std::size_t r = 0; r < 4; ++r) CHECK(y(r, j) == y(r, 0));
}

TEST_CASE("single token attention is W V x") {
  RngStream rng(2);
  const AttentionParams p = random_attention(3, 2, 1, rng);
  const Matrix x = random_normal(3, 1, 1.0, rng);
  const Matrix ref = matmul(p.heads[0].out, matmul(p.heads[0].value, x));
  CHECK(max_abs_diff(attn_forward(x, p), ref) <= 1e-15);
}

TEST_CASE("hand attention instances") {
  AttentionParams eye;
  eye.heads.push_back({Matrix::identity(2), Matrix::identity(2), Matrix::identity(2), Matrix::identity(2)});
  const Matrix y = attn_forward(Matrix::identity(2), eye);
  CHECK(y(0, 0) == doctest::Approx(0.6697615493266569).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(0.3302384506733431).epsilon(1e-15));
  CHECK(y(0, 1) == doctest::Approx(0.3302384506733431).epsilon(1e-15));
  CHECK(y(1, 1) == doctest::Approx(0.6697615493266569).epsilon(1e-15));

  AttentionParams ints;
  ints.heads.push_back({Matrix::from_rows({{1, 0}, {0, 0}}), Matrix::from_rows({{0, 1}, {1, 0}}),
                        Matrix::from_rows({{1, 0}, {1, 1}}), Matrix::from_rows({{1, 2}, {0, 1}})});
  const Matrix z = attn_forward(Matrix::from_rows({{1, 2}, {-1, 0}}), ints);
  CHECK(z(0, 0) == doctest::Approx(4.348807746633284).epsilon(1e-14));
  CHECK(z(0, 1) == doctest::Approx(5.022148412534785).epsilon(1e-14));
  CHECK(z(1, 0) == doctest::Approx(1.3395230986533138).epsilon(1e-14));
  CHECK(z(1, 1) == doctest::Approx(1.6088593650139138).epsilon(1e-14));
}

TEST_CASE("attention matches a loop-level evaluation") {
  RngStream rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + t % 5;
    const std::size_t n = 1 + t % 4;
    const AttentionParams p = random_attention(d, 1 + t % 3, 1 + t % 2, rng);
    const Matrix x = random_normal(d, n, 1.0, rng);
    REQUIRE(oracle::rel_err(attn_forward(x, p), scripted_attention(x, p)) <= 1e-13);
  }
}

TEST_CASE("attention probabilities are column stochastic") {
  RngStream rng(4);
  const AttentionParams p = random_attention(4, 3, 1, rng);
  const Matrix a = attention_probs(random_normal(4, 5, 3.0, rng), p.heads[0]);
  for (std::size_t j = 0; j < 5; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < 5; ++l) s += a(l, j);
    CHECK(std::abs(s - 1.0) <= 1e-14);
  }
}

TEST_CASE("attention shape errors") {
  RngStream rng(5);
  const AttentionParams p = random_attention(4, 3, 1, rng);
  CHECK_THROWS_AS(attn_forward(Matrix(3, 2), p), DimensionError);
  AttentionParams bad = p;
  bad.heads[0].out = Matrix(4, 2);
  CHECK_THROWS_AS(bad.validate(4), DimensionError);
  CHECK_THROWS_AS(attn_jacobian(Matrix(4, 2), p, 0, 2), Error);
  CHECK_THROWS_AS(AttentionParams{}.key_dim(), Error);
}

TEST_CASE("zero attention weights give a zero jacobian") {
  RngStream rng(6);
  const AttentionParams p = random_attention(3, 2, 2, rng).zeros_like();
  const Matrix x = random_normal(3, 4, 1.0, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(max_abs(attn_jacobian(x, p, i, j)) == 0.0);
}

TEST_CASE("attention jacobian blocks match finite differences") {
  RngStream rng(7);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + t % 7;
    const std::size_t n = 1 + t % 5;
    const AttentionParams p = random_attention(d, 1 + t % 4, 1 + t % 2, rng);
    const Matrix x = random_normal(d, n, 1.0, rng);
    const Matrix fd = oracle::fd_state_jacobian([&](const Matrix& v) { return attn_forward(v, p); }, x);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const Matrix blk = attn_jacobian(x, p, i, j);
        Matrix ref(d, d);
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) ref(a, b) = fd(j * d + a, i * d + b);
        // Blocks can be tiny when attention saturates; measure against the whole Jacobian's scale.
        worst = std::max(worst, frobenius_norm(blk - ref) / std::max(frobenius_norm(fd), 1e-300));
      }
    }
    REQUIRE(oracle::rel_err(attn_jacobian_full(x, p), fd) <= 1e-6);
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("attention jacobian is bilinear in W and V") {
  RngStream rng(8);
  for (int t = 0; t < 20; ++t) {
    const AttentionParams p = random_attention(4, 3, 2, rng);
    const Matrix x = random_normal(4, 3, 1.0, rng);
    for (auto [c1, c2] : {std::pair{10.0, 10.0}, std::pair{1e3, 1e-2}, std::pair{-2.0, 0.5}}) {
      AttentionParams s = p;
      for (auto& h : s.heads) {
        h.out *= c1;
        h.value *= c2;
      }
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          Matrix ref = attn_jacobian(x, p, i, j);
          ref *= c1 * c2;
          REQUIRE(oracle::rel_err(attn_jacobian(x, s, i, j), ref) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("attention backward matches finite differences") {
  RngStream rng(9);
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = 2 + t % 4;
    const std::size_t n = 1 + t % 4;
    AttentionParams p = random_attention(d, 2, 1 + t % 2, rng);
    const Matrix x = random_normal(d, n, 1.0, rng);
    const Matrix g = random_normal(d, n, 1.0, rng);
    AttentionParams grads = p.zeros_like();
    const Matrix dx = attn_backward(x, p, g, grads);
    const Matrix ref = matmul(transpose(attn_jacobian_full(x, p)), Matrix::column(g.data()));
    REQUIRE(oracle::rel_err(dx.data(), ref.data()) <= 1e-10);
    auto loss = [&] { return inner(attn_forward(x, p), g); };
    for (std::size_t h = 0; h < p.heads.size(); ++h) {
      REQUIRE(oracle::rel_err(grads.heads[h].query.data(), oracle::fd_gradient(loss, p.heads[h].query.data())) <= 1e-6);
      REQUIRE(oracle::rel_err(grads.heads[h].key.data(), oracle::fd_gradient(loss, p.heads[h].key.data())) <= 1e-6);
      REQUIRE(oracle::rel_err(grads.heads[h].value.data(), oracle::fd_gradient(loss, p.heads[h].value.data())) <= 1e-6);
      REQUIRE(oracle::rel_err(grads.heads[h].out.data(), oracle::fd_gradient(loss, p.heads[h].out.data())) <= 1e-6);
    }
  }
}

TEST_CASE("ffn examples") {
  const Matrix x = Matrix::from_rows({{0.5, 2.0}, {1.0, 0.0}, {3.0, 0.25}});
  const FfnParams id{Matrix::identity(3), Matrix::identity(3), Activation::Relu};
  CHECK(ffn_forward(x, id) == x);
  const FfnParams zero{Matrix(4, 3), Matrix(3, 4, 1.0), Activation::Tanh};
  CHECK(max_abs(ffn_forward(x, zero)) == 0.0);
  CHECK_THROWS_AS(ffn_forward(Matrix(2, 2), id), DimensionError);

  const FfnParams tanh_id{Matrix::identity(3), Matrix::identity(3), Activation::Tanh};
  CHECK(max_abs_diff(ffn_jacobian(Matrix(3, 1), tanh_id, 0), Matrix::identity(3)) == 0.0);
}

TEST_CASE("ffn matches a scripted evaluation") {
  RngStream rng(10);
  for (Activation act : {Activation::Tanh, Activation::Relu}) {
    const FfnParams p = random_ffn(3, 5, act, rng);
    const Matrix x = random_normal(3, 4, 1.0, rng);
    const Matrix y = ffn_forward(x, p);
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t o = 0; o < 3; ++o) {
        long double acc = 0.0L;
        for (std::size_t h = 0; h < 5; ++h) {
          long double z = 0.0L;
          for (std::size_t c = 0; c < 3; ++c) z += p.w1(h, c) * x(c, j);
          const long double phi = act == Activation::Tanh ? std::tanh(z) : std::max(z, 0.0L);
          acc += p.w2(o, h) * phi;
        }
        CHECK(std::abs(y(o, j) - static_cast<double>(acc)) <= 1e-14);
      }
    }
  }
}

TEST_CASE("ffn jacobian matches finite differences") {
  RngStream rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + t % 7;
    const std::size_t n = 1 + t % 3;
    const FfnParams p = random_ffn(d, 1 + t % 8, Activation::Tanh, rng);
    const Matrix x = random_normal(d, n, 1.0, rng);
    for (std::size_t j = 0; j < n; ++j) {
      const Vector xj(x.col(j).begin(), x.col(j).end());
      const Matrix fd = oracle::fd_jacobian(
          [&](const Vector& v) {
            const Matrix y = ffn_forward(Matrix::column(v), p);
            return Vector(y.data().begin(), y.data().end());
          },
          xj);
      REQUIRE(oracle::rel_err(ffn_jacobian(x, p, j), fd) <= 1e-6);
    }
  }
}

TEST_CASE("relu ffn jacobian is bilinear and refuses the kink") {
  RngStream rng(12);
  FfnParams p = random_ffn(3, 4, Activation::Relu, rng);
  const Matrix x = random_normal(3, 2, 1.0, rng);
  FfnParams s = p;
  s.w1 *= 1e3;
  s.w2 *= 1e-2;
  Matrix ref = ffn_jacobian(x, p, 1);
  ref *= 10.0;
  CHECK(oracle::rel_err(ffn_jacobian(x, s, 1), ref) <= 1e-12);

  FfnParams kink{Matrix::identity(2), Matrix::identity(2), Activation::Relu};
  CHECK_THROWS_AS(ffn_jacobian(Matrix::from_rows({{0.0}, {1.0}}), kink, 0), DifferentiabilityError);
  CHECK_THROWS_AS(activate_derivative(Activation::Relu, 0.0), DifferentiabilityError);
  CHECK(activate_derivative(Activation::Tanh, 0.0) == 1.0);
  CHECK(parse_activation("relu") == Activation::Relu);
  CHECK(to_string(Activation::Tanh) == "tanh");
  CHECK_THROWS_AS(parse_activation("gelu"), Error);
}

TEST_CASE("ffn backward matches finite differences") {
  RngStream rng(13);
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = 2 + t % 4;
    FfnParams p = random_ffn(d, 1 + t % 6, Activation::Tanh, rng);
    const Matrix x = random_normal(d, 3, 1.0, rng);
    const Matrix g = random_normal(d, 3, 1.0, rng);
    FfnParams grads = p.zeros_like();
    const Matrix dx = ffn_backward(x, p, g, grads);
    for (std::size_t j = 0; j < 3; ++j) {
      const Vector ref = matvec(transpose(ffn_jacobian(x, p, j)), g.col(j));
      REQUIRE(oracle::rel_err(dx.col(j), ref) <= 1e-12);
    }
    auto loss = [&] { return inner(ffn_forward(x, p), g); };
    REQUIRE(oracle::rel_err(grads.w1.data(), oracle::fd_gradient(loss, p.w1.data())) <= 1e-6);
    REQUIRE(oracle::rel_err(grads.w2.data(), oracle::fd_gradient(loss, p.w2.data())) <= 1e-6);
  }
}
