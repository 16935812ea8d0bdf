#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "srl/adam.hpp"
#include "srl/checkpoint.hpp"
#include "srl/tensor.hpp"

using namespace srl;

TEST_CASE("sigmoid(0) = 0.5 and tanh/relu basics") {
  Tape t;
  Tensor x = Tensor::vec({0.0});
  CHECK(t.sigmoid(x).vals()[0] == Catch::Approx(0.5));
  CHECK(t.tanh(x).vals()[0] == Catch::Approx(0.0));
  Tensor y = Tensor::vec({-1.0, 2.0});
  auto r = t.relu(y).vals();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 2.0);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape t;
  auto p = t.softmax(Tensor::vec({0.0, 0.0})).vals();
  CHECK(p[0] == Catch::Approx(0.5));
  CHECK(p[1] == Catch::Approx(0.5));
}

TEST_CASE("softmax rows are distributions and stable under large logits") {
  Tape t;
  Rng rng(3);
  Tensor x = Tensor::zeros({20, 7});
  for (auto& v : x.vals()) v = rng.uniform(-50.0, 50.0);
  Tensor y = t.softmax(x);
  for (std::size_t r = 0; r < 20; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      double p = y.vals()[r * 7 + c];
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("matmul identity case") {
  Tape t;
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {3, 4, 5, 6});
  auto out = t.matmul(eye, m).vals();
  CHECK(out == std::vector<double>{3, 4, 5, 6});
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  Tape t;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_WITH(t.matmul(a, b),
                    Catch::Matchers::ContainsSubstring("matmul") &&
                        Catch::Matchers::ContainsSubstring("[2x3]") &&
                        Catch::Matchers::ContainsSubstring("[4]"));
  CHECK_THROWS_WITH(t.add(Tensor::zeros({2}), Tensor::zeros({3})),
                    Catch::Matchers::ContainsSubstring("add") &&
                        Catch::Matchers::ContainsSubstring("[2]") &&
                        Catch::Matchers::ContainsSubstring("[3]"));
}

TEST_CASE("backward of sigmoid at 0 gives 0.25") {
  Tape t;
  Tensor x = Tensor::vec({0.0}, true);
  Tensor loss = t.sigmoid(x);
  t.backward(loss);
  CHECK(x.grad()[0] == Catch::Approx(0.25));
}

TEST_CASE("backward of sum(relu(x)) uses the relu subgradient") {
  Tape t;
  Tensor x = Tensor::vec({-1.0, 2.0}, true);
  Tensor loss = t.reduce_sum(t.relu(x));
  t.backward(loss);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape t;
  Tensor x = Tensor::vec({1.0, 2.0}, true);
  Tensor y = t.relu(x);
  CHECK_THROWS_WITH(t.backward(y), Catch::Matchers::ContainsSubstring("scalar"));
}

TEST_CASE("a tensor feeding two consumers accumulates both contributions") {
  Tape t;
  Tensor x = Tensor::vec({3.0}, true);
  Tensor a = t.affine(x, 2.0, 0.0);   // 2x
  Tensor b = t.mul(x, x);             // x^2
  Tensor loss = t.reduce_sum(t.add(a, b));
  t.backward(loss);
  CHECK(x.grad()[0] == Catch::Approx(2.0 + 2.0 * 3.0));
}

TEST_CASE("unreachable parameters keep zero gradients") {
  Tape t;
  Tensor used = Tensor::vec({1.0}, true);
  Tensor unused = Tensor::vec({1.0}, true);
  used.zero_grad();
  unused.zero_grad();
  t.backward(t.reduce_sum(t.mul(used, used)));
  CHECK(used.grad()[0] == Catch::Approx(2.0));
  CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("dropout is seeded, inverted, and off outside training") {
  Tensor x = Tensor::vec({1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
  Tape t;
  Rng r1(9), r2(9);
  auto a = t.dropout(x, 0.5, r1, true).vals();
  auto b = t.dropout(x, 0.5, r2, true).vals();
  CHECK(a == b);
  for (double v : a) CHECK((v == 0.0 || v == Catch::Approx(2.0)));
  Rng r3(9);
  auto c = t.dropout(x, 0.5, r3, false).vals();
  CHECK(c == x.vals());
}

TEST_CASE("concat keeps order and splits gradients") {
  Tape t;
  Tensor a = Tensor::vec({1.0, 2.0}, true);
  Tensor b = Tensor::vec({3.0}, true);
  Tensor y = t.concat({a, b});
  CHECK(y.vals() == std::vector<double>{1, 2, 3});
  t.backward(t.pick(y, 2));
  CHECK(b.grad()[0] == 1.0);
  CHECK(a.grad() == std::vector<double>{0, 0});
}

TEST_CASE("adam first step moves a parameter by about lr") {
  Params params;
  Tensor p = params.add("w", Tensor::vec({1.0}));
  params.zero_grad();
  p.grad()[0] = 1.0;
  AdamState adam(0.001);
  adam.step(params);
  CHECK(p.vals()[0] == Catch::Approx(1.0 - 0.001).epsilon(1e-6));
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Params params;
  Tensor p = params.add("w", Tensor::vec({0.7, -0.3}));
  AdamState adam(0.01);
  for (int i = 0; i < 5; ++i) {
    params.zero_grad();
    adam.step(params);
  }
  CHECK(p.vals()[0] == 0.7);
  CHECK(p.vals()[1] == -0.3);
}

TEST_CASE("adam rejects a missing gradient naming the group") {
  Params params;
  params.add("scorer.W", Tensor::vec({1.0}));
  AdamState adam;
  CHECK_THROWS_WITH(adam.step(params), Catch::Matchers::ContainsSubstring("scorer.W"));
}

static std::vector<double> run_adam_fixture(std::uint64_t seed) {
  Params params;
  Rng rng(seed);
  Tensor w = params.glorot("w", 3, 3, rng);
  AdamState adam(0.001);
  for (int step = 0; step < 10; ++step) {
    params.zero_grad();
    Tape t;
    Tensor x = Tensor::vec({0.3, -0.2, 0.9});
    Tensor loss = t.reduce_sum(t.tanh(t.matmul(w, x)));
    t.backward(loss);
    adam.step(params);
  }
  return w.vals();
}

TEST_CASE("identical seeds give bitwise-identical parameters after 10 steps") {
  auto a = run_adam_fixture(42);
  auto b = run_adam_fixture(42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::uint64_t ua, ub;
    std::memcpy(&ua, &a[i], 8);
    std::memcpy(&ub, &b[i], 8);
    CHECK(ua == ub);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact and re-save is byte-identical") {
  Params params;
  Rng rng(11);
  params.glorot("enc.W", 4, 3, rng);
  params.embedding("feat.E", 5, 2, rng);
  params.zeros("b", {7});
  // Values with tricky bit patterns.
  params.get("b").vals() = {0.0, -0.0, 1e-300, -1e300, 0.1, 3.141592653589793, -2.5};

  std::string path = "ckpt_test.bin";
  save_checkpoint(params, path);

  Params loaded;
  Rng rng2(999);
  loaded.glorot("enc.W", 4, 3, rng2);
  loaded.embedding("feat.E", 5, 2, rng2);
  loaded.zeros("b", {7});
  load_checkpoint(loaded, path);
  for (const auto& [name, t] : params.items()) {
    const auto& got = loaded.get(name).vals();
    REQUIRE(got.size() == t.numel());
    for (std::size_t i = 0; i < got.size(); ++i) {
      std::uint64_t ua, ub;
      std::memcpy(&ua, &t.vals()[i], 8);
      std::memcpy(&ub, &got[i], 8);
      CHECK(ua == ub);
    }
  }

  std::string path2 = "ckpt_test2.bin";
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.substr(0, 8) == "SRLCKPT1");
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint load rejects unknown groups and shape mismatches") {
  Params params;
  params.zeros("a", {2});
  std::string path = "ckpt_test3.bin";
  save_checkpoint(params, path);

  Params wrong_shape;
  wrong_shape.zeros("a", {3});
  CHECK_THROWS_WITH(load_checkpoint(wrong_shape, path),
                    Catch::Matchers::ContainsSubstring("shape mismatch"));

  Params extra;
  extra.zeros("a", {2});
  extra.zeros("b", {1});
  CHECK_THROWS_WITH(load_checkpoint(extra, path), Catch::Matchers::ContainsSubstring("missing"));

  Params none;
  none.zeros("c", {2});
  CHECK_THROWS_WITH(load_checkpoint(none, path), Catch::Matchers::ContainsSubstring("unknown"));
  std::remove(path.c_str());
}

TEST_CASE("no-record tapes compute values but skip gradient bookkeeping") {
  Tape t(false);
  Tensor x = Tensor::vec({1.0, -2.0}, true);
  Tensor y = t.relu(x);
  CHECK(y.vals() == std::vector<double>{1.0, 0.0});
  CHECK_FALSE(y.requires_grad());
  CHECK(t.size() == 0);
}
