#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dro/nn/adam.hpp"
#include "dro/nn/checkpoint.hpp"
#include "dro/nn/ops.hpp"

using namespace dro;
using namespace dro::nn;

TEST_CASE("forward examples") {
  Tape tape;
  const Var s = softmax(tape.input(Tensor({1, 2}, {0.0, 0.0})));
  CHECK(s.value()[0] == doctest::Approx(0.5));
  CHECK(s.value()[1] == doctest::Approx(0.5));

  const Var ln = layernorm(tape.input(Tensor({1, 3}, 4.0)), tape.input(Tensor({3}, 1.0)),
                           tape.input(Tensor({3}, 0.0)));
  for (double v : ln.value().values) CHECK(v == 0.0);

  const Tensor x({2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Var id = matmul(tape.input(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0})), tape.input(x));
  CHECK(id.value() == x);

  const double inf = std::numeric_limits<double>::infinity();
  const Var masked = softmax(tape.input(Tensor({1, 3}, {1.0, -inf, 1.0})));
  CHECK(masked.value()[1] == 0.0);
  CHECK(masked.value()[0] == doctest::Approx(0.5));

  CHECK(sigmoid(tape.input(Tensor({1}, 0.0))).value()[0] == 0.5);
  CHECK(gelu(tape.input(Tensor({1}, 0.0))).value()[0] == 0.0);
}

TEST_CASE("causal mask") {
  Tape tape;
  const Var scores = tape.input(Tensor({1, 3, 3}, 1.0));
  const Var m = causal_mask(scores, 1, {1, 1, 0});
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> expected{1.0, -inf, -inf, 1.0, 1.0, -inf, 1.0, 1.0, 1.0};
  CHECK(m.value().values == expected);
}

TEST_CASE("token interleaving and selection") {
  Tape tape;
  const Var a = tape.input(Tensor({1, 2, 1}, {1.0, 2.0}));
  const Var b = tape.input(Tensor({1, 2, 1}, {10.0, 20.0}));
  const Var c = tape.input(Tensor({1, 2, 1}, {100.0, 200.0}));
  const Var x = interleave({a, b, c});
  CHECK(x.value().values == std::vector<double>{1, 10, 100, 2, 20, 200});
  CHECK(select_tokens(x, 3, 1).value().values == std::vector<double>{10, 20});
}

TEST_CASE("mse of a tensor against itself has zero gradient") {
  Tape tape;
  const Tensor x({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6});
  const Var v = tape.input(x, true);
  const Var loss = mse(v, x, Tensor({2, 3}, 1.0));
  tape.backward(loss);
  CHECK(loss.value()[0] == 0.0);
  for (double g : tape.grad(v).values) CHECK(g == 0.0);
  CHECK_THROWS_AS(mse(v, x, Tensor({2, 3}, 0.0)), InputError);
}

TEST_CASE("softmax jacobian rows sum to zero") {
  Tape tape;
  const Var x = tape.input(Tensor({1, 4}, {0.3, -1.2, 2.0, 0.1}), true);
  const Var loss = sum(softmax(x));
  tape.backward(loss);
  double total = 0.0;
  for (double g : tape.grad(x).values) total += g;
  CHECK(std::abs(total) < 1e-15);
  for (double g : tape.grad(x).values) CHECK(std::abs(g) < 1e-15);
}

TEST_CASE("gradients accumulate into parameters") {
  Parameter w{"w", Tensor({2, 1}, {1.0, 2.0}), {}};
  Tape tape;
  const Var x = tape.input(Tensor({3, 2}, {1, 0, 0, 1, 1, 1}));
  const Var loss = sum(matmul(x, tape.param(w)));
  tape.backward(loss);
  CHECK(w.grad.values == std::vector<double>{2.0, 2.0});
  CHECK_THROWS_AS(tape.backward(matmul(x, tape.param(w))), InputError);
}

TEST_CASE("dropout") {
  Rng rng(1);
  Tape tape;
  const Tensor x({1, 1000}, 1.0);
  const Var v = tape.input(x);
  CHECK(dropout(v, 0.1, rng, false).value() == x);
  CHECK(dropout(v, 0.0, rng, true).value() == x);
  const Var d = dropout(v, 0.5, rng, true);
  int zeros = 0;
  for (double e : d.value().values) {
    CHECK((e == 0.0 || e == 2.0));
    zeros += e == 0.0;
  }
  CHECK(zeros > 400);
  CHECK(zeros < 600);
}

TEST_CASE("adam examples") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Parameter p{"p", Tensor({2}, {1.0, -2.0}), {}};
  p.zero_grad();
  AdamState state;
  adam_step({&p}, state, cfg);
  CHECK(p.value.values == std::vector<double>{1.0, -2.0});

  Parameter q{"q", Tensor({1}, 0.0), Tensor({1}, 0.7)};
  AdamState s2;
  for (int i = 0; i < 20; ++i) adam_step({&q}, s2, cfg);
  CHECK(q.value[0] < 0.0);

  // Minimize (w - 3)^2 from 0.
  Parameter w{"w", Tensor({1}, 0.0), {}};
  AdamState s3;
  for (int i = 0; i < 100; ++i) {
    w.grad = Tensor({1}, 2.0 * (w.value[0] - 3.0));
    adam_step({&w}, s3, cfg);
  }
  CHECK(std::abs(w.value[0] - 3.0) < 0.1);
  CHECK(s3.step == 100);

  // Decoupled decay shrinks a parameter with zero gradient.
  AdamConfig decay = cfg;
  decay.weight_decay = 0.5;
  Parameter r{"r", Tensor({1}, 2.0), Tensor({1}, 0.0)};
  AdamState s4;
  adam_step({&r}, s4, decay);
  CHECK(r.value[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)));

  AdamState s5;
  adam_step({&w}, s5, cfg);
  CHECK_THROWS_AS(adam_step({&w, &r}, s5, cfg), PreconditionError);
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "dro_nn_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.bin").string();
  const std::vector<Tensor> ts{Tensor({2, 3}, {1, 2, 3, 4, 5, 6.5}), Tensor({4}, -0.25),
                               Tensor({1, 1, 2}, {1e-300, -1e300})};
  save_tensors(path, ts);
  CHECK(load_tensors(path) == ts);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(load_tensors(path), InputError);

  std::ofstream(path, std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(load_tensors(path), InputError);
  CHECK_THROWS_AS(load_tensors((dir / "missing.bin").string()), InputError);
  std::filesystem::remove_all(dir);
}
