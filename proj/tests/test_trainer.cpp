#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cit/kernels.hpp"
#include "cit/trainer.hpp"

using namespace cit;
using namespace cit::train;

namespace {

bool params_bit_equal(CITModel<float>& a, CITModel<float>& b) {
  auto pa = a.named_params();
  auto pb = b.named_params();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first) return false;
    if (std::memcmp(pa[i].second.data(), pb[i].second.data(),
                    sizeof(float) * static_cast<size_t>(pa[i].second.numel())) != 0) {
      return false;
    }
  }
  return true;
}

data::PairedImages tiny_pairs(uint64_t seed) {
  data::ExposurePairSpec spec;
  spec.seed = seed;
  return data::make_procedural_pairs(2, 32, 32, spec, 0.3);
}

TrainConfig tiny_config() {
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch = 2;
  tc.crop = 16;
  tc.epochs = 100;  // max_steps governs
  tc.max_steps = 3;
  tc.seed = 5;
  return tc;
}

CITConfig tiny_model_config() {
  CITConfig c = CITConfig::toy();
  c.channels = 8;
  c.heads = 2;
  return c;
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto p = Tensor<float>::from_vector({3}, {1, 2, 3});
  p.set_requires_grad(true);
  p.ensure_grad();  // zeros
  std::vector<std::pair<std::string, Tensor<float>>> params = {{"p", p}};
  AdamState<float> state;
  TrainConfig cfg;
  adam_step(params, state, cfg);
  CHECK(p.data()[0] == 1);
  CHECK(p.data()[1] == 2);
  CHECK(p.data()[2] == 3);
}

TEST_CASE("adam: first step with unit gradient moves by ~lr") {
  auto p = Tensor<float>::from_vector({1}, {0.5f});
  p.set_requires_grad(true);
  p.ensure_grad();
  p.grad_data()[0] = 1.0f;
  std::vector<std::pair<std::string, Tensor<float>>> params = {{"p", p}};
  AdamState<float> state;
  TrainConfig cfg;
  cfg.lr = 1e-4;
  adam_step(params, state, cfg);
  CHECK(p.data()[0] == doctest::Approx(0.5 - 1e-4).epsilon(1e-6));
}

TEST_CASE("adam: missing gradient raises only in strict mode") {
  auto p = Tensor<float>::from_vector({1}, {1.0f});
  p.set_requires_grad(true);
  std::vector<std::pair<std::string, Tensor<float>>> params = {{"p", p}};
  AdamState<float> state;
  TrainConfig cfg;
  CHECK_NOTHROW(adam_step(params, state, cfg, false));
  CHECK_THROWS_AS(adam_step(params, state, cfg, true), Error);
}

TEST_CASE("adam update order does not depend on parameter list order") {
  auto mk = [](float v) {
    auto t = Tensor<float>::from_vector({1}, {v});
    t.set_requires_grad(true);
    t.ensure_grad();
    t.grad_data()[0] = 0.7f;
    return t;
  };
  auto a1 = mk(1), b1 = mk(2);
  auto a2 = mk(1), b2 = mk(2);
  AdamState<float> s1, s2;
  TrainConfig cfg;
  std::vector<std::pair<std::string, Tensor<float>>> fwd = {{"a", a1}, {"b", b1}};
  std::vector<std::pair<std::string, Tensor<float>>> rev = {{"b", b2}, {"a", a2}};
  adam_step(fwd, s1, cfg);
  adam_step(rev, s2, cfg);
  CHECK(a1.data()[0] == a2.data()[0]);
  CHECK(b1.data()[0] == b2.data()[0]);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto run = [&]() {
    CITModel<float> model;
    model.init(tiny_model_config(), 3);
    auto pairs = tiny_pairs(1);
    cit::train::train(model, pairs, tiny_config());
    return model;
  };
  auto m1 = run();
  auto m2 = run();
  CHECK(params_bit_equal(m1, m2));
}

TEST_CASE("train writes the loss log in the documented format") {
  const std::string dir = "/tmp/cit_test_train";
  std::filesystem::remove_all(dir);
  CITModel<float> model;
  model.init(tiny_model_config(), 3);
  auto pairs = tiny_pairs(1);
  auto res = cit::train::train(model, pairs, tiny_config(), dir);
  CHECK(res.final_step == 3);
  CHECK(res.log.size() == 3);

  std::ifstream log(dir + "/loss_log.csv");
  REQUIRE(log.good());
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,loss_total,loss_rec,loss_col,loss_spa");
  std::getline(log, line);
  CHECK(line.substr(0, 2) == "1,");
  CHECK(std::filesystem::exists(dir + "/ckpt_final.ckpt"));
}

TEST_CASE("crop must be divisible by 4*window") {
  CITModel<float> model;
  model.init(tiny_model_config(), 3);
  auto pairs = tiny_pairs(1);
  TrainConfig tc = tiny_config();
  tc.crop = 20;  // not divisible by 16
  CHECK_THROWS_AS(cit::train::train(model, pairs, tc), Error);
}

TEST_CASE("checkpoint round trip restores parameters bit-exactly") {
  const std::string path = "/tmp/cit_test_ckpt.bin";
  CITModel<float> model;
  model.init(tiny_model_config(), 7);
  AdamState<float> opt;
  save_checkpoint(path, model, &opt, 0, "k=v\n");

  CITModel<float> other;
  other.init(tiny_model_config(), 8);  // different init
  CHECK_FALSE(params_bit_equal(model, other));
  auto ck = load_checkpoint(path);
  CHECK(ck.config_text == "k=v\n");
  restore_model(other, ck);
  CHECK(params_bit_equal(model, other));

  CHECK_THROWS_AS(load_checkpoint("/tmp/cit_missing.ckpt"), Error);
}

TEST_CASE("resume from checkpoint continues bit-exactly") {
  const std::string dir = "/tmp/cit_test_resume";
  std::filesystem::remove_all(dir);
  auto pairs = tiny_pairs(2);

  // continuous: 4 steps
  CITModel<float> cont;
  cont.init(tiny_model_config(), 11);
  TrainConfig tc = tiny_config();
  tc.max_steps = 4;
  tc.checkpoint_interval = 2;
  cit::train::train(cont, pairs, tc, dir + "/cont");

  // split: 2 steps, checkpoint, then resume for 2 more
  CITModel<float> split;
  split.init(tiny_model_config(), 11);
  TrainConfig tc2 = tiny_config();
  tc2.max_steps = 2;
  cit::train::train(split, pairs, tc2, dir + "/split");
  CITModel<float> resumed;
  resumed.init(tiny_model_config(), 999);  // clobbered by restore
  TrainConfig tc3 = tiny_config();
  tc3.max_steps = 4;
  auto res = cit::train::train(resumed, pairs, tc3, dir + "/split2", dir + "/split/ckpt_final.ckpt");
  CHECK(res.log.size() == 2);  // steps 3 and 4 only
  CHECK(res.log.front().step == 3);
  CHECK(params_bit_equal(cont, resumed));
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  CITModel<float> model;
  model.init(tiny_model_config(), 3);
  // poison one parameter; the forward pass propagates it into the loss
  model.visit_params([](const std::string& name, Tensor<float>& t) {
    if (name == "stem.w") t.data()[0] = std::numeric_limits<float>::quiet_NaN();
  });
  auto pairs = tiny_pairs(3);
  CHECK_THROWS_AS(cit::train::train(model, pairs, tiny_config()), Error);
  try {
    cit::train::train(model, pairs, tiny_config());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("gradcheck oracle passes on the pinned toy config") {
  auto rep = gradcheck_model(123, 3);
  CHECK(rep.passed(1e-3));
  CHECK(rep.groups.size() > 50);  // every parameter group reported
  auto lrep = gradcheck_losses(123, 16);
  CHECK(lrep.passed(1e-5));
}

TEST_CASE("gradcheck detects a corrupted backward rule") {
  // a custom op whose backward rule is wrong by 10%
  auto x = Tensor<double>::from_vector({4}, {0.4, 0.9, 1.3, 0.2});
  x.set_requires_grad(true);
  auto fn = [&]() {
    Tensor<double> out({4});
    for (int i = 0; i < 4; ++i) out.data()[i] = 2.0 * x.data()[i];
    record_custom(out, {x}, [x, out]() {
      Tensor<double> xx = x;
      xx.ensure_grad();
      for (int i = 0; i < 4; ++i) {
        xx.grad_data()[i] += 3.0 * out.grad_view().data()[i];  // deliberately wrong
      }
    });
    return sum(out);
  };
  auto rep = gradcheck_fn(fn, {{"x", x}}, 4, 1e-5, 3);
  CHECK_FALSE(rep.passed(1e-3));
  CHECK(rep.worst > 0.1);
}
