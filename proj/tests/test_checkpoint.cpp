#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "darcn/checkpoint.hpp"
#include "darcn/errors.hpp"
#include "darcn/layers.hpp"
#include "darcn/rng.hpp"

using namespace darcn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/darcn_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("double precision round trip preserves exact bits") {
  TempFile tf("ckpt_f64.bin");
  Checkpoint c;
  CheckpointEntry e;
  e.name = "block.w";
  e.f64 = true;
  e.dims = {2, 3};
  e.values = {1.0, -2.5, 3.14159265358979, 1e-300, -0.0, 7.25};
  c.push_back(e);
  c.push_back(scalar_entry("epoch", 12.0));

  save_checkpoint(tf.path, c);
  Checkpoint r = load_checkpoint(tf.path);
  REQUIRE(r.size() == 2);
  CHECK(r[0].name == "block.w");
  CHECK(r[0].f64);
  CHECK(r[0].dims == Shape{2, 3});
  for (std::size_t i = 0; i < e.values.size(); ++i) CHECK(r[0].values[i] == e.values[i]);
  CHECK(find_scalar(r, "epoch") == 12.0);
}

TEST_CASE("single precision entries quantize to float on disk") {
  TempFile tf("ckpt_f32.bin");
  Checkpoint c;
  CheckpointEntry e;
  e.name = "w";
  e.f64 = false;
  e.dims = {3};
  e.values = {0.1, -1.0 / 3.0, 123456.789};
  c.push_back(e);
  save_checkpoint(tf.path, c);
  Checkpoint r = load_checkpoint(tf.path);
  REQUIRE(r.size() == 1);
  CHECK(!r[0].f64);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(r[0].values[i] == static_cast<double>(static_cast<float>(e.values[i])));
}

TEST_CASE("malformed files are rejected") {
  TempFile tf("ckpt_bad.bin");
  Checkpoint c = {scalar_entry("x", 1.0)};
  save_checkpoint(tf.path, c);
  const std::string good = slurp(tf.path);

  SUBCASE("bad magic") {
    std::string b = good;
    b[0] = 'X';
    spit(tf.path, b);
    CHECK_THROWS_AS(load_checkpoint(tf.path), ContractError);
  }
  SUBCASE("unknown version") {
    std::string b = good;
    b[4] = 99;
    spit(tf.path, b);
    CHECK_THROWS_AS(load_checkpoint(tf.path), ContractError);
  }
  SUBCASE("truncated") {
    spit(tf.path, good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(tf.path), ContractError);
  }
  SUBCASE("trailing bytes") {
    spit(tf.path, good + "zz");
    CHECK_THROWS_AS(load_checkpoint(tf.path), ContractError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/tmp/darcn_no_such_file.bin"), InputError);
  }
}

TEST_CASE("module snapshot and restore round trip") {
  TempFile tf("ckpt_module.bin");
  Rng rng(5);
  Conv2d conv(2, 3, 2, 5, 1, 2, Pad2{1, 0, 2, 2}, rng);
  BatchNorm2d bn(3);
  Tensor x = Tensor::randn({1, 2, 4, 9}, rng);
  bn.forward(conv.forward(x), true);  // give the running stats real values

  ParamList params;
  conv.collect("conv", params);
  bn.collect("conv.bn", params);
  const Checkpoint saved = snapshot_params(params, true);
  save_checkpoint(tf.path, saved);

  std::vector<std::vector<double>> original;
  for (NamedParam& p : params) original.push_back(p.tensor.data());
  for (NamedParam& p : params)
    for (double& v : p.tensor.data()) v += 1.0;

  Checkpoint loaded = load_checkpoint(tf.path);
  restore_params(params, loaded);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(params[i].tensor.data() == original[i]);

  // running statistics travel with the parameters
  CHECK(find_entry(loaded, "conv.bn.running_mean") != nullptr);
  CHECK(find_entry(loaded, "conv.bn.running_var") != nullptr);
}

TEST_CASE("restore rejects missing names and shape changes") {
  Rng rng(6);
  Conv2d conv(1, 2, 1, 1, 1, 1, Pad2{}, rng);
  ParamList params;
  conv.collect("c", params);
  Checkpoint c = snapshot_params(params, true);

  SUBCASE("missing entry") {
    Checkpoint partial = {c[0]};  // weight only, bias dropped
    CHECK_THROWS_AS(restore_params(params, partial), ContractError);
  }
  SUBCASE("shape mismatch") {
    Checkpoint mangled = c;
    mangled[0].dims = {2, 1, 1, 2};
    mangled[0].values.resize(4, 0.0);
    CHECK_THROWS_AS(restore_params(params, mangled), ContractError);
  }
  SUBCASE("extras are tolerated") {
    Checkpoint extra = c;
    extra.push_back(scalar_entry("opt.t", 3.0));
    CHECK_NOTHROW(restore_params(params, extra));
  }
  SUBCASE("missing scalar") {
    CHECK_THROWS_AS(find_scalar(c, "no.such"), ContractError);
  }
}
