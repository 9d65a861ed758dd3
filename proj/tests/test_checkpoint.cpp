#include <doctest.h>

#include <filesystem>

#include "sap/checkpoint.hpp"
#include "sap/dynamics.hpp"
#include "sap/error.hpp"
#include "sap/reward.hpp"

using namespace sap;
namespace fs = std::filesystem;

TEST_CASE("encode/decode round trip keeps weights and header") {
  ad::Mlp net({5, 4, 3}, 77);
  ad::CheckpointHeader h;
  h.module = "unit";
  h.seed = 77;
  h.step = 123;
  h.meta = {{"b", "2"}, {"a", "1"}};
  const auto bytes = ad::encode_checkpoint(h, net);
  const auto ck = ad::decode_checkpoint(bytes);
  CHECK(ck.header.module == "unit");
  CHECK(ck.header.step == 123);
  CHECK(ck.header.seed == 77);
  CHECK(ck.header.meta == h.meta);
  CHECK(ck.header.widths == std::vector<std::uint64_t>{5, 4, 3});
  CHECK(ck.net.checksum() == net.checksum());
  CHECK(ck.net.flat_parameters() == net.flat_parameters());
  // deterministic bytes
  CHECK(ad::encode_checkpoint(h, net) == bytes);
}

TEST_CASE("corrupt checkpoints are rejected") {
  ad::Mlp net({3, 2}, 1);
  ad::CheckpointHeader h;
  h.module = "unit";
  auto bytes = ad::encode_checkpoint(h, net);
  CHECK_THROWS_AS(ad::decode_checkpoint("garbage"), ConfigError);
  CHECK_THROWS_AS(ad::decode_checkpoint(bytes.substr(0, bytes.size() - 4)), ConfigError);
  CHECK_THROWS_AS(ad::decode_checkpoint(bytes + "x"), ConfigError);
  CHECK_THROWS_AS(ad::load_checkpoint("/nonexistent/dir/x.ckpt"), ConfigError);
}

TEST_CASE("scorer and dynamics checkpoints restore identical models") {
  const fs::path dir = fs::temp_directory_path() / "sap_ckpt_test";
  fs::create_directories(dir);
  auto sm = ScoringModel::create(env::EnvId::platformer, "ring8", {8}, 5);
  save_scorer(dir / "s.ckpt", sm, {{"config_hash", "abc"}});
  std::map<std::string, std::string> meta;
  auto back = load_scorer(dir / "s.ckpt", &meta);
  CHECK(meta.at("config_hash") == "abc");
  CHECK(back.layout.name == "ring8");
  CHECK(back.net.checksum() == sm.net.checksum());

  auto dm = DynamicsModel::create(env::EnvId::reacher, {6}, 9);
  save_dynamics(dir / "d.ckpt", dm);
  auto dback = load_dynamics(dir / "d.ckpt");
  CHECK(dback.net.checksum() == dm.net.checksum());
  CHECK(dback.delta_dims == 3);
  // module mismatch
  CHECK_THROWS_AS(load_scorer(dir / "d.ckpt"), ConfigError);
  fs::remove_all(dir);
}
