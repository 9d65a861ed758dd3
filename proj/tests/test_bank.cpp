#include <doctest.h>

#include <filesystem>

#include "sap/env/bank.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"

using namespace sap;
using namespace sap::env;

namespace {
TrajectoryBank small_bank(EnvId id, std::size_t n, std::uint64_t seed) {
  auto pol = default_exploration(id);
  if (id == EnvId::reacher) pol.max_steps = 60;
  return generate_exploration_bank(make_spec(id, config_names(id).front()), pol, n, seed);
}
}  // namespace

TEST_CASE("banks regenerate bit-identically") {
  for (auto id : {EnvId::gridworld, EnvId::platformer, EnvId::reacher}) {
    const auto a = small_bank(id, 20, 5), b = small_bank(id, 20, 5), c = small_bank(id, 20, 6);
    CHECK(bank_to_jsonl(a) == bank_to_jsonl(b));
    CHECK(bank_to_jsonl(a) != bank_to_jsonl(c));
  }
}

TEST_CASE("uniform gridworld bank: 100 full-length replay-verified trajectories") {
  const auto bank = generate_exploration_bank(make_spec(EnvId::gridworld, "World-1"),
                                              default_exploration(EnvId::gridworld), 100, 1);
  REQUIRE(bank.trajectories.size() == 100);
  for (const auto& t : bank.trajectories) {
    CHECK(t.length() == 30);
    std::string why;
    CHECK_MESSAGE(replay_check(bank.spec, t, &why), why);
  }
}

TEST_CASE("replay soundness on platformer and reacher banks") {
  for (auto id : {EnvId::platformer, EnvId::reacher}) {
    const auto bank = small_bank(id, 40, 3);
    for (const auto& t : bank.trajectories) {
      std::string why;
      CHECK_MESSAGE(replay_check(bank.spec, t, &why), why);
    }
  }
}

TEST_CASE("replay detects tampering") {
  auto bank = small_bank(EnvId::gridworld, 2, 3);
  auto t = bank.trajectories[0];
  t.terminal_reward += 1.0;
  CHECK_FALSE(replay_check(bank.spec, t));
  t = bank.trajectories[0];
  t.actions[3] = (t.actions[3] + 1) % 4;
  CHECK_FALSE(replay_check(bank.spec, t));
}

TEST_CASE("reacher bank never puts the hand inside an obstacle") {
  const auto bank = small_bank(EnvId::reacher, 40, 8);
  Reacher r(bank.spec);
  for (const auto& t : bank.trajectories)
    for (const auto& s : t.states) CHECK_FALSE(r.occupied(Pos{int(s[0]), int(s[1]), int(s[2])}));
}

TEST_CASE("epsilon-noisy platformer exploration: off-base mass matches eps (|A|-1)/|A|") {
  auto pol = default_exploration(EnvId::platformer);
  REQUIRE(pol.kind == ExplorationPolicy::Kind::epsilon_noisy);
  REQUIRE(pol.epsilon == 0.4);
  const auto bank = generate_exploration_bank(make_spec(EnvId::platformer, "Level-A"), pol, 2000, 4);
  std::size_t n = 0, off = 0;
  for (const auto& t : bank.trajectories)
    for (auto a : t.actions) {
      if (n == 10000) break;
      ++n;
      off += a != pol.base_action;
    }
  REQUIRE(n == 10000);
  const double expected = 0.4 * 4.0 / 5.0;
  CHECK(std::abs(double(off) / double(n) - expected) <= 0.02);
}

TEST_CASE("jsonl round trip, header fields and provenance meta") {
  auto bank = small_bank(EnvId::platformer, 5, 2);
  bank.meta = {{"config_hash", "0123456789abcdef"}, {"seed", "7"}};
  const auto text = bank_to_jsonl(bank);
  const auto header = text.substr(0, text.find('\n'));
  for (const char* key : {"format_version", "env", "config", "seed", "policy", "\"n\"", "meta"})
    CHECK_MESSAGE(header.find(key) != std::string::npos, key);
  const auto back = bank_from_jsonl(text);
  CHECK(back.meta == bank.meta);
  CHECK(back.trajectories.size() == 5);
  CHECK(bank_to_jsonl(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "sap_bank_test.jsonl";
  write_bank(path, bank);
  CHECK(bank_to_jsonl(read_bank(path)) == text);
  std::filesystem::remove(path);
}

TEST_CASE("malformed bank files are rejected") {
  auto bank = small_bank(EnvId::gridworld, 3, 2);
  auto text = bank_to_jsonl(bank);
  CHECK_THROWS_AS(bank_from_jsonl(""), ConfigError);
  // drop the last trajectory line: header count no longer matches
  auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  CHECK_THROWS_AS(bank_from_jsonl(cut), ConfigError);
  auto bad_version = text;
  bad_version.replace(bad_version.find("\"format_version\":1"), 18, "\"format_version\":9");
  CHECK_THROWS_AS(bank_from_jsonl(bad_version), ConfigError);
  CHECK_THROWS_AS(read_bank("/nonexistent/bank.jsonl"), ConfigError);
  CHECK_THROWS_AS(generate_exploration_bank(bank.spec, bank.policy, 0, 1), ContractError);
}
