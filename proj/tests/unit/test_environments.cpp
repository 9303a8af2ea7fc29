#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/environments.hpp"

using namespace looplab;

namespace {

std::vector<std::string> keys_of(const Observation& o) {
  std::vector<std::string> out;
  for (const auto& [k, v] : o.objects) out.push_back(k);
  for (const auto& [k, v] : o.groups) out.push_back(k);
  return out;
}

int brick_value(const Observation& o) {
  int total = 0;
  for (const auto& [key, value] : breakout::kRows) {
    for (const Box& b : *o.group(key)) total += (b.w / 8) * value;
  }
  return total;
}

int brick_count(const Observation& o) {
  int n = 0;
  for (const auto& [key, value] : breakout::kRows) {
    for (const Box& b : *o.group(key)) n += b.w / 8;
  }
  return n;
}

}  // namespace

TEST_CASE("observation schema per game") {
  Environment pong_env(EnvConfig{Game::pong});
  CHECK(keys_of(pong_env.reset()) == std::vector<std::string>{"Player", "Ball", "Enemy"});
  CHECK(pong_env.observation().find("Player")->x == pong::kPlayerX);
  CHECK(pong_env.observation().find("Enemy")->x == pong::kEnemyX);

  Environment br(EnvConfig{Game::breakout});
  const Observation& o = br.reset();
  CHECK(keys_of(o) ==
        std::vector<std::string>{"Player", "Ball", "RB", "OB", "YB", "GB", "AB", "BB"});
  CHECK(o.lives == 5);
  CHECK(o.find("Player")->y == breakout::kPaddleY);
  CHECK(brick_count(o) == 6 * breakout::kColumns);
  CHECK(o.find("Ball")->dy > 0);

  Environment inv(EnvConfig{Game::invaders});
  const Observation& io = inv.reset();
  CHECK(io.find("Player") != nullptr);
  CHECK(io.find("Alien0") != nullptr);
  CHECK(io.find("Shield2") != nullptr);
}

TEST_CASE("observation json matches the documented shape") {
  Observation o;
  o.objects = {{"Player", {99, 189, 16, 4, 0, 0}}, {"Ball", {7, 193, 2, 4, -4, 4}}};
  int y = 57;
  for (const auto& [key, value] : breakout::kRows) {
    o.groups.emplace_back(std::string(key), std::vector<Box>{{8, y, 144, 6}});
    y += 6;
  }
  o.lives = 5;
  o.reward = 0.0;
  CHECK(to_json(o) ==
        R"({"Player":{"x":99,"y":189,"w":16,"h":4,"dx":0,"dy":0},)"
        R"("Ball":{"x":7,"y":193,"w":2,"h":4,"dx":-4,"dy":4},)"
        R"("RB":[{"x":8,"y":57,"w":144,"h":6}],"OB":[{"x":8,"y":63,"w":144,"h":6}],)"
        R"("YB":[{"x":8,"y":69,"w":144,"h":6}],"GB":[{"x":8,"y":75,"w":144,"h":6}],)"
        R"("AB":[{"x":8,"y":81,"w":144,"h":6}],"BB":[{"x":8,"y":87,"w":144,"h":6}],)"
        R"("lives":5,"reward":0.0})");
}

TEST_CASE("same seed and actions give identical trajectories") {
  for (Game g : {Game::pong, Game::breakout, Game::invaders}) {
    EnvConfig c{g};
    c.seed = 42;
    Environment a(c), b(c);
    CHECK(to_json(a.reset()) == to_json(b.reset()));
    Rng actions(7);
    const auto legal = legal_actions(g);
    for (int i = 0; i < 500 && !a.done(); ++i) {
      const auto act = legal[uniform_index(actions, legal.size())];
      const StepResult ra = a.step(act);
      const StepResult rb = b.step(act);
      REQUIRE(to_json(ra.observation) == to_json(rb.observation));
      CHECK(ra.reward == rb.reward);
    }
    EnvConfig other = c;
    other.seed = 43;
    Environment d(other);
    d.reset();
    Environment e(c);
    e.reset();
    bool differs = to_json(d.observation()) != to_json(e.observation());
    for (int i = 0; i < 50 && !differs; ++i) {
      differs = to_json(d.step(legal[0]).observation) != to_json(e.step(legal[0]).observation);
    }
    CHECK(differs);
  }
}

TEST_CASE("pong ball reflects off the top and bottom walls") {
  EnvConfig c{Game::pong};
  c.action_repeat = 1;
  c.seed = 3;
  Environment env(c);
  Rng actions(1);
  int reflections = 0;
  for (int ep = 0; ep < 3; ++ep) {
    env.reset();
    while (!env.done()) {
      const ObjectRecord before = *env.observation().find("Ball");
      const StepResult r = env.step(legal_actions(Game::pong)[uniform_index(actions, 3)]);
      const ObjectRecord after = *r.observation.find("Ball");
      CHECK(after.y >= pong::kTop);
      CHECK(after.y <= pong::kBottom);
      const bool mid_field = before.x > 40 && before.x < 110;
      if (!mid_field || r.reward != 0.0) continue;
      int y = before.y + before.dy;
      int dy = before.dy;
      if (y < pong::kTop) {
        y = 2 * pong::kTop - y;
        dy = -dy;
        ++reflections;
      } else if (y > pong::kBottom) {
        y = 2 * pong::kBottom - y;
        dy = -dy;
        ++reflections;
      }
      CHECK(after.y == y);
      CHECK(after.dy == dy);
    }
  }
  CHECK(reflections > 0);
}

TEST_CASE("breakout bricks only disappear and pay their row value") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EnvConfig c{Game::breakout};
    c.seed = seed;
    Environment env(c);
    int previous = brick_count(env.reset());
    const int full = brick_value(env.observation());
    Rng actions(seed + 100);
    double score = 0;
    for (int i = 0; i < 2000; ++i) {
      if (env.done()) {
        previous = brick_count(env.reset());
        score = 0;
      }
      const StepResult r = env.step(static_cast<std::int64_t>(uniform_index(actions, 4)));
      score += r.reward;
      const ObjectRecord& ball = *r.observation.find("Ball");
      CHECK(ball.x >= breakout::kLeftWall);
      CHECK(ball.x <= breakout::kRightWall);
      const int now = brick_count(r.observation);
      CHECK(now <= previous);
      previous = now;
      CHECK(score == full - brick_value(r.observation));
    }
  }
}

TEST_CASE("invaders keep at most one player bullet") {
  EnvConfig c{Game::invaders};
  c.seed = 9;
  Environment env(c);
  env.reset();
  Rng actions(2);
  bool saw_bullet = false;
  for (int i = 0; i < 3000; ++i) {
    if (env.done()) env.reset();
    const StepResult r = env.step(static_cast<std::int64_t>(uniform_index(actions, 6)));
    int live = 0;
    for (const auto& [k, o] : r.observation.objects) {
      if (k.starts_with("Bullet") && o.dy < 0) ++live;
    }
    CHECK(live <= 1);
    saw_bullet = saw_bullet || live == 1;
  }
  CHECK(saw_bullet);
}

TEST_CASE("pong with a motionless paddle never wins") {
  EnvConfig c{Game::pong};
  c.seed = 11;
  Environment env(c);
  const int y0 = env.reset().find("Player")->y;
  while (!env.done()) {
    CHECK(env.step(0).observation.find("Player")->y == y0);
  }
  CHECK(env.episode_return() <= 0.0);
}

TEST_CASE("illegal actions, finished episodes and bad configs are rejected") {
  Environment env(EnvConfig{Game::pong});
  env.reset();
  CHECK_THROWS_AS(env.step(1), EnvironmentError);
  CHECK_THROWS_AS(env.step(7), EnvironmentError);
  EnvConfig shortc{Game::breakout};
  shortc.max_steps = 3;
  Environment br(shortc);
  br.reset();
  br.step(0);
  br.step(0);
  CHECK(br.step(0).done);
  CHECK_THROWS_AS(br.step(0), EnvironmentError);
  EnvConfig bad{Game::pong};
  bad.sticky_action_prob = 1.5;
  CHECK_THROWS_AS(Environment{bad}, ConfigError);
  CHECK_THROWS_AS(parse_game("freeway"), ConfigError);
  CHECK(parse_game("invaders") == Game::invaders);
}

TEST_CASE("sticky actions repeat the previous action") {
  EnvConfig c{Game::pong};
  c.sticky_action_prob = 1.0;
  Environment env(c);
  const int y0 = env.reset().find("Player")->y;
  for (int i = 0; i < 10; ++i) CHECK(env.step(2).observation.find("Player")->y == y0);
}

TEST_CASE("trajectory dump writes one json line per step") {
  Environment env(EnvConfig{Game::pong});
  std::ostringstream sink;
  env.set_trajectory_sink(&sink);
  env.reset();
  for (int i = 0; i < 5; ++i) env.step(3);
  std::istringstream lines(sink.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    const Value v = value_from_json(line);
    CHECK(v.field("step")->as_int() == n);
    CHECK(v.field("action")->as_int() == 3);
    CHECK(v.field("observation")->field("Ball") != nullptr);
  }
  CHECK(n == 5);
}
