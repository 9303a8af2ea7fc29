#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "looplab/dialect.hpp"
#include "looplab/error.hpp"
#include "looplab/util.hpp"

namespace looplab {

enum class Game { pong, breakout, invaders };

std::string_view to_string(Game game) noexcept;
/// Throws ConfigError for an unknown name.
Game parse_game(std::string_view name);

/// Legal actions. Pong {0, 2, 3}; Breakout {0, 1, 2, 3}; Invaders {0..5}.
std::span<const std::int64_t> legal_actions(Game game) noexcept;

struct ObjectRecord {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  int dx = 0;
  int dy = 0;

  bool operator==(const ObjectRecord&) const = default;
};

/// Static bounding box (brick spans carry no velocity).
struct Box {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  bool operator==(const Box&) const = default;
};

struct Observation {
  /// Named moving objects in schema order.
  std::vector<std::pair<std::string, ObjectRecord>> objects;
  /// Named groups of static boxes (Breakout brick rows).
  std::vector<std::pair<std::string, std::vector<Box>>> groups;
  int lives = 0;
  /// Reward of the step that produced this observation.
  double reward = 0.0;

  const ObjectRecord* find(std::string_view name) const;
  const std::vector<Box>* group(std::string_view name) const;

  bool operator==(const Observation&) const = default;
};

/// Ordered record: objects, then groups, then lives and reward.
Value to_value(const Observation& obs);
std::string to_json(const Observation& obs);

struct EnvConfig {
  Game game = Game::pong;
  int action_repeat = 4;
  double sticky_action_prob = 0.0;
  std::uint64_t seed = 0;
  int max_steps = 4000;
  /// Pong only: largest enemy paddle move per frame.
  int enemy_speed_cap = 2;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

class GameSim;

/// One single-owner game instance. Trajectories are a pure function of the
/// seed and the action sequence.
class Environment {
 public:
  /// Throws ConfigError for an invalid configuration.
  explicit Environment(EnvConfig config);
  ~Environment();
  Environment(Environment&&) noexcept;
  Environment& operator=(Environment&&) noexcept;

  /// Restarts the episode. Each reset draws a fresh episode from the seeded
  /// stream, so the k-th episode after construction is reproducible.
  const Observation& reset();
  /// Throws EnvironmentError for an illegal action or a finished episode.
  StepResult step(std::int64_t action);

  const EnvConfig& config() const noexcept { return config_; }
  const Observation& observation() const noexcept { return observation_; }
  int steps() const noexcept { return steps_; }
  bool done() const noexcept { return done_; }
  double episode_return() const noexcept { return episode_return_; }

  /// Each step appends {"step","action","observation","reward"} as one JSON
  /// line. Pass nullptr to stop.
  void set_trajectory_sink(std::ostream* sink) noexcept { sink_ = sink; }

 private:
  EnvConfig config_;
  Rng rng_;
  std::unique_ptr<GameSim> sim_;
  Observation observation_;
  int steps_ = 0;
  bool done_ = true;
  double episode_return_ = 0.0;
  std::int64_t previous_action_ = 0;
  std::ostream* sink_ = nullptr;
};

namespace pong {
inline constexpr int kTop = 30;
inline constexpr int kBottom = 190;
inline constexpr int kPlayerX = 140;
inline constexpr int kEnemyX = 16;
inline constexpr int kWinningScore = 21;
}  // namespace pong

namespace breakout {
inline constexpr int kLeftWall = 9;
inline constexpr int kRightWall = 152;
inline constexpr int kPaddleY = 189;
inline constexpr int kLives = 5;
inline constexpr int kColumns = 18;
/// Row keys top to bottom with their per-brick values.
inline constexpr std::pair<std::string_view, int> kRows[] = {
    {"RB", 7}, {"OB", 7}, {"YB", 4}, {"GB", 4}, {"AB", 1}, {"BB", 1}};
}  // namespace breakout

}  // namespace looplab
