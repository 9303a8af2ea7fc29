#include "looplab/environments.hpp"

#include <algorithm>
#include <array>
#include <ostream>

namespace looplab {

namespace {

constexpr std::int64_t kPongActions[] = {0, 2, 3};
constexpr std::int64_t kBreakoutActions[] = {0, 1, 2, 3};
constexpr std::int64_t kInvadersActions[] = {0, 1, 2, 3, 4, 5};

Value record_of(const ObjectRecord& o) {
  return Value(Record{{"x", o.x}, {"y", o.y}, {"w", o.w}, {"h", o.h}, {"dx", o.dx}, {"dy", o.dy}});
}

Value record_of(const Box& b) {
  return Value(Record{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
}

bool overlaps(int a0, int a1, int b0, int b1) { return a0 < b1 && b0 < a1; }

int sign_or(int v, int fallback) { return v > 0 ? 1 : v < 0 ? -1 : fallback; }

}  // namespace

class GameSim {
 public:
  virtual ~GameSim() = default;
  virtual void reset(Rng& rng) = 0;
  /// Advances one frame and returns its reward.
  virtual double frame(std::int64_t action, Rng& rng) = 0;
  virtual bool terminal() const = 0;
  virtual Observation observe() const = 0;
};

namespace {

class PongSim final : public GameSim {
 public:
  explicit PongSim(int cap) : cap_(cap) {}

  void reset(Rng& rng) override {
    player_score_ = enemy_score_ = 0;
    py_ = ey_ = 94;
    pdy_ = edy_ = 0;
    serve(rng);
  }

  double frame(std::int64_t action, Rng& rng) override {
    const int move = action == 2 ? -kSpeed : action == 3 ? kSpeed : 0;
    const int ny = std::clamp(py_ + move, kPaddleMin, kPaddleMax);
    pdy_ = ny - py_;
    py_ = ny;

    const int diff = (by_ + kBallH / 2) - (ey_ + kPaddleH / 2);
    const int ey = std::clamp(ey_ + std::clamp(diff / 2, -cap_, cap_), kPaddleMin, kPaddleMax);
    edy_ = ey - ey_;
    ey_ = ey;

    const int px = bx_;
    bx_ += bdx_;
    by_ += bdy_;
    if (by_ < pong::kTop) {
      by_ = 2 * pong::kTop - by_;
      bdy_ = -bdy_;
    } else if (by_ > pong::kBottom) {
      by_ = 2 * pong::kBottom - by_;
      bdy_ = -bdy_;
    }

    const int player_face = pong::kPlayerX - kBallW;
    const int enemy_face = pong::kEnemyX + kPaddleW;
    if (bdx_ > 0 && px < player_face && bx_ >= player_face && hits(py_)) {
      bx_ = 2 * player_face - bx_;
      bdx_ = -bdx_;
      bdy_ = deflect(py_);
    } else if (bdx_ < 0 && px >= enemy_face && bx_ < enemy_face && hits(ey_)) {
      bx_ = 2 * enemy_face - bx_;
      bdx_ = -bdx_;
      bdy_ = deflect(ey_);
    }

    if (bx_ > 160) {
      ++enemy_score_;
      serve(rng);
      return -1.0;
    }
    if (bx_ < 0) {
      ++player_score_;
      serve(rng);
      return 1.0;
    }
    return 0.0;
  }

  bool terminal() const override {
    return player_score_ >= pong::kWinningScore || enemy_score_ >= pong::kWinningScore;
  }

  Observation observe() const override {
    Observation o;
    o.objects = {
        {"Player", {pong::kPlayerX, py_, kPaddleW, kPaddleH, 0, pdy_}},
        {"Ball", {bx_, by_, kBallW, kBallH, bdx_, bdy_}},
        {"Enemy", {pong::kEnemyX, ey_, kPaddleW, kPaddleH, 0, edy_}},
    };
    return o;
  }

 private:
  static constexpr int kPaddleW = 4;
  static constexpr int kPaddleH = 16;
  static constexpr int kBallW = 2;
  static constexpr int kBallH = 4;
  static constexpr int kSpeed = 3;
  static constexpr int kPaddleMin = pong::kTop;
  static constexpr int kPaddleMax = pong::kBottom + kBallH - kPaddleH;

  bool hits(int paddle_y) const {
    return overlaps(by_, by_ + kBallH, paddle_y, paddle_y + kPaddleH);
  }

  int deflect(int paddle_y) const {
    const int offset = (by_ + kBallH / 2) - (paddle_y + kPaddleH / 2);
    const int d = std::clamp(offset / 3, -3, 3);
    return d == 0 ? sign_or(bdy_, 1) : d;
  }

  void serve(Rng& rng) {
    static constexpr int kDy[] = {-3, -2, -1, 1, 2, 3};
    bx_ = 78;
    by_ = 60 + static_cast<int>(uniform_index(rng, 101));
    bdx_ = uniform_index(rng, 2) == 0 ? 3 : -3;
    bdy_ = kDy[uniform_index(rng, 6)];
  }

  int cap_;
  int py_ = 94, ey_ = 94, pdy_ = 0, edy_ = 0;
  int bx_ = 78, by_ = 110, bdx_ = 3, bdy_ = 1;
  int player_score_ = 0, enemy_score_ = 0;
};

class BreakoutSim final : public GameSim {
 public:
  void reset(Rng& rng) override {
    for (auto& row : bricks_) row.fill(true);
    lives_ = breakout::kLives;
    px_ = 72;
    pdx_ = 0;
    serve(rng);
  }

  double frame(std::int64_t action, Rng& rng) override {
    const int move = action == 2 ? kSpeed : action == 3 ? -kSpeed : 0;
    const int nx = std::clamp(px_ + move, kPaddleMin, kPaddleMax);
    pdx_ = nx - px_;
    px_ = nx;

    bx_ += bdx_;
    if (bx_ < breakout::kLeftWall) {
      bx_ = 2 * breakout::kLeftWall - bx_;
      bdx_ = -bdx_;
    } else if (bx_ > breakout::kRightWall) {
      bx_ = 2 * breakout::kRightWall - bx_;
      bdx_ = -bdx_;
    }
    const int prev_bottom = by_ + kBallH;
    by_ += bdy_;
    if (by_ < kCeiling) {
      by_ = 2 * kCeiling - by_;
      bdy_ = -bdy_;
    }

    double reward = hit_brick();

    const int face = breakout::kPaddleY - kBallH;
    if (bdy_ > 0 && prev_bottom < breakout::kPaddleY && by_ + kBallH >= breakout::kPaddleY &&
        overlaps(bx_, bx_ + kBallW, px_, px_ + kPaddleW)) {
      by_ = 2 * face - by_;
      bdy_ = -bdy_;
      const int offset = (bx_ + kBallW / 2) - (px_ + kPaddleW / 2);
      const int d = std::clamp(offset / 3, -3, 3);
      bdx_ = d == 0 ? sign_or(bdx_, 1) : d;
    }

    if (by_ > 205) {
      --lives_;
      if (lives_ > 0) serve(rng);
    }
    return reward;
  }

  bool terminal() const override { return lives_ <= 0 || bricks_left() == 0; }

  Observation observe() const override {
    Observation o;
    o.objects = {
        {"Player", {px_, breakout::kPaddleY, kPaddleW, kPaddleH, pdx_, 0}},
        {"Ball", {bx_, by_, kBallW, kBallH, bdx_, bdy_}},
    };
    for (std::size_t r = 0; r < kRowCount; ++r) {
      std::vector<Box> spans;
      int start = -1;
      for (int c = 0; c <= breakout::kColumns; ++c) {
        const bool present = c < breakout::kColumns && bricks_[r][static_cast<std::size_t>(c)];
        if (present && start < 0) start = c;
        if (!present && start >= 0) {
          spans.push_back({kBrickLeft + kBrickW * start, row_top(r), kBrickW * (c - start), kBrickH});
          start = -1;
        }
      }
      o.groups.emplace_back(std::string(breakout::kRows[r].first), std::move(spans));
    }
    o.lives = lives_;
    return o;
  }

 private:
  static constexpr std::size_t kRowCount = std::size(breakout::kRows);
  static constexpr int kPaddleW = 16;
  static constexpr int kPaddleH = 4;
  static constexpr int kBallW = 2;
  static constexpr int kBallH = 4;
  static constexpr int kSpeed = 3;
  static constexpr int kPaddleMin = 8;
  static constexpr int kPaddleMax = 140;
  static constexpr int kCeiling = 32;
  static constexpr int kBrickLeft = 8;
  static constexpr int kBrickW = 8;
  static constexpr int kBrickH = 6;
  static constexpr int kFirstRowY = 57;

  static int row_top(std::size_t r) { return kFirstRowY + kBrickH * static_cast<int>(r); }

  int bricks_left() const {
    int n = 0;
    for (const auto& row : bricks_) n += static_cast<int>(std::count(row.begin(), row.end(), true));
    return n;
  }

  double hit_brick() {
    const int col = std::clamp((bx_ + kBallW / 2 - kBrickLeft) / kBrickW, 0, breakout::kColumns - 1);
    // Check rows in the order the ball meets them.
    for (std::size_t k = 0; k < kRowCount; ++k) {
      const std::size_t r = bdy_ < 0 ? kRowCount - 1 - k : k;
      if (!overlaps(by_, by_ + kBallH, row_top(r), row_top(r) + kBrickH)) continue;
      auto& brick = bricks_[r][static_cast<std::size_t>(col)];
      if (!brick) continue;
      brick = false;
      bdy_ = -bdy_;
      return breakout::kRows[r].second;
    }
    return 0.0;
  }

  void serve(Rng& rng) {
    static constexpr int kDx[] = {-2, -1, 1, 2};
    bx_ = 40 + static_cast<int>(uniform_index(rng, 81));
    by_ = 110;
    bdx_ = kDx[uniform_index(rng, 4)];
    bdy_ = 3;
  }

  std::array<std::array<bool, breakout::kColumns>, kRowCount> bricks_{};
  int lives_ = breakout::kLives;
  int px_ = 72, pdx_ = 0;
  int bx_ = 80, by_ = 110, bdx_ = 1, bdy_ = 3;
};

class InvadersSim final : public GameSim {
 public:
  void reset(Rng&) override {
    lives_ = 3;
    px_ = 77;
    pdx_ = 0;
    shields_ = {kShieldHp, kShieldHp, kShieldHp};
    player_bullet_.reset();
    enemy_bullets_.clear();
    new_wave();
  }

  double frame(std::int64_t action, Rng& rng) override {
    const bool fire = action == 1 || action == 4 || action == 5;
    const int dir = (action == 2 || action == 4) ? 1 : (action == 3 || action == 5) ? -1 : 0;
    const int nx = std::clamp(px_ + dir * kPlayerSpeed, 8, 152 - kPlayerW);
    pdx_ = nx - px_;
    px_ = nx;
    if (fire && !player_bullet_) {
      player_bullet_ = ObjectRecord{px_ + kPlayerW / 2, kPlayerY - 8, 1, 8, 0, -4};
    }

    ++clock_;
    if (clock_ % 4 == 0) march();

    double reward = 0.0;
    if (player_bullet_) {
      ObjectRecord& b = *player_bullet_;
      b.y += b.dy;
      bool gone = b.y + b.h < 20;
      for (std::size_t i = 0; !gone && i < alive_.size(); ++i) {
        if (!alive_[i]) continue;
        const ObjectRecord a = alien(i);
        if (overlaps(b.x, b.x + b.w, a.x, a.x + a.w) && overlaps(b.y, b.y + b.h, a.y, a.y + a.h)) {
          alive_[i] = false;
          reward += kRowValues[i / kCols];
          gone = true;
        }
      }
      gone = gone || hit_shield(b);
      if (gone) player_bullet_.reset();
    }

    if (enemy_bullets_.size() < 2 && uniform_unit(rng) < 0.04) enemy_fire(rng);
    for (auto it = enemy_bullets_.begin(); it != enemy_bullets_.end();) {
      it->y += it->dy;
      bool gone = it->y > 195 || hit_shield(*it);
      if (!gone && overlaps(it->x, it->x + it->w, px_, px_ + kPlayerW) &&
          overlaps(it->y, it->y + it->h, kPlayerY, kPlayerY + kPlayerH)) {
        --lives_;
        gone = true;
      }
      it = gone ? enemy_bullets_.erase(it) : it + 1;
    }

    if (std::none_of(alive_.begin(), alive_.end(), [](bool a) { return a; })) new_wave();
    return reward;
  }

  bool terminal() const override {
    if (lives_ <= 0) return true;
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (alive_[i]) {
        const ObjectRecord a = alien(i);
        if (a.y + a.h >= kPlayerY) return true;
      }
    }
    return false;
  }

  Observation observe() const override {
    Observation o;
    o.objects.emplace_back("Player", ObjectRecord{px_, kPlayerY, kPlayerW, kPlayerH, pdx_, 0});
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (alive_[i]) o.objects.emplace_back("Alien" + std::to_string(i), alien(i));
    }
    for (std::size_t s = 0; s < shields_.size(); ++s) {
      if (shields_[s] > 0) o.objects.emplace_back("Shield" + std::to_string(s), shield(s));
    }
    int n = 0;
    if (player_bullet_) o.objects.emplace_back("Bullet" + std::to_string(n++), *player_bullet_);
    for (const ObjectRecord& b : enemy_bullets_) {
      o.objects.emplace_back("Bullet" + std::to_string(n++), b);
    }
    o.lives = lives_;
    return o;
  }

 private:
  static constexpr std::size_t kCols = 6;
  static constexpr std::size_t kRowsN = 6;
  static constexpr int kRowValues[kRowsN] = {30, 25, 20, 15, 10, 5};
  static constexpr int kAlienW = 8;
  static constexpr int kAlienH = 10;
  static constexpr int kPlayerY = 185;
  static constexpr int kPlayerW = 7;
  static constexpr int kPlayerH = 10;
  static constexpr int kPlayerSpeed = 2;
  static constexpr int kShieldHp = 6;

  ObjectRecord alien(std::size_t i) const {
    const int r = static_cast<int>(i / kCols);
    const int c = static_cast<int>(i % kCols);
    return {ox_ + 16 * c, oy_ + 12 * r, kAlienW, kAlienH, march_dir_, 0};
  }

  static ObjectRecord shield(std::size_t s) {
    return {30 + 44 * static_cast<int>(s), 157, 12, 12, 0, 0};
  }

  bool hit_shield(const ObjectRecord& b) {
    for (std::size_t s = 0; s < shields_.size(); ++s) {
      if (shields_[s] <= 0) continue;
      const ObjectRecord sh = shield(s);
      if (overlaps(b.x, b.x + b.w, sh.x, sh.x + sh.w) && overlaps(b.y, b.y + b.h, sh.y, sh.y + sh.h)) {
        --shields_[s];
        return true;
      }
    }
    return false;
  }

  void march() {
    int lo = 1000, hi = -1000;
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (!alive_[i]) continue;
      const ObjectRecord a = alien(i);
      lo = std::min(lo, a.x);
      hi = std::max(hi, a.x + a.w);
    }
    if (lo + march_dir_ < 8 || hi + march_dir_ > 152) {
      march_dir_ = -march_dir_;
      oy_ += 4;
    } else {
      ox_ += march_dir_;
    }
  }

  void enemy_fire(Rng& rng) {
    std::vector<std::size_t> shooters;
    for (std::size_t c = 0; c < kCols; ++c) {
      for (std::size_t r = kRowsN; r-- > 0;) {
        if (alive_[r * kCols + c]) {
          shooters.push_back(r * kCols + c);
          break;
        }
      }
    }
    if (shooters.empty()) return;
    const ObjectRecord a = alien(shooters[uniform_index(rng, shooters.size())]);
    enemy_bullets_.push_back({a.x + a.w / 2, a.y + a.h, 1, 6, 0, 2});
  }

  void new_wave() {
    alive_.assign(kCols * kRowsN, true);
    ox_ = 22;
    oy_ = 40;
    march_dir_ = 1;
    clock_ = 0;
  }

  int lives_ = 3;
  int px_ = 77, pdx_ = 0;
  std::vector<bool> alive_;
  int ox_ = 22, oy_ = 40, march_dir_ = 1;
  long clock_ = 0;
  std::array<int, 3> shields_{};
  std::optional<ObjectRecord> player_bullet_;
  std::vector<ObjectRecord> enemy_bullets_;
};

std::unique_ptr<GameSim> make_sim(const EnvConfig& c) {
  switch (c.game) {
    case Game::pong:
      return std::make_unique<PongSim>(c.enemy_speed_cap);
    case Game::breakout:
      return std::make_unique<BreakoutSim>();
    case Game::invaders:
      return std::make_unique<InvadersSim>();
  }
  throw ConfigError("unknown game");
}

}  // namespace

std::string_view to_string(Game game) noexcept {
  switch (game) {
    case Game::pong:
      return "pong";
    case Game::breakout:
      return "breakout";
    case Game::invaders:
      return "invaders";
  }
  return "pong";
}

Game parse_game(std::string_view name) {
  for (Game g : {Game::pong, Game::breakout, Game::invaders}) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("unknown game '" + std::string(name) + "' (expected pong, breakout or invaders)");
}

std::span<const std::int64_t> legal_actions(Game game) noexcept {
  switch (game) {
    case Game::pong:
      return kPongActions;
    case Game::breakout:
      return kBreakoutActions;
    case Game::invaders:
      return kInvadersActions;
  }
  return kPongActions;
}

const ObjectRecord* Observation::find(std::string_view name) const {
  for (const auto& [k, v] : objects) {
    if (k == name) return &v;
  }
  return nullptr;
}

const std::vector<Box>* Observation::group(std::string_view name) const {
  for (const auto& [k, v] : groups) {
    if (k == name) return &v;
  }
  return nullptr;
}

Value to_value(const Observation& obs) {
  Record r;
  r.reserve(obs.objects.size() + obs.groups.size() + 2);
  for (const auto& [k, v] : obs.objects) r.emplace_back(k, record_of(v));
  for (const auto& [k, boxes] : obs.groups) {
    List items;
    items.reserve(boxes.size());
    for (const Box& b : boxes) items.push_back(record_of(b));
    r.emplace_back(k, Value(std::move(items)));
  }
  r.emplace_back("lives", obs.lives);
  r.emplace_back("reward", obs.reward);
  return Value(std::move(r));
}

std::string to_json(const Observation& obs) { return to_json(to_value(obs)); }

Environment::Environment(EnvConfig config) : config_(config) {
  if (config_.action_repeat < 1) throw ConfigError("action_repeat must be at least 1");
  if (!(config_.sticky_action_prob >= 0.0 && config_.sticky_action_prob <= 1.0)) {
    throw ConfigError("sticky_action_prob must lie in [0, 1]");
  }
  if (config_.max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (config_.enemy_speed_cap < 1) throw ConfigError("enemy_speed_cap must be at least 1");
  rng_.seed(derive_seed(config_.seed, "environment"));
  sim_ = make_sim(config_);
}

Environment::~Environment() = default;
Environment::Environment(Environment&&) noexcept = default;
Environment& Environment::operator=(Environment&&) noexcept = default;

const Observation& Environment::reset() {
  sim_->reset(rng_);
  observation_ = sim_->observe();
  steps_ = 0;
  done_ = false;
  episode_return_ = 0.0;
  previous_action_ = 0;
  return observation_;
}

StepResult Environment::step(std::int64_t action) {
  if (done_) throw EnvironmentError("episode is finished; reset before stepping");
  const auto legal = legal_actions(config_.game);
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw EnvironmentError("illegal action " + std::to_string(action) + " for " +
                           std::string(to_string(config_.game)));
  }
  double reward = 0.0;
  for (int f = 0; f < config_.action_repeat; ++f) {
    std::int64_t a = action;
    if (config_.sticky_action_prob > 0.0 && uniform_unit(rng_) < config_.sticky_action_prob) {
      a = previous_action_;
    }
    previous_action_ = a;
    reward += sim_->frame(a, rng_);
    if (sim_->terminal()) break;
  }
  ++steps_;
  episode_return_ += reward;
  done_ = sim_->terminal() || steps_ >= config_.max_steps;
  observation_ = sim_->observe();
  observation_.reward = reward;
  if (sink_ != nullptr) {
    *sink_ << "{\"step\":" << steps_ << ",\"action\":" << action
           << ",\"observation\":" << to_json(observation_)
           << ",\"reward\":" << looplab::to_json(Value(reward)) << "}\n";
  }
  return StepResult{observation_, reward, done_};
}

}  // namespace looplab
