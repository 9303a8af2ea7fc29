#include "looplab/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "looplab/text_tasks.hpp"

namespace looplab {

namespace {

// ---------------------------------------------------------------- pong

CatalogForm pong_predict_current() {
  return {"current", R"(let predicted_ball_y = none
if has(obs, "Ball") {
  predicted_ball_y = obs.Ball.y
}
return predicted_ball_y)",
          {}};
}

CatalogForm pong_predict_intercept() {
  return {"intercept", R"(let predicted_ball_y = none
if has(obs, "Ball") {
  let ball = obs.Ball
  predicted_ball_y = ball.y
  if ball.dx > 0 {
    let y = ball.y + ball.dy * (PLAYER_X - ball.x) / ball.dx
    let folds = 0
    while (y < TOP or y > BOTTOM) and folds < 4 {
      if y < TOP {
        y = 2 * TOP - y
      } else {
        y = 2 * BOTTOM - y
      }
      folds = folds + 1
    }
    predicted_ball_y = y
  }
}
return predicted_ball_y)",
          {}};
}

CatalogForm pong_select_random() {
  return {"random", R"(if predicted_ball_y != none and has(obs, "Player") {
  return random_choice([DECREASE_Y, INCREASE_Y])
}
return NOOP)",
          {}};
}

CatalogForm pong_select_margin() {
  return {"margin", R"(if predicted_ball_y == none or not has(obs, "Player") {
  return NOOP
}
let center = obs.Player.y + obs.Player.h / 2
if center > predicted_ball_y + {{margin}} {
  return DECREASE_Y
}
if center < predicted_ball_y - {{margin}} {
  return INCREASE_Y
}
return NOOP)",
          {{"margin", {"0", "2", "4", "6", "8"}, 2}}};
}

TaskSpec make_pong() {
  TaskSpec t;
  t.name = "pong";
  t.family = TaskFamily::arcade;
  t.table = "pong";
  t.background =
      "You are tuning a program that plays a paddle-and-ball game on the right-hand side of "
      "the court. Each step the program receives a map of on-screen objects and must return "
      "one action. A point is won when the opposing paddle misses the ball and lost when the "
      "program's paddle misses it; the first side to 21 points ends the game.";
  t.slots = {
      {"predict_ball_trajectory",
       {{"obs"}, "number or none"},
       "Estimates the y coordinate the ball will have when it arrives at the paddle column "
       "x = 140. The ball bounces off horizontal walls at y = 30 and y = 190; the opponent "
       "paddle sits at x = 16. obs maps names (Player, Ball, Enemy) to records with fields "
       "x, y, w, h, dx, dy, plus lives and reward. Returns none when there is nothing to "
       "estimate.",
       {pong_predict_current(), pong_predict_intercept()}},
      {"select_action",
       {{"predicted_ball_y", "obs"}, "action in {0, 2, 3}"},
       "Turns the estimate into a move. Action 2 (DECREASE_Y) shifts the paddle toward "
       "smaller y, action 3 (INCREASE_Y) toward larger y, and 0 (NOOP) holds it. The "
       "paddle's vertical midpoint is Player.y + Player.h / 2.",
       {pong_select_random(), pong_select_margin()}},
  };
  t.wiring = {"obs",
              {{"predicted_ball_y", "predict_ball_trajectory", {"obs"}},
               {"action", "select_action", {"predicted_ball_y", "obs"}}},
              "action"};
  t.output = {OutputSpec::Kind::action, {0, 2, 3}};
  t.constants = {{"NOOP", Value(0)},       {"DECREASE_Y", Value(2)}, {"INCREASE_Y", Value(3)},
                 {"TOP", Value(30)},       {"BOTTOM", Value(190)},   {"PLAYER_X", Value(140)}};
  t.one_function_name = "play";
  t.one_function_returns = "action in {0, 2, 3}";
  return t;
}

// ---------------------------------------------------------------- breakout

TaskSpec make_breakout() {
  TaskSpec t;
  t.name = "breakout";
  t.family = TaskFamily::arcade;
  t.table = "breakout";
  t.background =
      "You are tuning a program that steers a paddle along the bottom of a brick-breaking "
      "game. Each step the program receives a map of on-screen objects and returns one "
      "action. Bricks pay 7 (top two rows), 4 (middle rows) or 1 (bottom rows) points; a "
      "life is lost whenever the ball falls past the paddle, and the game ends with no "
      "lives left.";
  CatalogForm none_predict{"none", "let predicted_ball_x = none\nreturn predicted_ball_x", {}};
  CatalogForm current_predict{"current", R"(let predicted_ball_x = none
if has(obs, "Ball") {
  predicted_ball_x = obs.Ball.x
}
return predicted_ball_x)",
                              {}};
  CatalogForm intercept_predict{"intercept", R"(let predicted_ball_x = none
if has(obs, "Ball") {
  let ball = obs.Ball
  predicted_ball_x = ball.x
  if ball.dy > 0 {
    let x = ball.x + ball.dx * (PADDLE_Y - ball.y) / ball.dy
    let folds = 0
    while (x < LEFT_WALL or x > RIGHT_WALL) and folds < 6 {
      if x < LEFT_WALL {
        x = 2 * LEFT_WALL - x
      } else {
        x = 2 * RIGHT_WALL - x
      }
      folds = folds + 1
    }
    predicted_ball_x = x
  }
}
return predicted_ball_x)",
                                {}};
  CatalogForm none_target{"none", "let target_x = none\nreturn target_x", {}};
  CatalogForm follow_target{"follow", R"(let target_x = none
if predicted_ball_x != none {
  target_x = predicted_ball_x + 1 + {{offset}}
}
return target_x)",
                            {{"offset", {"-6", "-3", "0", "3", "6"}, 2}}};
  CatalogForm deadzone_select{"deadzone", R"(if target_x == none or not has(obs, "Player") {
  return NOOP
}
let center = obs.Player.x + obs.Player.w / 2
if abs(center - target_x) < {{deadzone}} {
  return NOOP
}
if center > target_x {
  return LEFT
}
return RIGHT)",
                              {{"deadzone", {"1", "2", "4", "6"}, 1}}};
  t.slots = {
      {"predict_ball_trajectory",
       {{"obs"}, "number or none"},
       "Estimates the x coordinate at which the ball will reach the paddle row y = 189. "
       "Side walls reflect the ball at x = 9 and x = 152. obs maps Player and Ball to "
       "records with x, y, w, h, dx, dy; brick rows RB, OB, YB, GB, AB, BB (top to bottom) "
       "hold lists of boxes with x, y, w, h. Returns none when there is nothing to estimate.",
       {none_predict, current_predict, intercept_predict}},
      {"generate_paddle_target",
       {{"predicted_ball_x", "obs"}, "number or none"},
       "Picks the x coordinate the paddle's midpoint should move to, given the estimate. "
       "Where the ball lands on the paddle changes its outgoing angle, so an offset can aim "
       "returns at particular bricks. Returns none for no preference.",
       {none_target, follow_target}},
      {"select_paddle_action",
       {{"target_x", "obs"}, "action in {0, 1, 2, 3}"},
       "Moves the paddle toward the target: 2 (RIGHT) increases x, 3 (LEFT) decreases x, "
       "0 (NOOP) holds. The paddle midpoint is Player.x + Player.w / 2. The ball is served "
       "automatically, so 1 (FIRE) has no further effect.",
       {deadzone_select}},
  };
  t.wiring = {"obs",
              {{"predicted_ball_x", "predict_ball_trajectory", {"obs"}},
               {"target_x", "generate_paddle_target", {"predicted_ball_x", "obs"}},
               {"action", "select_paddle_action", {"target_x", "obs"}}},
              "action"};
  t.output = {OutputSpec::Kind::action, {0, 1, 2, 3}};
  t.constants = {{"NOOP", Value(0)},       {"FIRE", Value(1)},        {"RIGHT", Value(2)},
                 {"LEFT", Value(3)},       {"LEFT_WALL", Value(9)},   {"RIGHT_WALL", Value(152)},
                 {"PADDLE_Y", Value(189)}};
  t.one_function_name = "play";
  t.one_function_returns = "action in {0, 1, 2, 3}";
  return t;
}

// ---------------------------------------------------------------- invaders

TaskSpec make_invaders() {
  TaskSpec t;
  t.name = "invaders";
  t.family = TaskFamily::arcade;
  t.table = "invaders";
  t.background =
      "You are tuning a program that controls a cannon at the bottom of a shooting game. "
      "A formation of aliens marches sideways and downward while dropping bullets. Each "
      "step the program receives a map of on-screen objects and returns one action. Aliens "
      "in higher rows are worth more; the game ends when lives run out or the formation "
      "reaches the cannon.";
  const std::string shoot_head = R"(let shoot = false
let bullet_live = false
for key in keys(obs) {
  if starts_with(key, "Bullet") and obs[key].dy < 0 {
    bullet_live = true
  }
}
)";
  CatalogForm shoot_random{"random", shoot_head + R"(if not bullet_live {
  shoot = random_bool()
}
return shoot)",
                           {}};
  CatalogForm shoot_always{"always", shoot_head + R"(if not bullet_live {
  shoot = true
}
return shoot)",
                           {}};
  CatalogForm move_random{"random", "let movement = random_choice([-1, 0, 1])\nreturn movement",
                          {}};
  CatalogForm move_track{"track", R"(let movement = 0
if has(obs, "Player") {
  let px = obs.Player.x + obs.Player.w / 2
  let best = none
  for key in keys(obs) {
    if starts_with(key, "Alien") {
      let ax = obs[key].x + obs[key].w / 2
      if best == none or abs(ax - px) < abs(best - px) {
        best = ax
      }
    }
  }
  if best != none and best > px + {{slack}} {
    movement = 1
  } elif best != none and best < px - {{slack}} {
    movement = -1
  }
}
return movement)",
                         {{"slack", {"1", "3", "6"}, 1}}};
  CatalogForm combine{"table", R"(if shoot and movement > 0 {
  return RIGHT_FIRE
}
if shoot and movement < 0 {
  return LEFT_FIRE
}
if shoot {
  return FIRE
}
if movement > 0 {
  return RIGHT
}
if movement < 0 {
  return LEFT
}
return NOOP)",
                      {}};
  t.slots = {
      {"decide_shoot",
       {{"obs"}, "bool"},
       "Decides whether to fire this step. Only one cannon shot may be on screen; cannon "
       "shots are the Bullet entries moving upward (dy < 0), alien shots move downward. obs "
       "maps Player, Alien<i>, Shield<i> and Bullet<i> to records with x, y, w, h, dx, dy.",
       {shoot_random, shoot_always}},
      {"decide_movement",
       {{"obs"}, "-1, 0 or 1"},
       "Chooses a horizontal direction: -1 moves toward smaller x, 1 toward larger x, 0 "
       "stays. Shields sit above the cannon and absorb shots from both sides.",
       {move_random, move_track}},
      {"combine_actions",
       {{"shoot", "movement"}, "action in {0, 1, 2, 3, 4, 5}"},
       "Maps the two decisions onto one action: 0 NOOP, 1 FIRE, 2 RIGHT, 3 LEFT, "
       "4 RIGHT_FIRE, 5 LEFT_FIRE.",
       {combine}},
  };
  t.wiring = {"obs",
              {{"shoot", "decide_shoot", {"obs"}},
               {"movement", "decide_movement", {"obs"}},
               {"action", "combine_actions", {"shoot", "movement"}}},
              "action"};
  t.output = {OutputSpec::Kind::action, {0, 1, 2, 3, 4, 5}};
  t.constants = {{"NOOP", Value(0)},  {"FIRE", Value(1)},       {"RIGHT", Value(2)},
                 {"LEFT", Value(3)},  {"RIGHT_FIRE", Value(4)}, {"LEFT_FIRE", Value(5)}};
  t.one_function_name = "play";
  t.one_function_returns = "action in {0, 1, 2, 3, 4, 5}";
  return t;
}

// ---------------------------------------------------------------- bbeh

TaskSpec make_bbeh() {
  TaskSpec t;
  t.name = "bbeh";
  t.family = TaskFamily::text;
  t.metric_kind = TaskKind::classification;
  t.background =
      "You are tuning a two-stage question-answering program. The first stage builds a "
      "prompt around the question and queries a language model through base_model(prompt); "
      "the second stage pulls the final answer out of the model's reply. Answers are "
      "compared with the expected answer after trimming whitespace; multiple-choice "
      "answers are compared by their (X) token.";
  CatalogForm prompt{"prompt", R"(let prompt = {{approach}} + {{format}} + "\n\nQuestion: " + question
let response = base_model(prompt)
return response)",
                     {{"approach",
                       {R"("")", R"("Work through the question step by step. ")",
                        R"("Work through the question step by step and verify the result. ")"},
                       0},
                      {"format",
                       {R"("Finish with a final line of the form 'Answer: <answer>'.")",
                        R"("Keep the reply short.")"},
                       0}}};
  CatalogForm split_last{"split", R"(let parts = split(response, "Answer:")
let answer = trim(parts[-1])
return answer)",
                         {}};
  t.slots = {
      {"call_llm",
       {{"question"}, "text"},
       "Wraps the question in instructions and returns the model's raw reply. The reply "
       "format follows whatever the instructions request.",
       {prompt}},
      {"answer_extraction",
       {{"response"}, "text"},
       "Extracts the final answer from the raw reply. Bracket tasks expect the closing "
       "characters only, boolean tasks True or False, multiple-choice tasks a token such "
       "as (B).",
       {split_last}},
  };
  t.wiring = {"question",
              {{"response", "call_llm", {"question"}},
               {"answer", "answer_extraction", {"response"}}},
              "answer"};
  t.output = {OutputSpec::Kind::text, {}};
  t.one_function_name = "solve";
  t.one_function_returns = "text";
  t.uses_base_model = true;
  return t;
}

// ---------------------------------------------------------------- tabular

TaskSpec make_spaceship() {
  TaskSpec t;
  t.name = "spaceship";
  t.family = TaskFamily::tabular;
  t.metric_kind = TaskKind::classification;
  t.table = "spaceship_f1";
  t.background =
      "You are tuning a small classification pipeline over passenger records. Each record "
      "has age, cryo_sleep (bool), room_service and spa (amounts spent) and deck (a "
      "letter). The pipeline must output 1 when the passenger was transported and 0 "
      "otherwise; quality is measured by F1 on the positive class.";
  t.slots = {
      {"preprocess",
       {{"row"}, "record"},
       "Turns a raw passenger record into the features the classifier reads.",
       {{"features", R"(let features = {cryo: row.cryo_sleep, spend: row.room_service + row.spa, age: row.age}
return features)",
         {}}}},
      {"predict",
       {{"features"}, "0 or 1"},
       "Classifies one passenger from its features; 1 means transported.",
       {{"spend_rule", R"(if features.spend < {{threshold}} {
  return 1
}
return 0)",
         {{"threshold", {"100", "200", "400", "800", "1600"}, 4}}},
        {"cryo_rule", R"(if features.cryo {
  return 1
}
if features.spend < {{threshold}} and features.age < {{age}} {
  return 1
}
return 0)",
         {{"threshold", {"100", "200", "400", "800", "1600"}, 2},
          {"age", {"25", "35", "50"}, 1}}}}},
  };
  t.wiring = {"row",
              {{"features", "preprocess", {"row"}}, {"prediction", "predict", {"features"}}},
              "prediction"};
  t.output = {OutputSpec::Kind::number, {}};
  t.one_function_name = "train_model";
  t.one_function_returns = "0 or 1";
  return t;
}

TaskSpec make_housing() {
  TaskSpec t;
  t.name = "housing";
  t.family = TaskFamily::tabular;
  t.metric_kind = TaskKind::regression;
  t.table = "housing_r2";
  t.background =
      "You are tuning a small regression pipeline over house records. Each record has "
      "rooms, age (years) and distance (km to the centre). The pipeline must output a "
      "price estimate in thousands; quality is measured by r2 against the true prices.";
  t.slots = {
      {"preprocess",
       {{"row"}, "record"},
       "Turns a raw house record into the features the regressor reads.",
       {{"features", R"(let features = {rooms: row.rooms, age: row.age, distance: row.distance}
return features)",
         {}}}},
      {"predict",
       {{"features"}, "number"},
       "Estimates the price of one house from its features.",
       {{"linear",
         "return {{base}} + {{per_room}} * features.rooms - {{per_year}} * features.age - "
         "{{per_km}} * features.distance",
         {{"base", {"0", "20", "40", "60"}, 0},
          {"per_room", {"10", "15", "20", "25", "30"}, 0},
          {"per_year", {"0", "0.3", "0.6"}, 0},
          {"per_km", {"0", "1.5", "3", "4.5"}, 0}}}}},
  };
  t.wiring = {"row",
              {{"features", "preprocess", {"row"}}, {"prediction", "predict", {"features"}}},
              "prediction"};
  t.output = {OutputSpec::Kind::number, {}};
  t.one_function_name = "train_model";
  t.one_function_returns = "number";
  return t;
}

const std::vector<TaskSpec>& registry() {
  static const std::vector<TaskSpec> tasks{make_pong(),  make_breakout(),  make_invaders(),
                                           make_bbeh(),  make_spaceship(), make_housing()};
  return tasks;
}

constexpr std::string_view kTaskNames[] = {"pong", "breakout",  "invaders",
                                           "bbeh", "spaceship", "housing"};

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t at = 0;
  while ((at = text.find(from, at)) != std::string::npos) {
    text.replace(at, from.size(), to);
    at += to.size();
  }
  return text;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    out.emplace_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    if (nl == std::string_view::npos) return out;
    start = nl + 1;
  }
}

}  // namespace

std::string_view to_string(ArtifactInit init) noexcept {
  return init == ArtifactInit::one_function ? "one_function" : "many_function";
}

ArtifactInit parse_artifact_init(std::string_view name) {
  if (name == "one_function") return ArtifactInit::one_function;
  if (name == "many_function") return ArtifactInit::many_function;
  throw ConfigError("unknown artifact_init '" + std::string(name) +
                    "' (expected one_function or many_function)");
}

std::string render_form(const CatalogForm& form, std::span<const std::size_t> choice) {
  if (choice.size() != form.params.size()) {
    throw ArtifactError("form '" + form.name + "' takes " + std::to_string(form.params.size()) +
                        " parameter value(s)");
  }
  std::string out;
  std::size_t i = 0;
  while (true) {
    const auto open = form.body.find("{{", i);
    if (open == std::string::npos) {
      out.append(form.body, i);
      return out;
    }
    const auto close = form.body.find("}}", open);
    if (close == std::string::npos) throw ArtifactError("unterminated hole in form '" + form.name + "'");
    out.append(form.body, i, open - i);
    const std::string name = form.body.substr(open + 2, close - open - 2);
    std::size_t k = 0;
    while (k < form.params.size() && form.params[k].name != name) ++k;
    if (k == form.params.size()) {
      throw ArtifactError("form '" + form.name + "' has no parameter '" + name + "'");
    }
    if (choice[k] >= form.params[k].values.size()) {
      throw ArtifactError("value index out of range for parameter '" + name + "'");
    }
    out += form.params[k].values[choice[k]];
    i = close + 2;
  }
}

std::string render_initial(const CatalogForm& form) {
  std::vector<std::size_t> choice;
  for (const CatalogParam& p : form.params) choice.push_back(p.initial);
  return render_form(form, choice);
}

std::string join_documentation(std::span<const Slot> slots) {
  std::string out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) out += "\n\n";
    out += slots[i].documentation;
  }
  return out;
}

Artifact init_many_function(const TaskSpec& spec) {
  std::vector<Slot> slots;
  for (const SlotSpec& s : spec.slots) {
    slots.push_back(Slot{s.name, s.signature, s.documentation, render_initial(s.forms.at(0)), true});
  }
  return Artifact(spec.name, std::move(slots), spec.wiring, spec.output, spec.constants);
}

std::string compose_one_function(const TaskSpec& spec, std::span<const std::string> bodies) {
  const auto& calls = spec.wiring.calls;
  if (bodies.size() != calls.size() || spec.slots.size() != calls.size()) {
    throw ArtifactError("task '" + spec.name + "': one body per wiring call is required");
  }
  std::string out;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const SlotSpec& slot = spec.slots[i];
    if (slot.name != calls[i].slot || slot.signature.params != calls[i].args) {
      throw ArtifactError("task '" + spec.name + "': slot '" + slot.name +
                          "' cannot be inlined; its parameters must match the wiring names");
    }
    std::vector<std::string> lines = lines_of(bodies[i]);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (i + 1 < calls.size()) {
      if (lines.empty() || trim(lines.back()) != "return " + calls[i].output) {
        throw ArtifactError("task '" + spec.name + "': slot '" + slot.name +
                            "' must end with 'return " + calls[i].output + "' to be inlined");
      }
      lines.pop_back();
    }
    if (i) out += "\n\n";
    out += "# " + slot.name;
    for (const std::string& line : lines) out += "\n" + line;
  }
  return out;
}

Artifact init_one_function(const TaskSpec& spec) {
  const Artifact many = init_many_function(spec);
  std::vector<std::string> bodies;
  for (const Slot& s : many.slots()) bodies.push_back(s.body);
  Slot one{spec.one_function_name,
           {{spec.wiring.input}, spec.one_function_returns},
           join_documentation(many.slots()),
           compose_one_function(spec, bodies),
           true};
  Wiring w{spec.wiring.input,
           {{spec.wiring.result, spec.one_function_name, {spec.wiring.input}}},
           spec.wiring.result};
  return Artifact(spec.name, {one}, w, spec.output, spec.constants);
}

Artifact init_artifact(const TaskSpec& spec, ArtifactInit init) {
  return init == ArtifactInit::one_function ? init_one_function(spec) : init_many_function(spec);
}

Catalog many_function_catalog(const TaskSpec& spec) {
  Catalog out;
  for (const SlotSpec& s : spec.slots) out.push_back(SlotCatalog{s.name, s.forms});
  return out;
}

Catalog one_function_catalog(const TaskSpec& spec) {
  std::vector<std::size_t> pick(spec.slots.size(), 0);
  SlotCatalog whole{spec.one_function_name, {}};
  while (true) {
    CatalogForm f;
    std::vector<std::string> bodies;
    for (std::size_t i = 0; i < spec.slots.size(); ++i) {
      const SlotSpec& s = spec.slots[i];
      const CatalogForm& part = s.forms[pick[i]];
      if (i) f.name += "+";
      f.name += part.name;
      std::string body = part.body;
      for (const CatalogParam& p : part.params) {
        body = replace_all(body, "{{" + p.name + "}}", "{{" + s.name + "." + p.name + "}}");
        CatalogParam renamed = p;
        renamed.name = s.name + "." + p.name;
        f.params.push_back(std::move(renamed));
      }
      bodies.push_back(std::move(body));
    }
    f.body = compose_one_function(spec, bodies);
    whole.forms.push_back(std::move(f));
    std::size_t i = spec.slots.size();
    while (i > 0) {
      --i;
      if (++pick[i] < spec.slots[i].forms.size()) break;
      pick[i] = 0;
      if (i == 0) return {whole};
    }
    if (spec.slots.empty()) return {whole};
  }
}

Catalog task_catalog(const TaskSpec& spec, ArtifactInit init) {
  return init == ArtifactInit::one_function ? one_function_catalog(spec)
                                            : many_function_catalog(spec);
}

const TaskSpec& builtin_task(std::string_view name) {
  for (const TaskSpec& t : registry()) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected pong, breakout, invaders, bbeh, spaceship or housing)");
}

std::span<const std::string_view> builtin_task_names() noexcept { return kTaskNames; }

HostMap task_host_functions(const TaskSpec& spec) {
  HostMap out;
  if (spec.uses_base_model) {
    out.emplace("base_model", [](std::span<const Value> args) -> Value {
      if (args.size() != 1 || args[0].type() != Value::Type::string) {
        throw ExecutionError(ExecutionError::Kind::type, "base_model", 0, 0,
                             "base_model expects one text argument");
      }
      return Value(simulated_base_model(args[0].as_string()));
    });
  }
  return out;
}

std::vector<TabularExample> generate_tabular_dataset(std::string_view task, std::size_t count,
                                                     std::uint64_t seed) {
  Rng rng(derive_seed(seed, task));
  std::vector<TabularExample> out;
  out.reserve(count);
  if (task == "spaceship") {
    static constexpr std::string_view kDecks = "ABCDEFG";
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t age = 1 + static_cast<std::int64_t>(uniform_index(rng, 79));
      const bool cryo = uniform_index(rng, 3) == 0;
      const double room = cryo ? 0.0 : std::floor(uniform_unit(rng) * 1200.0);
      const double spa = cryo ? 0.0 : std::floor(uniform_unit(rng) * 1200.0);
      const char deck = kDecks[uniform_index(rng, kDecks.size())];
      bool label = cryo || (room + spa < 400.0 && age < 35);
      if (uniform_unit(rng) < 0.1) label = !label;
      Record row{{"age", Value(age)},
                 {"cryo_sleep", Value(cryo)},
                 {"room_service", Value(room)},
                 {"spa", Value(spa)},
                 {"deck", Value(std::string(1, deck))}};
      out.push_back({Value(std::move(row)), label ? 1.0 : 0.0});
    }
    return out;
  }
  if (task == "housing") {
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t rooms = 3 + static_cast<std::int64_t>(uniform_index(rng, 7));
      const std::int64_t age = 1 + static_cast<std::int64_t>(uniform_index(rng, 100));
      const double distance = 1.0 + std::floor(uniform_unit(rng) * 110.0) / 10.0;
      double noise = 0.0;
      for (int k = 0; k < 4; ++k) noise += uniform_unit(rng) - 0.5;
      const double price = 40.0 + 25.0 * static_cast<double>(rooms) -
                           0.3 * static_cast<double>(age) - 3.0 * distance + 16.0 * noise;
      Record row{{"rooms", Value(rooms)}, {"age", Value(age)}, {"distance", Value(distance)}};
      out.push_back({Value(std::move(row)), price});
    }
    return out;
  }
  throw ConfigError("no tabular dataset named '" + std::string(task) + "'");
}

}  // namespace looplab
