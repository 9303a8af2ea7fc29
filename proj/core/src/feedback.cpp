#include "looplab/feedback.hpp"

#include <cctype>
#include <cmath>
#include <regex>

#include "looplab/error.hpp"
#include "looplab/util.hpp"

namespace looplab {

namespace {

StageRow row(std::string name, Stage stage, std::optional<double> lower,
             bool lower_inclusive, std::optional<double> upper,
             bool upper_inclusive, std::string message) {
  return StageRow{std::move(name), stage, lower, lower_inclusive, upper,
                  upper_inclusive, std::move(message)};
}

constexpr std::nullopt_t open = std::nullopt;

std::string counted_points(long long n) {
  return std::to_string(n) + (n == 1 ? " point" : " points");
}

}  // namespace

bool StageRow::contains(double value) const {
  if (lower) {
    if (lower_inclusive ? value < *lower : value <= *lower) return false;
  }
  if (upper) {
    if (upper_inclusive ? value > *upper : value >= *upper) return false;
  }
  return true;
}

StageTable::StageTable(std::string name, std::string metric,
                       std::vector<StageRow> rows)
    : name_(std::move(name)), metric_(std::move(metric)), rows_(std::move(rows)) {}

void StageTable::validate() const {
  auto bad = [&](const std::string& why) {
    return ConfigError("stage table '" + name_ + "': " + why);
  };
  if (rows_.empty()) throw bad("no rows");
  if (rows_.front().lower) throw bad("first row must be unbounded below");
  if (rows_.back().upper) throw bad("last row must be unbounded above");
  for (std::size_t i = 0; i + 1 < rows_.size(); ++i) {
    const StageRow& a = rows_[i];
    const StageRow& b = rows_[i + 1];
    if (!a.upper || !b.lower || *a.upper != *b.lower) {
      throw bad("rows '" + a.name + "' and '" + b.name + "' do not meet");
    }
    if (a.upper_inclusive == b.lower_inclusive) {
      throw bad("boundary " + format_real(*a.upper) +
                " must belong to exactly one row");
    }
    if (b.upper && !(*b.upper > *b.lower)) {
      throw bad("boundaries must be strictly increasing");
    }
  }
  for (const StageRow& r : rows_) {
    if (r.lower && !std::isfinite(*r.lower)) throw bad("non-finite boundary");
    if (r.upper && !std::isfinite(*r.upper)) throw bad("non-finite boundary");
  }
}

const StageRow& StageTable::select(double value) const {
  if (std::isnan(value)) {
    throw MetricError("stage table '" + name_ + "': metric value is NaN");
  }
  for (const StageRow& r : rows_) {
    if (r.contains(value)) return r;
  }
  throw MetricError("stage table '" + name_ + "': no row contains " +
                    format_real(value));
}

std::string render_template(std::string_view message_template,
                            const FillValues& fill) {
  std::string out;
  out.reserve(message_template.size());
  std::size_t i = 0;
  while (i < message_template.size()) {
    const char c = message_template[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    const auto close = message_template.find('}', i + 1);
    if (close == std::string_view::npos) {
      throw TemplateError("unterminated placeholder in template");
    }
    const std::string_view key = message_template.substr(i + 1, close - i - 1);
    auto it = fill.find(key);
    if (it == fill.end()) {
      throw TemplateError("no value for placeholder {" + std::string(key) +
                          "}");
    }
    out += it->second;
    i = close + 1;
  }
  return out;
}

FeedbackRecord staged_feedback(double metric_value, const StageTable& table,
                               const FillValues& fill) {
  const StageRow& r = table.select(metric_value);
  return FeedbackRecord{metric_value, render_template(r.message_template, fill),
                        r.stage, r.name};
}

namespace tables {

StageTable pong() {
  return StageTable(
      "pong", "episode_return",
      {row("low", Stage::low, open, false, 0.0, true,
           "Your score is {score} points. Try to improve paddle positioning "
           "to prevent opponent scoring."),
       row("medium", Stage::medium, 0.0, false, 19.0, false,
           "Keep it up! You're scoring {score} points against the opponent "
           "but you are still {to_win} from winning the game. Try improving "
           "paddle positioning to prevent opponent scoring."),
       row("high", Stage::high, 19.0, true, open, false,
           "Good job! You're close to winning the game! You're scoring "
           "{score} points against the opponent, only {to_win} short of "
           "winning.")});
}

StageTable breakout() {
  return StageTable(
      "breakout", "episode_return",
      {row("low", Stage::low, open, false, 0.0, true,
           "Your score is {score} points. Try to improve paddle positioning "
           "to return the ball and avoid losing lives."),
       row("medium", Stage::medium, 0.0, false, 300.0, false,
           "Keep it up! You're scoring {score} points against the opponent "
           "but you are still {to_win} from winning the game. Try improving "
           "paddle positioning to return the ball and avoid losing lives."),
       row("high", Stage::high, 300.0, true, open, false,
           "Good job! You're close to winning the game! You're scoring "
           "{score} points against the opponent, try ensuring you return the "
           "ball, only {to_win} short of winning.")});
}

StageTable invaders() {
  return StageTable(
      "invaders", "episode_return",
      {row("low", Stage::low, open, false, 100.0, false,
           "Your average score is {score}. Try to improve your strategy for "
           "shooting aliens and dodging projectiles."),
       row("medium", Stage::medium, 100.0, true, 300.0, false,
           "Good progress! Your average score is {score}. Focus on better "
           "timing for shooting and avoiding enemy projectiles."),
       row("high", Stage::high, 300.0, true, open, false,
           "Great job! You're performing well with an average score of "
           "{score}. Try to improve your shooting accuracy and dodging.")});
}

StageTable spaceship_f1() {
  return StageTable(
      "spaceship_f1", "f1",
      {row("poor", Stage::low, open, false, 0.5, false,
           "Model performance is poor. Try better feature engineering and "
           "preprocessing."),
       row("promising", Stage::medium, 0.5, true, 0.7, false,
           "Model is showing promise but needs improvement. Consider class "
           "balancing techniques."),
       row("good", Stage::high, 0.7, true, 0.8, false,
           "Model is performing well. Fine-tune hyperparameters for further "
           "improvements."),
       row("excellent", Stage::high, 0.8, true, open, false,
           "Excellent performance! Focus on preventing overfitting.")});
}

StageTable housing_r2() {
  return StageTable(
      "housing_r2", "r2",
      {row("below_baseline", Stage::low, open, false, 0.0, true,
           "Model is performing worse than baseline. Focus on better feature "
           "engineering and selection."),
       row("poor", Stage::low, 0.0, false, 0.5, false,
           "Model has poor predictive power. Try more advanced preprocessing "
           "or different algorithms."),
       row("improving", Stage::medium, 0.5, true, 0.7, false,
           "Model is improving but still has room for growth. Consider "
           "feature interactions."),
       row("good", Stage::high, 0.7, true, open, false,
           "Model is performing well. Fine-tune hyperparameters for further "
           "improvements.")});
}

std::optional<StageTable> by_name(std::string_view name) {
  if (name == "pong") return pong();
  if (name == "breakout") return breakout();
  if (name == "invaders") return invaders();
  if (name == "spaceship_f1") return spaceship_f1();
  if (name == "housing_r2") return housing_r2();
  return std::nullopt;
}

}  // namespace tables

FillValues game_fill(std::string_view game, double episode_return) {
  const long long score = std::llround(episode_return);
  FillValues fill{{"score", std::to_string(score)}};
  if (game == "pong") {
    fill["to_win"] = counted_points(std::max(0LL, 21 - score));
  } else if (game == "breakout") {
    fill["to_win"] = counted_points(std::max(0LL, 350 - score));
  }
  return fill;
}

FeedbackRecord game_feedback(std::string_view game, double episode_return,
                             const StageTable& table) {
  return staged_feedback(episode_return, table,
                         game_fill(game, episode_return));
}

FeedbackRecord correctness_guide(std::string_view predicted,
                                 std::string_view gold) {
  if (answers_match(predicted, gold)) {
    return FeedbackRecord{1.0, "Correct. The answer matches the expected answer.",
                          Stage::correct, "correct"};
  }
  std::string got = predicted.empty() ? std::string("(empty)")
                                      : std::string(predicted);
  return FeedbackRecord{
      0.0,
      "Incorrect. The system answered " + got + " but the expected answer is " +
          std::string(gold) +
          ". Revise the system so that it produces the expected answer for "
          "questions like this one.",
      Stage::incorrect, "incorrect"};
}

bool answers_match(std::string_view answer, std::string_view gold) {
  const std::string_view g = trim(gold);
  const bool choice = g.size() == 3 && g[0] == '(' && g[2] == ')' &&
                      std::isalpha(static_cast<unsigned char>(g[1]));
  if (!choice) return trim(answer) == g;
  const std::string got = extract_choice(answer);
  return got.size() == 3 && got[0] == '(' &&
         std::toupper(static_cast<unsigned char>(got[1])) ==
             std::toupper(static_cast<unsigned char>(g[1]));
}

std::string extract_choice(std::string_view response) {
  static const std::regex token(R"(\([A-Za-z]\))");
  const std::string text(response);
  std::string last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), token);
       it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (!last.empty()) return last;
  return std::string(trim(response));
}

std::optional<double> MetricSet::get(std::string_view name) const {
  if (name == "accuracy") return accuracy;
  if (name == "f1") return f1;
  if (name == "precision") return precision;
  if (name == "recall") return recall;
  if (name == "rmse") return rmse;
  if (name == "mae") return mae;
  if (name == "r2") return r2;
  if (name == "episode_return") return episode_return;
  return std::nullopt;
}

MetricSet compute_metrics(std::span<const double> predictions,
                          std::span<const double> golds, TaskKind kind,
                          double positive_label) {
  if (predictions.size() != golds.size()) {
    throw MetricError("compute_metrics: " + std::to_string(predictions.size()) +
                      " predictions vs " + std::to_string(golds.size()) +
                      " golds");
  }
  if (predictions.empty()) throw MetricError("compute_metrics: empty input");
  const double n = static_cast<double>(predictions.size());
  MetricSet m;
  switch (kind) {
    case TaskKind::classification: {
      double tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] == positive_label;
        const bool g = golds[i] == positive_label;
        if (p && g) ++tp;
        else if (p) ++fp;
        else if (g) ++fn;
        else ++tn;
      }
      m.accuracy = (tp + tn) / n;
      m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double denom = *m.precision + *m.recall;
      m.f1 = denom > 0 ? 2.0 * *m.precision * *m.recall / denom : 0.0;
      break;
    }
    case TaskKind::regression: {
      double se = 0, ae = 0, gmean = 0;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = predictions[i] - golds[i];
        se += r * r;
        ae += std::abs(r);
        gmean += golds[i];
      }
      gmean /= n;
      double ss_tot = 0;
      for (double g : golds) ss_tot += (g - gmean) * (g - gmean);
      m.rmse = std::sqrt(se / n);
      m.mae = ae / n;
      if (ss_tot == 0.0) {
        m.r2_undefined = true;
      } else {
        m.r2 = 1.0 - se / ss_tot;
      }
      break;
    }
    case TaskKind::episodes: {
      double total = 0;
      for (double r : predictions) total += r;
      m.episode_return = total;
      break;
    }
  }
  return m;
}

FeedbackRecord ml_feedback(const MetricSet& metrics, TaskKind kind,
                           const StageTable& table, int epoch,
                           int total_epochs) {
  auto metric = [&](const char* name) -> double {
    auto v = metrics.get(name);
    if (!v) throw MetricError(std::string("ml_feedback: missing metric ") + name);
    return *v;
  };
  std::string text = "Epoch " + std::to_string(epoch) + "/" +
                     std::to_string(total_epochs) + "\n\n";
  double staged_on = 0;
  bool fallback = false;
  if (kind == TaskKind::classification) {
    text += "Accuracy: " + format_fixed(metric("accuracy"), 3) + "\n";
    text += "F1: " + format_fixed(metric("f1"), 3) + "\n";
    text += "Precision: " + format_fixed(metric("precision"), 3) + "\n";
    text += "Recall: " + format_fixed(metric("recall"), 3) + "\n";
    staged_on = metric("f1");
  } else if (kind == TaskKind::regression) {
    text += "RMSE: " + format_fixed(metric("rmse"), 3) + "\n";
    text += "MAE: " + format_fixed(metric("mae"), 3) + "\n";
    if (metrics.r2) {
      text += "r2: " + format_fixed(*metrics.r2, 3) + "\n";
      staged_on = *metrics.r2;
    } else {
      text += "r2: undefined\n";
      fallback = true;
    }
  } else {
    throw MetricError("ml_feedback: episodes have no validation report");
  }
  const StageRow& r = fallback ? table.rows().front() : table.select(staged_on);
  text += "\n";
  if (fallback) {
    text += "Note: r2 is undefined because the validation targets are "
            "constant.\n";
  }
  text += render_template(r.message_template, {});
  return FeedbackRecord{fallback ? 0.0 : staged_on, std::move(text), r.stage,
                        r.name};
}

}  // namespace looplab
