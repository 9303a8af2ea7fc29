#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/feedback.hpp"
#include "looplab/text_tasks.hpp"

using namespace looplab;

TEST_CASE("generated golds agree with the text solver") {
  for (auto kind : {TextTaskKind::bracket_completion, TextTaskKind::boolean_eval,
                    TextTaskKind::multiple_choice}) {
    const auto suite = generate_text_suite(kind, 300, 5);
    for (const TextTask& t : suite) {
      CHECK(t.kind == kind);
      const auto solved = solve_text_question(t.question);
      REQUIRE(solved.has_value());
      CHECK(*solved == t.gold);
    }
    CHECK(generate_text_suite(kind, 300, 5) == suite);
  }
}

TEST_CASE("solver examples") {
  CHECK(solve_text_question("Close every open bracket in this sequence: ([{") == "}])");
  CHECK(solve_text_question("Close every open bracket in this sequence: (<>[") == "])");
  CHECK(solve_text_question("Close every open bracket in this sequence: (]") == std::nullopt);
  CHECK(solve_text_question("Evaluate the boolean expression: not ( True and False )") ==
        "True");
  CHECK(solve_text_question("Evaluate the boolean expression: True or") == std::nullopt);
  CHECK(solve_text_question("unrelated") == std::nullopt);
}

TEST_CASE("bracket golds close the prefix under a brute-force balance check") {
  for (const TextTask& t : generate_text_suite(TextTaskKind::bracket_completion, 200, 8)) {
    const std::string full = t.question.substr(t.question.find(": ") + 2) + t.gold;
    // Repeatedly delete adjacent matched pairs; a balanced string vanishes.
    std::string s = full;
    bool changed = true;
    while (changed) {
      changed = false;
      for (const char* pair : {"()", "[]", "{}", "<>"}) {
        const auto at = s.find(pair);
        if (at != std::string::npos) {
          s.erase(at, 2);
          changed = true;
        }
      }
    }
    CHECK(s.empty());
  }
}

TEST_CASE("multiple-choice golds are self-consistent") {
  for (const TextTask& t : generate_text_suite(TextTaskKind::multiple_choice, 100, 2)) {
    CHECK(extract_choice(t.gold) == t.gold);
    CHECK(t.question.find("\n" + t.gold + " ") != std::string::npos);
  }
}

TEST_CASE("bbeh split is 15, 10 and the rest in dataset order") {
  std::vector<int> items(200);
  for (int i = 0; i < 200; ++i) items[static_cast<std::size_t>(i)] = i;
  const auto s = split_dataset(items, SplitProtocol::bbeh);
  CHECK(s.train.size() == 15);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 175);
  CHECK(s.train.front() == 0);
  CHECK(s.validation.front() == 15);
  CHECK(s.test.front() == 25);
  CHECK_THROWS_AS(split_dataset(std::vector<int>(24), SplitProtocol::bbeh), SplitError);
  CHECK_THROWS_AS(split_dataset(std::vector<int>(25), SplitProtocol::bbeh), SplitError);
  CHECK(split_dataset(std::vector<int>(26), SplitProtocol::bbeh).test.size() == 1);
}

TEST_CASE("pipeline split is a seeded 80/20 partition") {
  std::vector<int> items(100);
  for (int i = 0; i < 100; ++i) items[static_cast<std::size_t>(i)] = i;
  const auto a = split_dataset(items, SplitProtocol::pipeline, 3);
  CHECK(a.train.size() == 80);
  CHECK(a.validation.size() == 20);
  CHECK(a.test.empty());
  std::set<int> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  CHECK(all.size() == 100);
  const auto b = split_dataset(items, SplitProtocol::pipeline, 3);
  CHECK(a.train == b.train);
  const auto c = split_dataset(items, SplitProtocol::pipeline, 4);
  CHECK(a.train != c.train);
  CHECK_THROWS_AS(split_dataset(std::vector<int>(1), SplitProtocol::pipeline), SplitError);
}

TEST_CASE("simulated base model rewards better instructions") {
  const auto suite = generate_text_suite(TextTaskKind::boolean_eval, 300, 1);
  auto accuracy = [&](const std::string& preamble) {
    int right = 0;
    for (const TextTask& t : suite) {
      const std::string reply = simulated_base_model(preamble + "\nQuestion: " + t.question);
      const auto at = reply.rfind("Answer:");
      if (at != std::string::npos && answers_match(reply.substr(at + 7), t.gold)) ++right;
    }
    return right / 300.0;
  };
  const double plain = accuracy("Reply with a final line 'Answer: <answer>'.");
  const double careful =
      accuracy("Think step by step and verify. Reply with a final line 'Answer: <answer>'.");
  CHECK(plain > 0.2);
  CHECK(careful > plain + 0.2);
  CHECK(accuracy("Just answer.") == 0.0);
  CHECK(simulated_base_model("Question: " + suite[0].question) ==
        simulated_base_model("Question: " + suite[0].question));
}
