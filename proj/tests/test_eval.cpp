#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "medtag/eval.hpp"
#include "medtag/rng.hpp"

using namespace medtag;

namespace {

std::vector<std::string> tags(const std::string& spaced) {
  std::vector<std::string> out;
  std::istringstream in(spaced);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::vector<std::string> random_tags(Rng& rng, int n) {
  static const std::vector<std::string> pool = {"O", "B-A", "I-A", "B-B", "I-B"};
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(pool[rng.below(pool.size())]);
  return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("entity decoding reads maximal runs") {
  auto e = decode_entities(tags("O B-A I-A I-A O B-B"));
  REQUIRE(e.size() == 2);
  CHECK(e[0] == EntitySpan{1, 4, "A"});
  CHECK(e[1] == EntitySpan{5, 6, "B"});
  CHECK(decode_entities({}).empty());
  CHECK(decode_entities(tags("O O O")).empty());
}

TEST_CASE("entity decoding repairs dangling continuations") {
  // I- with no open entity of that type starts one.
  auto e = decode_entities(tags("I-A I-A O I-B"));
  REQUIRE(e.size() == 2);
  CHECK(e[0] == EntitySpan{0, 2, "A"});
  CHECK(e[1] == EntitySpan{3, 4, "B"});

  // Type switch inside a run splits it.
  auto f = decode_entities(tags("B-A I-B"));
  REQUIRE(f.size() == 2);
  CHECK(f[0] == EntitySpan{0, 1, "A"});
  CHECK(f[1] == EntitySpan{1, 2, "B"});

  // B- always opens fresh, even after the same type.
  auto g = decode_entities(tags("B-A B-A"));
  REQUIRE(g.size() == 2);
}

TEST_CASE("padding tags decode as outside") {
  auto e = decode_entities(tags("B-A X I-A"));
  REQUIRE(e.size() == 2);
  CHECK(e[0] == EntitySpan{0, 1, "A"});
  CHECK(e[1] == EntitySpan{2, 3, "A"});
}

TEST_CASE("unknown tags are rejected with their position") {
  CHECK_THROWS_WITH_AS(decode_entities(tags("O B-A Q")), doctest::Contains("position 2"),
                       std::invalid_argument);
}

TEST_CASE("strict scoring gives no credit for a clipped entity") {
  auto gold = tags("O O B-problem I-problem I-problem");
  auto pred = tags("O O B-problem I-problem O");
  auto s = strict_score({gold}, {pred});
  CHECK(s.overall.tp == 0);
  CHECK(s.overall.fp == 1);
  CHECK(s.overall.fn == 1);
  CHECK(s.overall.precision() == 0.0);
  CHECK(s.overall.recall() == 0.0);
  CHECK(s.overall.f1() == 0.0);
}

TEST_CASE("strict scoring on exact agreement") {
  auto g = tags("B-A I-A O B-B O");
  auto s = strict_score({g, g}, {g, g});
  CHECK(s.overall.tp == 4);
  CHECK(s.overall.fp == 0);
  CHECK(s.overall.fn == 0);
  CHECK(s.overall.f1() == 1.0);
  CHECK(s.per_type.at("A").tp == 2);
  CHECK(s.per_type.at("B").tp == 2);
}

TEST_CASE("per-type counts split by the side that claims the type") {
  auto gold = tags("B-A O O");
  auto pred = tags("B-B O O");
  auto s = strict_score({gold}, {pred});
  CHECK(s.per_type.at("A").fn == 1);
  CHECK(s.per_type.at("B").fp == 1);
  CHECK(s.per_type.at("A").fp == 0);
  CHECK(s.overall.tp == 0);
}

TEST_CASE("empty corpora score zero under the zero-denominator convention") {
  auto s = strict_score({}, {});
  CHECK(s.overall.precision() == 0.0);
  CHECK(s.overall.recall() == 0.0);
  CHECK(s.overall.f1() == 0.0);
}

TEST_CASE("scoring rejects misaligned inputs") {
  CHECK_THROWS_WITH_AS(strict_score({tags("O O")}, {}), doctest::Contains("1 gold sequences"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(strict_score({tags("O O")}, {tags("O")}), doctest::Contains("sequence 0"),
                       std::invalid_argument);
  CHECK_THROWS_AS(classify_errors({tags("O O")}, {tags("O")}), std::invalid_argument);
}

TEST_CASE("error taxonomy fixture hits every bucket exactly once") {
  //            0    1    2    3   4    5    6    7   8   9    10   11   12  13  14   15  16  17   18  19
  auto gold = tags("B-A  I-A  O    O   B-A  I-A  O    O   O   B-A  I-A  O    O   O   O    O   O   B-B  O   O");
  auto pred = tags("B-B  I-B  O    O   B-A  I-A  I-A  O   O   O    B-B  I-B  O   O   B-A  O   O   O    O   O");
  auto e = classify_errors({gold}, {pred});
  CHECK(e.right_span_wrong_label == 1);        // [0,2) gold A vs pred B
  CHECK(e.right_label_overlapping_span == 1);  // [4,6) A vs [4,7) A
  CHECK(e.wrong_label_overlapping_span == 1);  // [9,11) A vs [10,12) B
  CHECK(e.complete_false_positive == 1);       // pred [14,15) A
  CHECK(e.complete_false_negative == 1);       // gold [17,18) B
  CHECK(e.total() == 5);

  auto s = strict_score({gold}, {pred});
  CHECK(s.overall.tp == 0);
  CHECK(s.overall.fp == 4);
  CHECK(s.overall.fn == 4);
}

TEST_CASE("exact matches never land in an error bucket") {
  auto g = tags("B-A I-A O B-B");
  auto e = classify_errors({g}, {g});
  CHECK(e.total() == 0);
}

TEST_CASE("error accounting adds up against strict counts") {
  Rng rng(5150);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng.below(20));
    auto gold = random_tags(rng, n);
    auto pred = random_tags(rng, n);
    auto s = strict_score({gold}, {pred});
    auto e = classify_errors({gold}, {pred});
    long long gold_n = static_cast<long long>(decode_entities(gold).size());
    long long pred_n = static_cast<long long>(decode_entities(pred).size());
    long long paired = e.right_span_wrong_label + e.right_label_overlapping_span +
                       e.wrong_label_overlapping_span;
    CHECK(s.overall.tp + s.overall.fn == gold_n);
    CHECK(s.overall.tp + s.overall.fp == pred_n);
    CHECK(s.overall.tp + paired + e.complete_false_negative == gold_n);
    CHECK(s.overall.tp + paired + e.complete_false_positive == pred_n);
  }
}

TEST_CASE("scores and error buckets ignore sequence order") {
  Rng rng(77);
  std::vector<std::vector<std::string>> gold, pred;
  for (int i = 0; i < 25; ++i) {
    int n = 1 + static_cast<int>(rng.below(15));
    gold.push_back(random_tags(rng, n));
    pred.push_back(random_tags(rng, n));
  }
  auto s1 = strict_score(gold, pred);
  auto e1 = classify_errors(gold, pred);

  std::vector<int> order(gold.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  std::vector<std::vector<std::string>> gold2, pred2;
  for (int i : order) {
    gold2.push_back(gold[i]);
    pred2.push_back(pred[i]);
  }
  auto s2 = strict_score(gold2, pred2);
  auto e2 = classify_errors(gold2, pred2);
  CHECK(s1.overall.tp == s2.overall.tp);
  CHECK(s1.overall.fp == s2.overall.fp);
  CHECK(s1.overall.fn == s2.overall.fn);
  CHECK(e1.right_span_wrong_label == e2.right_span_wrong_label);
  CHECK(e1.right_label_overlapping_span == e2.right_label_overlapping_span);
  CHECK(e1.wrong_label_overlapping_span == e2.wrong_label_overlapping_span);
  CHECK(e1.complete_false_positive == e2.complete_false_positive);
  CHECK(e1.complete_false_negative == e2.complete_false_negative);
}

TEST_CASE("model comparison reports per-type f1 movement") {
  auto gold = tags("B-A O B-B O");
  auto worse = tags("O O B-B O");
  auto better = tags("B-A O B-B O");
  auto c = compare_models({gold}, {worse}, {better});
  CHECK(c.first.overall.tp == 1);
  CHECK(c.second.overall.tp == 2);
  CHECK(c.f1_delta.at("A") == 1.0);
  CHECK(c.f1_delta.at("B") == 0.0);
  auto j = to_json(c);
  CHECK(j["second"]["f1"] == 1.0);
  CHECK(j["first_errors"]["complete_false_negative"] == 1);
}

TEST_CASE("report rendering mentions every type and bucket") {
  auto gold = tags("B-A O B-LongTypeName O");
  auto s = strict_score({gold}, {gold});
  auto text = render_scores(s);
  CHECK(text.find("ALL") != std::string::npos);
  CHECK(text.find("LongTypeName") != std::string::npos);
  auto j = to_json(s);
  CHECK(j["tp"] == 2);
  CHECK(j["per_type"]["A"]["f1"] == 1.0);

  ErrorBreakdown e;
  e.complete_false_negative = 3;
  CHECK(render_errors(e).find("complete false negative") != std::string::npos);
  CHECK(to_json(e)["total"] == 3);
}

TEST_CASE("conll round trip preserves sequences") {
  std::vector<ConllSequence> seqs = {{{"The", "patient"}, {"O", "O"}},
                                     {{"aspirin"}, {"B-drug"}}};
  std::ostringstream out;
  write_conll(out, seqs);
  std::istringstream in(out.str());
  std::vector<int> starts;
  auto back = read_conll(in, &starts);
  REQUIRE(back.size() == 2);
  CHECK(back[0].tokens == seqs[0].tokens);
  CHECK(back[0].tags == seqs[0].tags);
  CHECK(back[1].tokens == seqs[1].tokens);
  CHECK(starts == std::vector<int>{1, 4});
}

TEST_CASE("conll reader flags malformed lines") {
  std::istringstream no_tab("token\n");
  CHECK_THROWS_WITH_AS(read_conll(no_tab), doctest::Contains("line 1"), std::runtime_error);
  std::istringstream extra("a\tb\tc\n");
  CHECK_THROWS_AS(read_conll(extra), std::runtime_error);
  std::istringstream empty_tag("a\t\n");
  CHECK_THROWS_WITH_AS(read_conll(empty_tag), doctest::Contains("empty token or tag"),
                       std::runtime_error);
  std::istringstream blanks("\n\na\tO\n\n\n");
  CHECK(read_conll(blanks).size() == 1);
}

TEST_CASE("conll writer rejects ragged sequences") {
  ConllSequence bad{{"a", "b"}, {"O"}};
  std::ostringstream out;
  CHECK_THROWS_AS(write_conll(out, {bad}), std::invalid_argument);
}

}  // TEST_SUITE
