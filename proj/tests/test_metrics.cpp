#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "schemacoder/metrics.hpp"
#include "schemacoder/util.hpp"

#include "metric_oracle.hpp"

#include <cmath>

using namespace schemacoder;

namespace {

struct Fixture {
    LogFile log;
    ParseResult pred;
    GroundTruth truth;
};

// Builds a corpus from per-line labels; an empty pred label = unmatched.
Fixture from_labels(const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
    REQUIRE(pred.size() == truth.size());
    Fixture f;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        LineId id = static_cast<LineId>(i + 1);
        f.log.lines.push_back(LogLine{id, "content " + std::to_string(id)});
        f.truth.templates[id] = truth[i];
        if (pred[i].empty()) {
            f.pred.unmatched.insert(id);
        } else {
            LineAssignment assignment;
            assignment.template_text = pred[i];
            f.pred.assignments.emplace(id, std::move(assignment));
        }
    }
    return f;
}

EvalReport eval_labels(const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
    Fixture f = from_labels(pred, truth);
    return evaluate(f.pred, f.truth, f.log);
}

}  // namespace

TEST_CASE("to_grouping: [A,A,B,B] gives two groups") {
    Fixture f = from_labels({"A", "A", "B", "B"}, {"A", "A", "B", "B"});
    Grouping g = to_grouping(f.pred, f.log);
    CHECK(g.groups.size() == 2);
    CHECK(g.groups.at("A") == std::set<LineId>{1, 2});
    CHECK(g.groups.at("B") == std::set<LineId>{3, 4});
}

TEST_CASE("to_grouping: all-unmatched gives n singleton groups") {
    Fixture f = from_labels({"", "", ""}, {"t", "t", "t"});
    Grouping g = to_grouping(f.pred, f.log);
    CHECK(g.groups.size() == 3);
    for (const auto& [key, members] : g.groups) {
        (void)key;
        CHECK(members.size() == 1);
    }
}

TEST_CASE("to_grouping: matched pair plus unmatched singleton") {
    Fixture f = from_labels({"A", "A", ""}, {"A", "A", "B"});
    Grouping g = to_grouping(f.pred, f.log);
    CHECK(g.groups.size() == 2);
    CHECK(g.groups.at("A") == std::set<LineId>{1, 2});
}

TEST_CASE("GA: identity is 1.0") {
    EvalReport r = eval_labels({"A", "A", "B", "B"}, {"A", "A", "B", "B"});
    CHECK(r.ga == doctest::Approx(1.0));
}

TEST_CASE("GA: truth {1,2},{3,4} vs pred {1,2,3},{4} is 0.0") {
    // No line's predicted member-set equals its truth member-set:
    //   lines 1,2: {1,2,3} != {1,2}; line 3: {1,2,3} != {3,4}; line 4: {4} != {3,4}.
    EvalReport r = eval_labels({"X", "X", "X", "Y"}, {"A", "A", "B", "B"});
    CHECK(r.ga == doctest::Approx(0.0));
    CHECK(r.misgrouped_lines == std::set<LineId>{1, 2, 3, 4});
}

TEST_CASE("GA: truth {1,2},{3,4} vs pred {1,2},{3},{4} is 0.5") {
    EvalReport r = eval_labels({"A", "A", "P", "Q"}, {"A", "A", "B", "B"});
    CHECK(r.ga == doctest::Approx(0.5));
    CHECK(r.misgrouped_lines == std::set<LineId>{3, 4});
}

TEST_CASE("PA: exact equality after whitespace normalization") {
    EvalReport r = eval_labels({"a  <*>", "b <*> "}, {"a <*>", "b <*>"});
    CHECK(r.pa == doctest::Approx(1.0));
}

TEST_CASE("PA: three of four exact is 0.75") {
    EvalReport r = eval_labels({"A", "A", "A", "wrong"}, {"A", "A", "A", "B"});
    CHECK(r.pa == doctest::Approx(0.75));
}

TEST_CASE("PA: perfect grouping with every string different is 0.0") {
    EvalReport r = eval_labels({"X", "X", "Y", "Y"}, {"A", "A", "B", "B"});
    CHECK(r.ga == doctest::Approx(1.0));
    CHECK(r.pa == doctest::Approx(0.0));
}

TEST_CASE("PA: unmatched lines count as wrong") {
    EvalReport r = eval_labels({"A", ""}, {"A", "A"});
    CHECK(r.pa == doctest::Approx(0.5));
    CHECK(r.unmatched_lines == std::set<LineId>{2});
}

TEST_CASE("FGA/FTA: identical groupings and strings are both 1.0") {
    EvalReport r = eval_labels({"A", "A", "B"}, {"A", "A", "B"});
    CHECK(r.fga == doctest::Approx(1.0));
    CHECK(r.fta == doctest::Approx(1.0));
}

TEST_CASE("FGA/FTA: same groups, one of two template strings wrong") {
    EvalReport r = eval_labels({"A", "A", "wrong", "wrong"}, {"A", "A", "B", "B"});
    CHECK(r.fga == doctest::Approx(1.0));
    CHECK(r.fta == doctest::Approx(0.5));  // P = R = 1/2
}

TEST_CASE("FGA: pred 3 groups, truth 2, one member-set match is 0.4") {
    // pred {1,2} matches truth {1,2}; pred {3},{4} match nothing.
    // P = 1/3, R = 1/2, F1 = 2*(1/3)*(1/2)/((1/3)+(1/2)) = 0.4.
    EvalReport r = eval_labels({"A", "A", "P", "Q"}, {"A", "A", "B", "B"});
    CHECK(r.fga == doctest::Approx(0.4));
}

TEST_CASE("evaluate: Eq-style loss arithmetic 0.1875") {
    // ga=1, pa=0.75, fga=1, fta=0.5 -> loss = 1 - 3.25/4 = 0.1875.
    EvalReport r = eval_labels({"A", "A", "A", "nope"}, {"A", "A", "A", "B"});
    CHECK(r.ga == doctest::Approx(1.0));
    CHECK(r.pa == doctest::Approx(0.75));
    CHECK(r.fga == doctest::Approx(1.0));
    CHECK(r.fta == doctest::Approx(0.5));
    CHECK(r.loss == doctest::Approx(0.1875));
}

TEST_CASE("evaluate: perfect parse has zero loss and empty diagnostics") {
    EvalReport r = eval_labels({"A", "B", "A"}, {"A", "B", "A"});
    CHECK(r.loss == 0.0);
    CHECK(r.misgrouped_lines.empty());
    CHECK(r.template_mismatch_lines.empty());
    CHECK(r.unmatched_lines.empty());
}

TEST_CASE("evaluate: universe mismatch throws") {
    Fixture f = from_labels({"A", "A"}, {"A", "A"});
    f.truth.templates[3] = "B";  // extra truth line
    CHECK_THROWS_AS(evaluate(f.pred, f.truth, f.log), UniverseMismatch);
}

TEST_CASE("symmetric perfection: x as both pred and truth is always perfect") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + rng.next_below(12);
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back("T" + std::to_string(rng.next_below(4)));
        }
        EvalReport r = eval_labels(labels, labels);
        CHECK(r.ga == 1.0);
        CHECK(r.pa == 1.0);
        CHECK(r.fga == 1.0);
        CHECK(r.fta == 1.0);
        CHECK(r.loss == 0.0);
    }
}

TEST_CASE("bounds: every metric and the loss stay in [0,1]") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng.next_below(10);
        std::vector<std::string> pred, truth;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back("T" + std::to_string(rng.next_below(3)));
            pred.push_back(rng.next_below(5) == 0 ? "" : "T" + std::to_string(rng.next_below(4)));
        }
        EvalReport r = eval_labels(pred, truth);
        for (double v : {r.ga, r.pa, r.fga, r.fta, r.loss}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("permutation invariance: bijective renaming keeps GA and FGA") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng.next_below(10);
        std::vector<std::string> pred, truth;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back("T" + std::to_string(rng.next_below(3)));
            pred.push_back(rng.next_below(6) == 0 ? "" : "T" + std::to_string(rng.next_below(3)));
        }
        EvalReport base = eval_labels(pred, truth);
        std::vector<std::string> renamed = pred;
        for (auto& label : renamed) {
            if (!label.empty()) label = "renamed-" + label;
        }
        EvalReport after = eval_labels(renamed, truth);
        CHECK(after.ga == doctest::Approx(base.ga));
        CHECK(after.fga == doctest::Approx(base.fga));
    }
}

TEST_CASE("oracle equivalence on random small corpora") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t n = 1 + rng.next_below(12);
        oracle::Labels labels;
        for (std::size_t i = 0; i < n; ++i) {
            labels.truth.push_back("tmpl " + std::to_string(rng.next_below(4)) + " <*>");
            if (rng.next_below(5) == 0) {
                labels.pred.push_back("");
            } else {
                labels.pred.push_back("tmpl " + std::to_string(rng.next_below(5)) + " <*>");
            }
        }
        EvalReport r = eval_labels(labels.pred, labels.truth);
        CHECK(r.ga == doctest::Approx(oracle::ga(labels)).epsilon(1e-12));
        CHECK(r.pa == doctest::Approx(oracle::pa(labels)).epsilon(1e-12));
        CHECK(r.fga == doctest::Approx(oracle::fga(labels)).epsilon(1e-12));
        CHECK(r.fta == doctest::Approx(oracle::fta(labels)).epsilon(1e-12));
    }
}

TEST_CASE("loss identity holds exactly") {
    SplitMix64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 1 + rng.next_below(12);
        std::vector<std::string> pred, truth;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back("T" + std::to_string(rng.next_below(3)));
            pred.push_back(rng.next_below(4) == 0 ? "" : "T" + std::to_string(rng.next_below(4)));
        }
        EvalReport r = eval_labels(pred, truth);
        CHECK(std::abs(r.loss - (1.0 - (r.ga + r.pa + r.fga + r.fta) / 4.0)) <= 1e-12);
    }
}

TEST_CASE("eval_summary_line formatting") {
    EvalReport r = eval_labels({"A", "A"}, {"A", "A"});
    CHECK(eval_summary_line(r) == "1.0000 1.0000 1.0000 1.0000 0.0000");
}
