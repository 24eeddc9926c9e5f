#include <algorithm>
#include <numeric>

#include "doctest.h"

#include "cdstack/errors.hpp"
#include "cdstack/rng.hpp"
#include "cdstack/stacker.hpp"

using namespace cdstack;

namespace {

LearnerOutput make_output(const std::string& ds, const std::string& learner, std::size_t V,
                          std::uint64_t seed, bool reversed_names = false) {
    LearnerOutput out;
    out.dataset_id = ds;
    out.learner_id = learner;
    Rng rng(seed);
    for (std::size_t v = 0; v < V; ++v) {
        out.variable_names.push_back("g" + std::to_string(reversed_names ? V - 1 - v : v));
        out.phi.push_back(rng.normal());
        out.causal_call.push_back(rng.bernoulli(0.3) ? 1 : 0);
    }
    return out;
}

KnownCauseLabels make_labels(std::size_t V, std::size_t positives, std::uint64_t seed) {
    KnownCauseLabels labels;
    labels.labels.assign(V, 0);
    Rng rng(seed);
    auto idx = rng.sample_without_replacement(V, positives);
    for (std::size_t i : idx) labels.labels[i] = 1;
    return labels;
}

}  // namespace

TEST_SUITE("stacker") {

TEST_CASE("assemble shapes V x L with deterministic column order") {
    const std::size_t V = 100;
    std::vector<LearnerOutput> outputs{make_output("d0", "da", V, 1),
                                       make_output("d0", "marginal", V, 2),
                                       make_output("d0", "cate", V, 3)};
    const KnownCauseLabels labels = make_labels(V, 10, 4);
    const Level1Dataset l1 = assemble(outputs, labels);
    CHECK(l1.D1.rows() == V);
    CHECK(l1.D1.cols() == 3);
    CHECK(l1.feature_names ==
          std::vector<std::string>{"d0/cate", "d0/da", "d0/marginal"});
}

TEST_CASE("assemble is invariant to the order outputs are supplied in") {
    const std::size_t V = 40;
    std::vector<LearnerOutput> a{make_output("d0", "da", V, 1), make_output("d0", "cate", V, 2),
                                 make_output("d1", "da", V, 3)};
    std::vector<LearnerOutput> b{a[2], a[0], a[1]};
    const KnownCauseLabels labels = make_labels(V, 5, 9);
    const Level1Dataset l1a = assemble(a, labels);
    const Level1Dataset l1b = assemble(b, labels);
    CHECK(l1a.feature_names == l1b.feature_names);
    CHECK(l1a.variable_names == l1b.variable_names);
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t j = 0; j < 3; ++j) CHECK(l1a.D1.at(v, j) == l1b.D1.at(v, j));
}

TEST_CASE("assemble aligns rows by variable name across outputs") {
    const std::size_t V = 12;
    LearnerOutput fwd = make_output("d0", "da", V, 5);
    LearnerOutput rev = make_output("d0", "marginal", V, 5, true);  // same names, reversed rows
    const KnownCauseLabels labels = make_labels(V, 3, 6);
    const Level1Dataset l1 = assemble({fwd, rev}, labels);
    // row for variable "g0": column d0/marginal must carry rev's value for g0
    const auto it = std::find(l1.variable_names.begin(), l1.variable_names.end(), "g0");
    const std::size_t row = static_cast<std::size_t>(it - l1.variable_names.begin());
    const auto rit = std::find(rev.variable_names.begin(), rev.variable_names.end(), "g0");
    const std::size_t rsrc = static_cast<std::size_t>(rit - rev.variable_names.begin());
    CHECK(l1.D1.at(row, 1) == rev.phi[rsrc]);
}

TEST_CASE("zero_noncausal blanks entries the learner did not call") {
    const std::size_t V = 30;
    LearnerOutput a = make_output("d0", "da", V, 7);
    LearnerOutput b = make_output("d0", "cate", V, 8);
    std::fill(b.causal_call.begin(), b.causal_call.end(), 0);
    const KnownCauseLabels labels = make_labels(V, 4, 9);
    const Level1Dataset l1 = assemble({a, b}, labels, /*zero_noncausal=*/true);
    for (std::size_t v = 0; v < V; ++v) CHECK(l1.D1.at(v, 0) == 0.0);  // d0/cate all zeroed
    bool any_nonzero = false;
    for (std::size_t v = 0; v < V; ++v)
        if (l1.D1.at(v, 1) != 0.0) any_nonzero = true;
    CHECK(any_nonzero);
}

TEST_CASE("assemble rejects mismatched variable sets naming the difference") {
    LearnerOutput a = make_output("d0", "da", 10, 1);
    LearnerOutput b = make_output("d0", "cate", 10, 2);
    b.variable_names[3] = "weird_gene";
    const KnownCauseLabels labels = make_labels(10, 2, 3);
    try {
        assemble({a, b}, labels);
        CHECK(false);
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("weird_gene") != std::string::npos);
        CHECK(msg.find("g3") != std::string::npos);
    }
}

TEST_CASE("assemble rejects duplicates and too-few outputs") {
    LearnerOutput a = make_output("d0", "da", 10, 1);
    const KnownCauseLabels labels = make_labels(10, 2, 3);
    CHECK_THROWS_AS(assemble({a, a}, labels), DataError);
    CHECK_THROWS_AS(assemble({a}, labels), DataError);
}

TEST_CASE("multi-dataset stacking yields L*d aligned columns") {
    const std::size_t V = 25;
    std::vector<LearnerOutput> outputs;
    for (const std::string ds : {"d0", "d1", "d2"})
        for (const std::string l : {"da", "marginal"})
            outputs.push_back(make_output(ds, l, V, fnv1a64(ds + l)));
    const Level1Dataset l1 = assemble(outputs, make_labels(V, 5, 1));
    CHECK(l1.D1.cols() == 6);
    CHECK(l1.feature_names.front() == "d0/da");
    CHECK(l1.feature_names.back() == "d2/marginal");
}

TEST_CASE("split_variables stratifies the positives and is deterministic") {
    const std::size_t V = 1000;
    std::vector<LearnerOutput> outputs{make_output("d0", "da", V, 1),
                                       make_output("d0", "cate", V, 2)};
    const KnownCauseLabels labels = make_labels(V, 100, 5);
    Level1Dataset l1 = assemble(outputs, labels);
    l1 = split_variables(std::move(l1), 0.67, 11);
    REQUIRE(l1.has_split);
    CHECK(l1.train_rows.size() + l1.test_rows.size() == V);

    std::size_t pos_train = 0;
    for (std::size_t r : l1.train_rows) pos_train += l1.labels.labels[r];
    CHECK(pos_train >= 66);
    CHECK(pos_train <= 68);

    const Level1Dataset l2 = split_variables(assemble(outputs, labels), 0.67, 11);
    CHECK(l1.train_rows == l2.train_rows);
}

TEST_CASE("split_variables needs at least two positives") {
    const std::size_t V = 50;
    std::vector<LearnerOutput> outputs{make_output("d0", "da", V, 1),
                                       make_output("d0", "cate", V, 2)};
    KnownCauseLabels labels;
    labels.labels.assign(V, 0);
    labels.labels[3] = 1;
    const Level1Dataset l1 = assemble(outputs, labels);
    CHECK_THROWS_AS(split_variables(l1, 0.67, 1), DataError);
}

}  // TEST_SUITE
