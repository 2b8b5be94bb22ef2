#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "vocadapt/analysis.hpp"
#include "vocadapt/errors.hpp"
#include "vocadapt/projection.hpp"

using namespace vocadapt;

namespace {

// Four unit-length rows with hand-computable cosines to "a":
//   b = 1/sqrt(2) (.707...), c = 0, d = -1.
EmbeddingMatrix fan_embedding() {
    Vocabulary vocab({"a", "b", "c", "d"});
    Mat rows(4, 2);
    rows << 1.0, 0.0,                       // a
        1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0),  // b
        0.0, 1.0,                           // c
        -1.0, 0.0;                          // d
    return EmbeddingMatrix(vocab, rows);
}

}  // namespace

TEST_CASE("nearest neighbors rank by cosine and never include the query") {
    EmbeddingMatrix emb = fan_embedding();
    NeighborReport r = nearest_neighbors_report("a", emb, nullptr, 3);
    CHECK(r.query == "a");
    CHECK_FALSE(r.restricted);
    REQUIRE(r.neighbors.size() == 3);
    CHECK(r.neighbors[0].first == "b");
    CHECK(r.neighbors[0].second == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.neighbors[1].first == "c");
    CHECK(r.neighbors[1].second == doctest::Approx(0.0));
    CHECK(r.neighbors[2].first == "d");
    CHECK(r.neighbors[2].second == doctest::Approx(-1.0));
}

TEST_CASE("neighbor count clamps to the candidate pool") {
    EmbeddingMatrix emb = fan_embedding();
    NeighborReport r = nearest_neighbors_report("a", emb, nullptr, 50);
    CHECK(r.neighbors.size() == 3);
}

TEST_CASE("restriction to an anchor set narrows the candidates") {
    EmbeddingMatrix emb = fan_embedding();
    SharedAnchorSet anchors = anchors_from_tokens({"d"}, emb.vocab(), emb.vocab());
    NeighborReport r = nearest_neighbors_report("a", emb, &anchors, 5);
    CHECK(r.restricted);
    REQUIRE(r.neighbors.size() == 1);
    CHECK(r.neighbors[0].first == "d");

    SUBCASE("restriction containing the query still excludes it") {
        SharedAnchorSet with_self = anchors_from_tokens({"a", "c"}, emb.vocab(), emb.vocab());
        NeighborReport rs = nearest_neighbors_report("a", emb, &with_self, 5);
        REQUIRE(rs.neighbors.size() == 1);
        CHECK(rs.neighbors[0].first == "c");
    }
}

TEST_CASE("neighbor queries fail loudly") {
    EmbeddingMatrix emb = fan_embedding();
    CHECK_THROWS_WITH_AS(nearest_neighbors_report("zz", emb, nullptr, 3),
                         doctest::Contains("zz"), DataError);

    Vocabulary vocab({"a", "z"});
    Mat rows(2, 2);
    rows << 1.0, 0.0, 0.0, 0.0;
    EmbeddingMatrix with_zero(vocab, rows);
    CHECK_THROWS_AS(nearest_neighbors_report("z", with_zero, nullptr, 1), DataError);
}

TEST_CASE("semantic shift is exactly zero when nothing moved") {
    EmbeddingMatrix emb = fan_embedding();
    SharedAnchorSet shared = compute_shared(emb.vocab(), emb.vocab());
    ShiftReport r = semantic_shift_report(shared, emb, emb);
    REQUIRE(r.ranked.size() == 4);
    for (const auto& e : r.ranked) CHECK(e.shift == 0.0);
    CHECK(r.zero_norm.empty());
}

TEST_CASE("a token moved toward a different sense ranks above stable tokens") {
    // Target space: "bank" sits with river terms. Source space: same geometry
    // except "bank" now sits with money terms.
    Vocabulary vocab({"bank", "river", "money"});
    Mat target(3, 2), source(3, 2);
    target << 1.0, 0.1,  // bank ~ river
        1.0, 0.0, 0.0, 1.0;
    source << 0.1, 1.0,  // bank ~ money
        1.0, 0.0, 0.0, 1.0;
    SharedAnchorSet shared = compute_shared(vocab, vocab);
    ShiftReport r = semantic_shift_report(shared, EmbeddingMatrix(vocab, source),
                                          EmbeddingMatrix(vocab, target));
    REQUIRE(r.ranked.size() == 3);
    CHECK(r.ranked[0].token == "bank");
    CHECK(r.ranked[0].shift > 0.5);
    CHECK(r.ranked[1].shift == 0.0);
    CHECK(r.ranked[2].shift == 0.0);
}

TEST_CASE("shift ties break on target index and zero-norm rows are side-listed") {
    Vocabulary vocab({"p", "q", "z"});
    Mat source(3, 2), target(3, 2);
    source << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;  // z has zero norm in the source
    target << 0.0, 1.0, 1.0, 0.0, 1.0, 1.0;  // p and q both rotate 90 degrees
    SharedAnchorSet shared = compute_shared(vocab, vocab);
    ShiftReport r = semantic_shift_report(shared, EmbeddingMatrix(vocab, source),
                                          EmbeddingMatrix(vocab, target));
    REQUIRE(r.ranked.size() == 2);
    CHECK(r.ranked[0].token == "p");
    CHECK(r.ranked[1].token == "q");
    CHECK(r.ranked[0].shift == doctest::Approx(r.ranked[1].shift));
    REQUIRE(r.zero_norm.size() == 1);
    CHECK(r.zero_norm[0] == "z");
}

TEST_CASE("single shared token yields a single entry") {
    Vocabulary a({"only", "left"});
    Vocabulary b({"right", "only"});
    Mat ra(2, 2), rb(2, 2);
    ra << 1.0, 0.0, 0.0, 1.0;
    rb << 0.0, 1.0, 1.0, 0.0;
    SharedAnchorSet shared = compute_shared(b, a);
    REQUIRE(shared.entries().size() == 1);
    ShiftReport r =
        semantic_shift_report(shared, EmbeddingMatrix(a, ra), EmbeddingMatrix(b, rb));
    REQUIRE(r.ranked.size() == 1);
    CHECK(r.ranked[0].token == "only");
}

TEST_CASE("overlap statistics match hand counts") {
    Vocabulary a({"a", "b", "c"});
    Vocabulary b({"b", "c", "d"});
    OverlapStats s = vocab_overlap_stats(a, b);
    CHECK(s.size_a == 3);
    CHECK(s.size_b == 3);
    CHECK(s.intersection == 2);
    CHECK(s.unique_a == 1);
    CHECK(s.unique_b == 1);
    CHECK(s.jaccard == doctest::Approx(0.5));
    CHECK_FALSE(s.coverage.has_value());
    // Inclusion-exclusion: |A| + |B| - |A∩B| = |A∪B|.
    CHECK(s.size_a + s.size_b - s.intersection == s.intersection + s.unique_a + s.unique_b);
}

TEST_CASE("identical vocabularies have jaccard one and no uniques") {
    Vocabulary a({"x", "y"});
    OverlapStats s = vocab_overlap_stats(a, a);
    CHECK(s.jaccard == doctest::Approx(1.0));
    CHECK(s.unique_a == 0);
    CHECK(s.unique_b == 0);
}

TEST_CASE("coverage counts distinct corpus types found in the other vocabulary") {
    Vocabulary a({"a", "b", "c"});
    Vocabulary b({"b", "d", "e"});
    std::istringstream corpus("b d d e\n");
    OverlapStats s = vocab_overlap_stats(a, b, &corpus);
    REQUIRE(s.coverage.has_value());
    // Distinct tokens {b, d, e}; only "b" appears in vocabulary a.
    CHECK(*s.coverage == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("shift ordering is invariant to uniform scaling") {
    // Axis-aligned rows so the scaled cosines stay exact.
    Vocabulary vocab({"u", "v", "w"});
    Mat source(3, 3), target(3, 3);
    source << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    target << 0, 1, 0, 0, 1, 0, 0, 0, 1;
    SharedAnchorSet shared = compute_shared(vocab, vocab);
    ShiftReport base = semantic_shift_report(shared, EmbeddingMatrix(vocab, source),
                                             EmbeddingMatrix(vocab, target));
    ShiftReport scaled = semantic_shift_report(shared, EmbeddingMatrix(vocab, Mat(source * 7.0)),
                                               EmbeddingMatrix(vocab, Mat(target * 0.25)));
    REQUIRE(base.ranked.size() == scaled.ranked.size());
    for (std::size_t i = 0; i < base.ranked.size(); ++i) {
        CHECK(base.ranked[i].token == scaled.ranked[i].token);
        CHECK(base.ranked[i].shift == doctest::Approx(scaled.ranked[i].shift).epsilon(1e-9));
    }
}

TEST_CASE("report writers emit parseable deterministic output") {
    EmbeddingMatrix emb = fan_embedding();
    SUBCASE("neighbor report") {
        NeighborReport r = nearest_neighbors_report("a", emb, nullptr, 2);
        std::ostringstream t1, j1, t2, j2;
        write_neighbor_report(r, t1, j1);
        write_neighbor_report(r, t2, j2);
        CHECK(t1.str() == t2.str());
        CHECK(j1.str() == j2.str());
        CHECK(t1.str().find("b") != std::string::npos);

        std::istringstream lines(j1.str());
        std::string line;
        std::size_t parsed = 0;
        while (std::getline(lines, line)) {
            auto j = nlohmann::json::parse(line);
            CHECK(j.at("query") == "a");
            CHECK(j.contains("token"));
            CHECK(j.contains("cosine"));
            ++parsed;
        }
        CHECK(parsed == 2);
    }
    SUBCASE("shift report") {
        SharedAnchorSet shared = compute_shared(emb.vocab(), emb.vocab());
        ShiftReport r = semantic_shift_report(shared, emb, emb);
        std::ostringstream table, jsonl;
        write_shift_report(r, table, jsonl);
        std::istringstream lines(jsonl.str());
        std::string line;
        std::size_t parsed = 0;
        while (std::getline(lines, line)) {
            auto j = nlohmann::json::parse(line);
            CHECK(j.at("shift") == 0.0);
            ++parsed;
        }
        CHECK(parsed == 4);
    }
    SUBCASE("overlap report") {
        OverlapStats s = vocab_overlap_stats(Vocabulary({"a", "b"}), Vocabulary({"b", "c"}));
        std::ostringstream table, jsonl;
        write_overlap_stats(s, table, jsonl);
        auto j = nlohmann::json::parse(jsonl.str());
        CHECK(j.at("intersection") == 1);
        CHECK(j.at("jaccard") == doctest::Approx(1.0 / 3.0));
        CHECK(table.str().find("jaccard") != std::string::npos);
    }
}
