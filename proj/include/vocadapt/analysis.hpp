#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vocadapt/embedding.hpp"
#include "vocadapt/projection.hpp"

namespace vocadapt {

struct NeighborReport {
    std::string query;
    std::vector<std::pair<std::string, double>> neighbors;  // cosine, non-increasing
    bool restricted = false;  // candidates limited to shared anchors
};

// Top-n tokens by cosine similarity to the query token, self excluded. When
// restrict is non-null, candidates are limited to the anchor tokens.
NeighborReport nearest_neighbors_report(const std::string& token, const EmbeddingMatrix& emb,
                                        const SharedAnchorSet* restrict_to, std::size_t n);

struct ShiftEntry {
    std::string token;
    double shift;  // 1 - cosine(source row, target row)
};

struct ShiftReport {
    std::vector<ShiftEntry> ranked;          // descending shift
    std::vector<std::string> zero_norm;      // not rankable, reported separately
};

// How far each shared token moved between the source space and the projected
// target space, measured as 1 - cosine.
ShiftReport semantic_shift_report(const SharedAnchorSet& shared, const EmbeddingMatrix& source_nmt,
                                  const EmbeddingMatrix& target_nmt);

struct OverlapStats {
    std::size_t size_a = 0;
    std::size_t size_b = 0;
    std::size_t intersection = 0;
    double jaccard = 0.0;
    std::size_t unique_a = 0;
    std::size_t unique_b = 0;
    std::optional<double> coverage;  // distinct corpus-B types covered by A
};

OverlapStats vocab_overlap_stats(const Vocabulary& vocab_a, const Vocabulary& vocab_b,
                                 std::istream* corpus_b = nullptr);

// Every report is emitted twice: an aligned human-readable table and
// line-delimited JSON records, both deterministically ordered.
void write_neighbor_report(const NeighborReport& report, std::ostream& table, std::ostream& jsonl);
void write_shift_report(const ShiftReport& report, std::ostream& table, std::ostream& jsonl);
void write_overlap_stats(const OverlapStats& stats, std::ostream& table, std::ostream& jsonl);

}  // namespace vocadapt
