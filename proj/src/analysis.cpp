#include "vocadapt/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vocadapt/errors.hpp"

namespace vocadapt {
namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

NeighborReport nearest_neighbors_report(const std::string& token, const EmbeddingMatrix& emb,
                                        const SharedAnchorSet* restrict_to, std::size_t n) {
    const Vocabulary& vocab = emb.vocab();
    auto query_idx = vocab.index_of(token);
    if (!query_idx) throw DataError("nearest_neighbors_report: unknown token \"" + token + "\"");
    if (n == 0) throw DataError("nearest_neighbors_report: n must be >= 1");

    const Mat& m = emb.rows();
    double query_norm = m.row(static_cast<Eigen::Index>(*query_idx)).norm();
    if (query_norm == 0.0)
        throw DataError("nearest_neighbors_report: query token \"" + token + "\" has a zero vector");

    std::vector<std::size_t> candidates;
    if (restrict_to != nullptr) {
        candidates.reserve(restrict_to->entries().size());
        for (const AnchorEntry& e : restrict_to->entries()) {
            auto idx = vocab.index_of(e.token);
            if (!idx)
                throw DataError("nearest_neighbors_report: anchor token \"" + e.token +
                                "\" not present in the embedding vocabulary");
            if (*idx == *query_idx) continue;
            candidates.push_back(*idx);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    } else {
        candidates.reserve(vocab.size() - 1);
        for (std::size_t i = 0; i < vocab.size(); ++i)
            if (i != *query_idx) candidates.push_back(i);
    }

    std::vector<std::pair<double, std::size_t>> scored;  // (cosine, index)
    scored.reserve(candidates.size());
    auto query_row = m.row(static_cast<Eigen::Index>(*query_idx));
    for (std::size_t i : candidates) {
        auto row = m.row(static_cast<Eigen::Index>(i));
        double norm = row.norm();
        if (norm == 0.0) continue;  // zero vectors have no defined similarity
        double cos = std::clamp(query_row.dot(row) / (query_norm * norm), -1.0, 1.0);
        scored.emplace_back(cos, i);
    }

    std::size_t keep = std::min(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });

    NeighborReport report;
    report.query = token;
    report.restricted = restrict_to != nullptr;
    report.neighbors.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i)
        report.neighbors.emplace_back(vocab.token(scored[i].second), scored[i].first);
    return report;
}

ShiftReport semantic_shift_report(const SharedAnchorSet& shared, const EmbeddingMatrix& source_nmt,
                                  const EmbeddingMatrix& target_nmt) {
    if (source_nmt.dim() != target_nmt.dim())
        throw DataError("semantic_shift_report: dimension mismatch " +
                        std::to_string(source_nmt.dim()) + " vs " +
                        std::to_string(target_nmt.dim()));

    struct Row {
        std::string token;
        double shift;
        std::size_t target_index;
    };
    std::vector<Row> rows;
    ShiftReport report;
    for (const AnchorEntry& e : shared.entries()) {
        auto si = source_nmt.vocab().index_of(e.token);
        auto ti = target_nmt.vocab().index_of(e.token);
        if (!si || !ti)
            throw DataError("semantic_shift_report: shared token \"" + e.token +
                            "\" not resolvable in both embeddings");
        auto src_row = source_nmt.rows().row(static_cast<Eigen::Index>(*si));
        auto tgt_row = target_nmt.rows().row(static_cast<Eigen::Index>(*ti));
        double sn = src_row.norm();
        double tn = tgt_row.norm();
        if (sn == 0.0 || tn == 0.0) {
            report.zero_norm.push_back(e.token);
            continue;
        }
        // Identical rows shift by exactly 0; computing the cosine would leave
        // rounding residue from the norm square roots.
        if ((src_row.array() == tgt_row.array()).all()) {
            rows.push_back({e.token, 0.0, *ti});
            continue;
        }
        double cos = std::clamp(src_row.dot(tgt_row) / (sn * tn), -1.0, 1.0);
        rows.push_back({e.token, 1.0 - cos, *ti});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.shift != b.shift) return a.shift > b.shift;
        return a.target_index < b.target_index;
    });
    report.ranked.reserve(rows.size());
    for (const Row& r : rows) report.ranked.push_back({r.token, r.shift});
    return report;
}

OverlapStats vocab_overlap_stats(const Vocabulary& vocab_a, const Vocabulary& vocab_b,
                                 std::istream* corpus_b) {
    OverlapStats stats;
    stats.size_a = vocab_a.size();
    stats.size_b = vocab_b.size();
    for (std::size_t i = 0; i < vocab_a.size(); ++i)
        if (vocab_b.index_of(vocab_a.token(i))) ++stats.intersection;
    stats.unique_a = stats.size_a - stats.intersection;
    stats.unique_b = stats.size_b - stats.intersection;
    std::size_t union_size = stats.size_a + stats.size_b - stats.intersection;
    stats.jaccard = union_size == 0
                        ? 1.0
                        : static_cast<double>(stats.intersection) / static_cast<double>(union_size);

    if (corpus_b != nullptr) {
        std::unordered_set<std::string> distinct;
        std::size_t covered = 0;
        std::string tok;
        while (*corpus_b >> tok) {
            if (!distinct.insert(tok).second) continue;
            if (vocab_a.index_of(tok)) ++covered;
        }
        stats.coverage = distinct.empty() ? 0.0
                                          : static_cast<double>(covered) /
                                                static_cast<double>(distinct.size());
    }
    return stats;
}

void write_neighbor_report(const NeighborReport& report, std::ostream& table, std::ostream& jsonl) {
    table << "query: " << report.query
          << (report.restricted ? "  (candidates: shared anchors)" : "  (candidates: full vocabulary)")
          << "\n";
    std::size_t width = 5;
    for (const auto& [tok, cos] : report.neighbors) width = std::max(width, tok.size());
    table << "rank  " << std::string(width - 5, ' ') << "token  cosine\n";
    for (std::size_t i = 0; i < report.neighbors.size(); ++i) {
        const auto& [tok, cos] = report.neighbors[i];
        std::string rank = std::to_string(i + 1);
        table << std::string(4 - std::min<std::size_t>(4, rank.size()), ' ') << rank << "  "
              << std::string(width - tok.size(), ' ') << tok << "  " << format_double(cos) << "\n";
    }

    for (std::size_t i = 0; i < report.neighbors.size(); ++i) {
        nlohmann::ordered_json rec;
        rec["query"] = report.query;
        rec["restricted"] = report.restricted;
        rec["rank"] = i + 1;
        rec["token"] = report.neighbors[i].first;
        rec["cosine"] = report.neighbors[i].second;
        jsonl << rec.dump() << "\n";
    }
}

void write_shift_report(const ShiftReport& report, std::ostream& table, std::ostream& jsonl) {
    std::size_t width = 5;
    for (const ShiftEntry& e : report.ranked) width = std::max(width, e.token.size());
    for (const std::string& t : report.zero_norm) width = std::max(width, t.size());
    table << "rank  " << std::string(width - 5, ' ') << "token  shift\n";
    for (std::size_t i = 0; i < report.ranked.size(); ++i) {
        const ShiftEntry& e = report.ranked[i];
        std::string rank = std::to_string(i + 1);
        table << std::string(4 - std::min<std::size_t>(4, rank.size()), ' ') << rank << "  "
              << std::string(width - e.token.size(), ' ') << e.token << "  "
              << format_double(e.shift) << "\n";
    }
    if (!report.zero_norm.empty()) {
        table << "zero-norm (not ranked):";
        for (const std::string& t : report.zero_norm) table << " " << t;
        table << "\n";
    }

    for (const ShiftEntry& e : report.ranked) {
        nlohmann::ordered_json rec;
        rec["token"] = e.token;
        rec["shift"] = e.shift;
        jsonl << rec.dump() << "\n";
    }
    for (const std::string& t : report.zero_norm) {
        nlohmann::ordered_json rec;
        rec["token"] = t;
        rec["zero_norm"] = true;
        jsonl << rec.dump() << "\n";
    }
}

void write_overlap_stats(const OverlapStats& stats, std::ostream& table, std::ostream& jsonl) {
    table << "size_a        " << stats.size_a << "\n";
    table << "size_b        " << stats.size_b << "\n";
    table << "intersection  " << stats.intersection << "\n";
    table << "jaccard       " << format_double(stats.jaccard) << "\n";
    table << "unique_a      " << stats.unique_a << "\n";
    table << "unique_b      " << stats.unique_b << "\n";
    if (stats.coverage) table << "coverage      " << format_double(*stats.coverage) << "\n";

    nlohmann::ordered_json rec;
    rec["size_a"] = stats.size_a;
    rec["size_b"] = stats.size_b;
    rec["intersection"] = stats.intersection;
    rec["jaccard"] = stats.jaccard;
    rec["unique_a"] = stats.unique_a;
    rec["unique_b"] = stats.unique_b;
    if (stats.coverage) rec["coverage"] = *stats.coverage;
    jsonl << rec.dump() << "\n";
}

}  // namespace vocadapt
