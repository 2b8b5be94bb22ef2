#include "vocadapt/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <unordered_set>

#include "vocadapt/errors.hpp"

namespace vocadapt {

namespace {

constexpr double kOrthogonalityTol = 1e-5;
constexpr double kDefaultGramEpsilon = 1e-3;

void check_same_dim(const EmbeddingMatrix& target, const EmbeddingMatrix& source) {
    if (target.dim() != source.dim())
        throw DataError("projection: dimension mismatch (target " + std::to_string(target.dim()) +
                        " vs source " + std::to_string(source.dim()) + ")");
}

// Anchors ordered by (frequency desc, target index asc), truncated to n, then
// restored to target-index order.
std::vector<AnchorEntry> top_n_by_frequency(const std::vector<AnchorEntry>& entries,
                                            const Vocabulary& target_vocab, std::size_t n) {
    std::vector<AnchorEntry> out = entries;
    std::sort(out.begin(), out.end(), [&](const AnchorEntry& a, const AnchorEntry& b) {
        const auto fa = target_vocab.frequency(a.target_index);
        const auto fb = target_vocab.frequency(b.target_index);
        if (fa != fb) return fa > fb;
        return a.target_index < b.target_index;
    });
    if (out.size() > n) out.resize(n);
    std::sort(out.begin(), out.end(), [](const AnchorEntry& a, const AnchorEntry& b) {
        return a.target_index < b.target_index;
    });
    return out;
}

}  // namespace

SharedAnchorSet::SharedAnchorSet(std::vector<AnchorEntry> entries)
    : entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries_)
        if (!seen.insert(e.token).second)
            throw DataError("shared anchor set: duplicate token \"" + e.token + "\"");
}

SharedAnchorSet compute_shared(const Vocabulary& target_vocab, const Vocabulary& source_vocab) {
    std::vector<AnchorEntry> entries;
    for (std::size_t ti = 0; ti < target_vocab.size(); ++ti) {
        if (target_vocab.is_special(ti)) continue;
        auto si = source_vocab.index_of(target_vocab.token(ti));
        if (!si || source_vocab.is_special(*si)) continue;
        entries.push_back({target_vocab.token(ti), ti, *si});
    }
    if (entries.empty())
        throw DataError("no shared anchors between target and source vocabularies");
    return SharedAnchorSet(std::move(entries));
}

SharedAnchorSet anchors_from_tokens(const std::vector<std::string>& tokens,
                                    const Vocabulary& target_vocab,
                                    const Vocabulary& source_vocab) {
    std::vector<AnchorEntry> entries;
    for (const auto& tok : tokens) {
        auto ti = target_vocab.index_of(tok);
        if (!ti) throw DataError("anchor token \"" + tok + "\" not in target vocabulary");
        auto si = source_vocab.index_of(tok);
        if (!si) throw DataError("anchor token \"" + tok + "\" not in source vocabulary");
        entries.push_back({tok, *ti, *si});
    }
    if (entries.empty()) throw DataError("no shared anchors: anchor list is empty");
    std::sort(entries.begin(), entries.end(), [](const AnchorEntry& a, const AnchorEntry& b) {
        return a.target_index < b.target_index;
    });
    return SharedAnchorSet(std::move(entries));
}

OrthogonalMap::OrthogonalMap(Mat matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1)
        throw DataError("orthogonal map: matrix must be square");
    const Mat gram = matrix_.transpose() * matrix_;
    const double dev = (gram - Mat::Identity(matrix_.rows(), matrix_.cols())).norm();
    if (dev > kOrthogonalityTol)
        throw DataError("orthogonal map: deviation from orthogonality " + std::to_string(dev) +
                        " exceeds tolerance");
}

ProjectionMethod parse_method(const std::string& name) {
    if (name == "linear") return ProjectionMethod::kLinear;
    if (name == "llm") return ProjectionMethod::kLlm;
    if (name == "cbow-as-is") return ProjectionMethod::kCbowAsIs;
    throw DataError("unknown projection method \"" + name +
                    "\" (expected linear, llm or cbow-as-is)");
}

std::string to_string(ProjectionMethod m) {
    switch (m) {
        case ProjectionMethod::kLinear: return "linear";
        case ProjectionMethod::kLlm: return "llm";
        case ProjectionMethod::kCbowAsIs: return "cbow-as-is";
    }
    return "?";
}

void ProjectionConfig::validate() const {
    if (k == 0) throw DataError("projection config: k must be >= 1");
    if (gram_epsilon && *gram_epsilon < 0.0)
        throw DataError("projection config: gram_epsilon must be non-negative");
    if (threads == 0) throw DataError("projection config: threads must be positive");
}

double ProjectionConfig::resolve_gram_epsilon(std::size_t neighbor_count, std::size_t dim) const {
    if (gram_epsilon) return *gram_epsilon;
    return neighbor_count > dim ? kDefaultGramEpsilon : 0.0;
}

OrthogonalMap fit_orthogonal(const SharedAnchorSet& shared, const EmbeddingMatrix& target,
                             const EmbeddingMatrix& source, const ProjectionConfig& config) {
    check_same_dim(target, source);
    if (shared.size() == 0) throw DataError("fit_orthogonal: empty anchor set");

    std::vector<AnchorEntry> anchors = shared.entries();
    if (config.anchor_top_n > 0)
        anchors = top_n_by_frequency(anchors, target.vocab(), config.anchor_top_n);

    const Eigen::Index d = target.dim();
    Mat a(static_cast<Eigen::Index>(anchors.size()), d);
    Mat b(static_cast<Eigen::Index>(anchors.size()), d);
    Eigen::Index n = 0;
    for (const auto& e : anchors) {
        Eigen::RowVectorXd ta = target.row(e.target_index);
        Eigen::RowVectorXd sa = source.row(e.source_index);
        if (config.normalize_anchors) {
            const double nt = ta.norm();
            const double ns = sa.norm();
            if (nt == 0.0 || ns == 0.0) continue;  // cannot normalize, drop the pair
            ta /= nt;
            sa /= ns;
        }
        a.row(n) = ta;
        b.row(n) = sa;
        ++n;
    }
    if (n == 0) throw DataError("fit_orthogonal: no usable anchors (all zero-norm)");
    a.conservativeResize(n, d);
    b.conservativeResize(n, d);

    const Mat cross = a.transpose() * b;  // d x d
    if (cross.norm() == 0.0)
        throw DataError("fit_orthogonal: anchor cross-covariance has rank 0 (all-zero anchors)");

    Eigen::JacobiSVD<Mat> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return OrthogonalMap(svd.matrixU() * svd.matrixV().transpose());
}

EmbeddingMatrix apply_orthogonal(const OrthogonalMap& map, const EmbeddingMatrix& target) {
    if (map.dim() != target.dim())
        throw DataError("apply_orthogonal: dimension mismatch (map " + std::to_string(map.dim()) +
                        " vs embeddings " + std::to_string(target.dim()) + ")");
    return EmbeddingMatrix(target.vocab(), target.rows() * map.matrix());
}

std::vector<Neighbor> knn_shared(std::size_t token_index, const EmbeddingMatrix& target,
                                 const SharedAnchorSet& shared, std::size_t k) {
    if (token_index >= target.size())
        throw DataError("knn_shared: token index " + std::to_string(token_index) +
                        " out of range");
    if (k == 0) throw DataError("knn_shared: k must be >= 1");
    if (shared.size() == 0) throw DataError("knn_shared: empty anchor set");

    const RowView query = target.row(token_index);
    const double qnorm = query.norm();
    if (qnorm == 0.0)
        throw DataError("knn_shared: zero-norm row for token \"" +
                        target.vocab().token(token_index) + "\"");

    std::vector<Neighbor> candidates;
    candidates.reserve(shared.size());
    const auto& entries = shared.entries();
    for (std::size_t ei = 0; ei < entries.size(); ++ei) {
        const auto& e = entries[ei];
        if (e.target_index == token_index) continue;  // self-exclusion
        const RowView anchor = target.row(e.target_index);
        const double anorm = anchor.norm();
        if (anorm == 0.0) continue;
        const double cos = std::clamp(query.dot(anchor) / (qnorm * anorm), -1.0, 1.0);
        candidates.push_back({ei, cos});
    }

    // entries are in ascending target-index order, so comparing entry indices
    // implements the stated tie-break
    auto better = [](const Neighbor& x, const Neighbor& y) {
        if (x.cosine != y.cosine) return x.cosine > y.cosine;
        return x.anchor_entry < y.anchor_entry;
    };
    if (candidates.size() > k) {
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end(), better);
        candidates.resize(k);
    } else {
        std::sort(candidates.begin(), candidates.end(), better);
    }
    return candidates;
}

std::vector<double> solve_local_weights(RowView query, const Mat& neighbors,
                                        double gram_epsilon) {
    const Eigen::Index k = neighbors.rows();
    if (k < 1) throw DataError("solve_local_weights: need at least one neighbor");
    if (neighbors.cols() != query.size())
        throw DataError("solve_local_weights: dimension mismatch");
    if (gram_epsilon < 0.0)
        throw DataError("solve_local_weights: gram_epsilon must be non-negative");

    // With one neighbor the sum-to-one constraint fixes the answer.
    if (k == 1) return {1.0};

    Mat diffs = neighbors;
    diffs.rowwise() -= query;
    Mat gram = diffs * diffs.transpose();  // k x k
    if (gram_epsilon > 0.0) {
        const double scale = gram.trace() / static_cast<double>(k);
        gram += gram_epsilon * scale * Mat::Identity(k, k);
    }

    Eigen::FullPivLU<Mat> lu(gram);
    if (!lu.isInvertible())
        throw DataError(
            "solve_local_weights: singular Gram matrix (degenerate or duplicate neighbors); "
            "set gram_epsilon > 0");
    const Eigen::VectorXd u = lu.solve(Eigen::VectorXd::Ones(k));
    const double total = u.sum();
    if (total == 0.0 || !std::isfinite(total))
        throw DataError(
            "solve_local_weights: Gram system yields no normalizable solution; "
            "set gram_epsilon > 0");

    std::vector<double> weights(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        weights[static_cast<std::size_t>(j)] = u(j) / total;
        if (!std::isfinite(weights[static_cast<std::size_t>(j)]))
            throw DataError("solve_local_weights: non-finite weight");
    }
    return weights;
}

LlmProjection llm_project_detailed(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                                   const SharedAnchorSet& shared, const ProjectionConfig& config) {
    check_same_dim(target, source);
    config.validate();
    if (shared.size() == 0) throw DataError("llm_project: empty anchor set");

    const Eigen::Index d = target.dim();
    const std::size_t n = target.size();
    Mat out = Mat::Zero(static_cast<Eigen::Index>(n), d);
    std::vector<LocalReconstruction> recons(n);

    auto project_token = [&](std::size_t i) {
        std::vector<Neighbor> neighbors;
        try {
            neighbors = knn_shared(i, target, shared, config.k);
            if (neighbors.empty()) {
                // A token that is itself the only usable anchor has nothing
                // else to reconstruct from; it keeps its own source row via
                // the forced single weight.
                for (std::size_t e = 0; e < shared.entries().size(); ++e)
                    if (shared.entries()[e].target_index == i) {
                        neighbors.push_back({e, 1.0});
                        break;
                    }
            }
            if (neighbors.empty())
                throw DataError("no eligible anchors");
            Mat nb_rows(static_cast<Eigen::Index>(neighbors.size()), d);
            for (std::size_t j = 0; j < neighbors.size(); ++j)
                nb_rows.row(static_cast<Eigen::Index>(j)) =
                    target.row(shared.entries()[neighbors[j].anchor_entry].target_index);
            const double eps =
                config.resolve_gram_epsilon(neighbors.size(), static_cast<std::size_t>(d));
            const std::vector<double> alpha = solve_local_weights(target.row(i), nb_rows, eps);

            // Fixed accumulation order (ranked neighbors, plain multiply-add)
            // so the reconstruction can be reproduced bit-exactly from the
            // stored weights.
            for (std::size_t j = 0; j < neighbors.size(); ++j) {
                const auto& entry = shared.entries()[neighbors[j].anchor_entry];
                const RowView src = source.row(entry.source_index);
                for (Eigen::Index c = 0; c < d; ++c)
                    out(static_cast<Eigen::Index>(i), c) += alpha[j] * src(c);
            }

            auto& rec = recons[i];
            rec.token_index = i;
            rec.anchor_entries.reserve(neighbors.size());
            for (const auto& nb : neighbors) rec.anchor_entries.push_back(nb.anchor_entry);
            rec.weights = alpha;
        } catch (const DataError& e) {
            throw DataError("llm projection failed for token \"" + target.vocab().token(i) +
                            "\" (index " + std::to_string(i) + "): " + e.what());
        }
    };

    const std::size_t threads = std::min(config.threads, n == 0 ? std::size_t{1} : n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) project_token(i);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            const std::size_t begin = n * w / threads;
            const std::size_t end = n * (w + 1) / threads;
            workers.emplace_back([&, begin, end, w] {
                try {
                    for (std::size_t i = begin; i < end; ++i) project_token(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : workers) th.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    return LlmProjection{EmbeddingMatrix(target.vocab(), std::move(out)), std::move(recons)};
}

EmbeddingMatrix llm_project(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                            const SharedAnchorSet& shared, const ProjectionConfig& config) {
    return llm_project_detailed(target, source, shared, config).embeddings;
}

EmbeddingMatrix project(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                        const ProjectionConfig& config, const SharedAnchorSet* shared_override) {
    config.validate();
    check_same_dim(target, source);

    if (config.method == ProjectionMethod::kCbowAsIs) return target;

    std::optional<SharedAnchorSet> computed;
    const SharedAnchorSet* shared = shared_override;
    if (!shared) {
        computed.emplace(compute_shared(target.vocab(), source.vocab()));
        shared = &*computed;
    }

    if (config.method == ProjectionMethod::kLinear) {
        OrthogonalMap map = fit_orthogonal(*shared, target, source, config);
        return apply_orthogonal(map, target);
    }
    return llm_project(target, source, *shared, config);
}

}  // namespace vocadapt
