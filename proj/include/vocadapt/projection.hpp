#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vocadapt/embedding.hpp"

namespace vocadapt {

// One token present in both vocabularies, with its index on each side.
struct AnchorEntry {
    std::string token;
    std::size_t target_index;
    std::size_t source_index;
};

// Tokens shared by the target and source vocabularies, ordered by target
// index. Used as anchors for cross-space projection.
class SharedAnchorSet {
public:
    explicit SharedAnchorSet(std::vector<AnchorEntry> entries);

    const std::vector<AnchorEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<AnchorEntry> entries_;
};

// Exact string intersection of the two vocabularies, special tokens excluded.
// Throws DataError when the intersection is empty.
SharedAnchorSet compute_shared(const Vocabulary& target_vocab, const Vocabulary& source_vocab);

// Builds an anchor set from an explicit token list (overriding the computed
// intersection). Every token must be present in both vocabularies.
SharedAnchorSet anchors_from_tokens(const std::vector<std::string>& tokens,
                                    const Vocabulary& target_vocab,
                                    const Vocabulary& source_vocab);

// d x d orthogonal matrix; ||W^T W - I||_F <= 1e-5 checked at construction.
class OrthogonalMap {
public:
    explicit OrthogonalMap(Mat matrix);
    const Mat& matrix() const { return matrix_; }
    Eigen::Index dim() const { return matrix_.rows(); }

private:
    Mat matrix_;
};

// Affine reconstruction of one target token from shared anchors: weights sum
// to 1, the token itself is never among its neighbors.
struct LocalReconstruction {
    std::size_t token_index;                  // into the target vocabulary
    std::vector<std::size_t> anchor_entries;  // indices into SharedAnchorSet::entries()
    std::vector<double> weights;
};

enum class ProjectionMethod { kLinear, kLlm, kCbowAsIs };

ProjectionMethod parse_method(const std::string& name);
std::string to_string(ProjectionMethod m);

struct ProjectionConfig {
    ProjectionMethod method = ProjectionMethod::kLlm;
    std::size_t k = 10;              // neighbor count for the locally linear method
    bool normalize_anchors = false;  // length-normalize anchors before the orthogonal fit
    // Gram regularization strength; when unset, 1e-3 if the neighbor count
    // exceeds the dimension (singular Gram), else 0.
    std::optional<double> gram_epsilon;
    std::size_t anchor_top_n = 0;    // linear method: keep only the n most frequent anchors
    std::size_t threads = 1;         // per-token projection parallelism

    void validate() const;
    double resolve_gram_epsilon(std::size_t neighbor_count, std::size_t dim) const;
};

// Least-squares orthogonal fit mapping target anchor rows onto source anchor
// rows, solved in closed form via SVD of the anchor cross-covariance.
OrthogonalMap fit_orthogonal(const SharedAnchorSet& shared, const EmbeddingMatrix& target,
                             const EmbeddingMatrix& source, const ProjectionConfig& config);

// Row-wise product T_w W for every token; vocabulary unchanged.
EmbeddingMatrix apply_orthogonal(const OrthogonalMap& map, const EmbeddingMatrix& target);

struct Neighbor {
    std::size_t anchor_entry;  // index into SharedAnchorSet::entries()
    double cosine;
};

// Up to k anchors ranked by descending cosine similarity in the target space.
// The token itself is excluded; zero-norm anchors are skipped; ties break by
// ascending target index. Returns fewer than k when fewer are eligible.
std::vector<Neighbor> knn_shared(std::size_t token_index, const EmbeddingMatrix& target,
                                 const SharedAnchorSet& shared, std::size_t k);

// Affine weights minimizing ||query - sum_j a_j neighbor_j||^2 subject to
// sum a = 1, via the Gram system over neighbor-difference vectors. Weights
// may be negative. Throws DataError when the (conditioned) system is singular.
std::vector<double> solve_local_weights(RowView query, const Mat& neighbors,
                                        double gram_epsilon);

struct LlmProjection {
    EmbeddingMatrix embeddings;
    std::vector<LocalReconstruction> reconstructions;  // one per target token
};

// Projects every target token into the source space by transferring its
// local reconstruction weights onto the source rows of its anchors.
LlmProjection llm_project_detailed(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                                   const SharedAnchorSet& shared, const ProjectionConfig& config);
EmbeddingMatrix llm_project(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                            const SharedAnchorSet& shared, const ProjectionConfig& config);

// Method dispatch. When shared_override is null the anchor set is computed
// from the two vocabularies (linear and llm methods only).
EmbeddingMatrix project(const EmbeddingMatrix& target, const EmbeddingMatrix& source,
                        const ProjectionConfig& config,
                        const SharedAnchorSet* shared_override = nullptr);

}  // namespace vocadapt
