#pragma once

#include <Eigen/Core>
#include <string>

#include "vocadapt/vocab.hpp"

namespace vocadapt {

// Row-major so that a row view is contiguous memory.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowView = Eigen::Ref<const Eigen::RowVectorXd>;

// |V| x d matrix of finite reals; row i belongs to token i of the vocabulary.
// Invariants (row count, finiteness) are checked at construction.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(Vocabulary vocab, Mat rows);

    const Vocabulary& vocab() const { return vocab_; }
    Eigen::Index dim() const { return rows_.cols(); }
    std::size_t size() const { return vocab_.size(); }
    const Mat& rows() const { return rows_; }
    RowView row(std::size_t i) const { return rows_.row(static_cast<Eigen::Index>(i)); }

private:
    Vocabulary vocab_;
    Mat rows_;
};

// a.b / (|a||b|), clamped to [-1, 1]. Throws DataError on zero-norm input or
// dimension mismatch.
double cosine_similarity(RowView a, RowView b);

// word2vec text format: header "<count> <dim>", then one "<token> v1 .. vd"
// line per token. UTF-8, "\n" line endings, 8 significant digits on save.
EmbeddingMatrix load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingMatrix& emb, const std::string& path);

}  // namespace vocadapt
