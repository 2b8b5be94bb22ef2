#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "vocadapt/embedding.hpp"
#include "vocadapt/vocab.hpp"

namespace vocadapt {

struct CbowConfig {
    std::size_t dim = 100;           // in the pipeline, 0 = take the checkpoint's width
    std::size_t window = 5;          // symmetric context radius
    std::size_t negatives = 5;       // negative samples per prediction
    std::size_t epochs = 5;
    double initial_lr = 0.05;        // linear decay towards 0 over training
    std::uint64_t min_count = 1;
    std::size_t max_vocab = 16000;
    std::uint64_t seed = 1;
    double subsample_threshold = 1e-4;  // 0 disables frequent-token subsampling
    std::size_t threads = 1;         // >1 relaxes bit-determinism (hogwild updates)

    // Throws DataError when a positivity constraint is violated.
    void validate() const;
};

// Counts whitespace-separated tokens, keeps those with frequency >= min_count,
// truncates to the max_vocab most frequent. Ties break by first occurrence.
Vocabulary build_vocab(std::istream& corpus, std::uint64_t min_count, std::size_t max_vocab);
Vocabulary build_vocab_file(const std::string& path, std::uint64_t min_count,
                            std::size_t max_vocab);

// CBOW with negative sampling: the mean of the context vectors predicts the
// center token; negatives come from the unigram distribution raised to 0.75.
// Returns the input-side matrix, |vocab| x dim. Bit-deterministic for a fixed
// seed when threads == 1. Context windows never cross line boundaries.
EmbeddingMatrix train_cbow(std::istream& corpus, const Vocabulary& vocab,
                           const CbowConfig& config);
EmbeddingMatrix train_cbow_file(const std::string& path, const Vocabulary& vocab,
                                const CbowConfig& config);

}  // namespace vocadapt
