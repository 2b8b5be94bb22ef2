#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vocadapt/cbow.hpp"
#include "vocadapt/checkpoint.hpp"
#include "vocadapt/projection.hpp"

namespace vocadapt {

struct SideConfig {
    // Empty: use the vocabulary file referenced by the checkpoint manifest,
    // resolved relative to the checkpoint's directory.
    std::string source_vocab_path;
    std::string corpus_path;
    CbowConfig cbow;            // cbow.dim == 0 adopts the checkpoint width
    ProjectionConfig projection;
};

struct PipelineConfig {
    std::string checkpoint_path;
    std::string output_dir;
    SideConfig encoder;
    SideConfig decoder;
    // Empty: take the special-token list from the checkpoint manifest.
    std::vector<std::string> special_tokens;
    // Master seed; the encoder trains with seed, the decoder with seed + 1.
    std::uint64_t seed = 1;
};

struct SideSummary {
    std::size_t corpus_vocab_size = 0;   // tokens induced from the corpus
    std::size_t adapted_vocab_size = 0;  // specials + corpus tokens
    std::size_t shared_anchor_count = 0;
};

struct PipelineResult {
    std::string output_dir;
    std::vector<std::string> artifacts;  // file names relative to output_dir
    SideSummary encoder;
    SideSummary decoder;
};

// Runs build_vocab -> train_cbow -> compute_shared -> project ->
// swap_embeddings for each side, then validates and writes the adapted
// checkpoint, per-side vocabularies and projected embeddings, shift and
// overlap reports, and a run manifest with content hashes of every input and
// output. Work happens in a staging subdirectory; on success files move into
// output_dir, on error they move to output_dir/quarantine and the error names
// the failed stage.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace vocadapt
