#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vocadapt/embedding.hpp"
#include "vocadapt/vocab.hpp"

namespace vocadapt {

// Named tensor: row-major data, float32 on disk (little-endian).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t element_count() const;
};

enum class Side { kEncoder, kDecoder };

Side parse_side(const std::string& name);
std::string to_string(Side side);

// Which tensor holds a side's embedding layer, plus the vocabulary it indexes.
struct EmbeddingRole {
    std::string tensor_key;
    std::string vocab_file;  // reference, resolved by the caller
    std::size_t vocab_size = 0;
};

struct CheckpointManifest {
    int version = 1;
    EmbeddingRole encoder;
    EmbeddingRole decoder;
    // When tied, the decoder's output projection is the same stored tensor as
    // its embedding; swapping one swaps both roles.
    bool tied_decoder = false;
    std::vector<std::string> special_tokens;  // pad/bos/eos/unk strings
    std::vector<std::string> tensor_order;    // payload order in the container
};

// Named-tensor store with a manifest identifying the embedding layers. Only
// embedding-role tensors are interpreted; everything else is opaque payload.
// Immutable value type: swap_embeddings returns a new checkpoint.
class Checkpoint {
public:
    Checkpoint(CheckpointManifest manifest, std::map<std::string, Tensor> tensors);

    const CheckpointManifest& manifest() const { return manifest_; }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    bool has_tensor(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;

    const EmbeddingRole& role(Side side) const;
    const Tensor& embedding_tensor(Side side) const;
    // Same tensor as the decoder embedding when tied, null otherwise (the
    // projection of an untied decoder is an opaque tensor we do not name).
    const Tensor* decoder_output_projection() const;

    // Embedding width (columns) of a side's embedding tensor.
    std::size_t embedding_width(Side side) const;

private:
    CheckpointManifest manifest_;
    std::map<std::string, Tensor> tensors_;
};

// Container format: 8-byte magic, u64-LE manifest length, UTF-8 JSON
// manifest, then float32-LE tensor payloads in manifest order. Bit-exact
// round trips.
Checkpoint read_checkpoint(const std::string& path);
void write_checkpoint(const Checkpoint& cp, const std::string& path);

// Replaces one side's vocabulary and embedding rows. Special-token rows are
// copied verbatim (bit-exact) from the old tensor at the source vocabulary's
// special indices; all other rows come from new_emb. new_vocab_ref, when
// non-empty, replaces the manifest's vocabulary file reference.
Checkpoint swap_embeddings(const Checkpoint& cp, Side side, const Vocabulary& new_vocab,
                           const EmbeddingMatrix& new_emb, const Vocabulary& source_vocab,
                           const std::string& new_vocab_ref = "");

struct ValidationReport {
    bool passed = true;
    std::vector<std::string> violations;
};

// Checks structural invariants, finiteness of every tensor and
// vocabulary/row-count agreement. Violations are report items, not errors.
ValidationReport validate_checkpoint(const Checkpoint& cp);

// Views a side's embedding tensor as an EmbeddingMatrix over the given
// vocabulary (row count must match; float widened to double).
EmbeddingMatrix embedding_from_checkpoint(const Checkpoint& cp, Side side,
                                          const Vocabulary& vocab);

}  // namespace vocadapt
