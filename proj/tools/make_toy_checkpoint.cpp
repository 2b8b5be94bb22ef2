// Builds the bundled toy checkpoint: a tied-decoder model with deterministic
// pseudo-random weights over the toy source vocabularies. Regenerating with
// the same seed reproduces the file byte for byte.
#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vocadapt/checkpoint.hpp"
#include "vocadapt/errors.hpp"
#include "vocadapt/vocab.hpp"

namespace {

using namespace vocadapt;

// Explicit bit derivation; std::uniform_real_distribution streams are
// implementation-defined and would break cross-toolchain reproducibility.
double unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& gen) {
    Tensor t;
    t.shape = std::move(shape);
    std::size_t n = t.element_count();
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        t.data[i] = static_cast<float>(unit(gen) - 0.5);
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the bundled toy checkpoint from the toy source vocabularies"};
    std::string dir = "data/toy";
    std::string output;
    std::size_t dim = 16;
    std::uint64_t seed = 42;
    app.add_option("--dir", dir, "Directory holding encoder_source.vocab / decoder_source.vocab");
    app.add_option("--output", output, "Checkpoint path; default <dir>/toy.ckpt");
    app.add_option("--dim", dim, "Embedding width");
    app.add_option("--seed", seed, "RNG seed");

    try {
        app.parse(argc, argv);
        if (output.empty()) output = dir + "/toy.ckpt";

        Vocabulary enc_vocab = load_vocab(dir + "/encoder_source.vocab");
        Vocabulary dec_vocab = load_vocab(dir + "/decoder_source.vocab");

        std::mt19937_64 gen(seed);
        std::map<std::string, Tensor> tensors;
        tensors["encoder.embedding.weight"] = random_tensor({enc_vocab.size(), dim}, gen);
        tensors["encoder.layers.0.weight"] = random_tensor({dim, dim}, gen);
        tensors["attention.weight"] = random_tensor({dim, dim}, gen);
        tensors["decoder.embedding.weight"] = random_tensor({dec_vocab.size(), dim}, gen);
        tensors["decoder.layers.0.weight"] = random_tensor({dim, dim}, gen);

        CheckpointManifest manifest;
        manifest.version = 1;
        manifest.encoder = {"encoder.embedding.weight", "encoder_source.vocab", enc_vocab.size()};
        manifest.decoder = {"decoder.embedding.weight", "decoder_source.vocab", dec_vocab.size()};
        manifest.tied_decoder = true;
        manifest.special_tokens = {"<pad>", "<s>", "</s>", "<unk>"};
        manifest.tensor_order = {"encoder.embedding.weight", "encoder.layers.0.weight",
                                 "attention.weight", "decoder.embedding.weight",
                                 "decoder.layers.0.weight"};

        Checkpoint cp(manifest, std::move(tensors));
        write_checkpoint(cp, output);
        std::cout << "wrote " << output << " (" << enc_vocab.size() << " x " << dim
                  << " encoder, " << dec_vocab.size() << " x " << dim << " tied decoder)\n";
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
