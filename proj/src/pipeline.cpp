#include "vocadapt/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vocadapt/analysis.hpp"
#include "vocadapt/errors.hpp"
#include "vocadapt/hash.hpp"

namespace vocadapt {
namespace {

namespace fs = std::filesystem;

// Rethrows with the stage name prepended, preserving the error category so
// the CLI exit code stays correct.
template <typename Fn>
decltype(auto) stage(const std::string& name, Fn&& fn) {
    try {
        return std::forward<Fn>(fn)();
    } catch (const IoError& e) {
        throw IoError("stage " + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("stage " + name + ": " + e.what());
    }
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> dedupe(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const std::string& n : names)
        if (seen.insert(n).second) out.push_back(n);
    return out;
}

nlohmann::ordered_json cbow_json(const CbowConfig& c) {
    nlohmann::ordered_json j;
    j["dim"] = c.dim;
    j["window"] = c.window;
    j["negatives"] = c.negatives;
    j["epochs"] = c.epochs;
    j["initial_lr"] = c.initial_lr;
    j["min_count"] = c.min_count;
    j["max_vocab"] = c.max_vocab;
    j["seed"] = c.seed;
    j["subsample_threshold"] = c.subsample_threshold;
    j["threads"] = c.threads;
    return j;
}

nlohmann::ordered_json projection_json(const ProjectionConfig& c) {
    nlohmann::ordered_json j;
    j["method"] = to_string(c.method);
    j["k"] = c.k;
    j["normalize_anchors"] = c.normalize_anchors;
    if (c.gram_epsilon)
        j["gram_epsilon"] = *c.gram_epsilon;
    else
        j["gram_epsilon"] = nullptr;
    j["anchor_top_n"] = c.anchor_top_n;
    j["threads"] = c.threads;
    return j;
}

struct SideArtifacts {
    std::string source_vocab_path;  // as resolved, for input hashing
    Vocabulary source_vocab;
    Vocabulary adapted_vocab;
    Mat adapted_rows;
    CbowConfig cbow_used;
    ShiftReport shift;
    OverlapStats overlap;
    SideSummary summary;
};

std::string resolve_vocab_path(const Checkpoint& cp, Side side, const SideConfig& side_cfg,
                               const std::string& checkpoint_path) {
    if (!side_cfg.source_vocab_path.empty()) return side_cfg.source_vocab_path;
    const std::string& ref = cp.role(side).vocab_file;
    if (ref.empty())
        throw DataError("checkpoint manifest carries no vocabulary reference for the " +
                        to_string(side) + " and no explicit vocabulary path was given");
    fs::path p(ref);
    if (p.is_absolute()) return p.string();
    return (fs::path(checkpoint_path).parent_path() / p).string();
}

SideArtifacts process_side(const Checkpoint& cp, Side side, const SideConfig& side_cfg,
                           const std::string& checkpoint_path,
                           const std::vector<std::string>& specials, std::uint64_t seed) {
    const std::string sn = to_string(side);
    SideArtifacts art;

    art.source_vocab_path = stage("load_source_vocab (" + sn + ")", [&] {
        return resolve_vocab_path(cp, side, side_cfg, checkpoint_path);
    });
    art.source_vocab = stage("load_source_vocab (" + sn + ")", [&] {
        return load_vocab(art.source_vocab_path).with_specials(specials);
    });
    EmbeddingMatrix source_emb = stage("load_source_embedding (" + sn + ")", [&] {
        return embedding_from_checkpoint(cp, side, art.source_vocab);
    });
    const std::size_t width = cp.embedding_width(side);

    CbowConfig cbow_cfg = side_cfg.cbow;
    cbow_cfg.seed = seed;
    if (cbow_cfg.dim == 0) cbow_cfg.dim = width;
    if (cbow_cfg.dim != width)
        throw DataError("stage train_cbow (" + sn + "): cbow dim " +
                        std::to_string(cbow_cfg.dim) + " does not match checkpoint embedding width " +
                        std::to_string(width));
    art.cbow_used = cbow_cfg;

    Vocabulary corpus_vocab = stage("build_vocab (" + sn + ")", [&] {
        return build_vocab_file(side_cfg.corpus_path, cbow_cfg.min_count, cbow_cfg.max_vocab);
    });
    EmbeddingMatrix cbow_emb = stage("train_cbow (" + sn + ")", [&] {
        cbow_cfg.validate();
        return train_cbow_file(side_cfg.corpus_path, corpus_vocab, cbow_cfg);
    });
    SharedAnchorSet shared = stage("compute_shared (" + sn + ")", [&] {
        return compute_shared(corpus_vocab, art.source_vocab);
    });
    EmbeddingMatrix projected = stage("project (" + sn + ")", [&] {
        side_cfg.projection.validate();
        return project(cbow_emb, source_emb, side_cfg.projection, &shared);
    });

    // The adapted vocabulary keeps the special tokens in front so the model's
    // reserved indices stay dense and predictable.
    std::unordered_set<std::string> special_set(specials.begin(), specials.end());
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freqs;
    std::vector<std::size_t> special_idx;
    tokens.reserve(specials.size() + corpus_vocab.size());
    for (const std::string& name : specials) {
        special_idx.push_back(tokens.size());
        tokens.push_back(name);
        freqs.push_back(0);
    }
    for (std::size_t i = 0; i < corpus_vocab.size(); ++i) {
        const std::string& tok = corpus_vocab.token(i);
        if (special_set.count(tok)) continue;
        tokens.push_back(tok);
        freqs.push_back(corpus_vocab.frequency(i));
    }
    art.adapted_vocab = Vocabulary(std::move(tokens), std::move(freqs), std::move(special_idx));

    art.adapted_rows = Mat(static_cast<Eigen::Index>(art.adapted_vocab.size()),
                           static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < art.adapted_vocab.size(); ++i) {
        const std::string& tok = art.adapted_vocab.token(i);
        if (art.adapted_vocab.is_special(i)) {
            std::size_t si = art.source_vocab.index_of(tok).value();
            art.adapted_rows.row(static_cast<Eigen::Index>(i)) =
                source_emb.rows().row(static_cast<Eigen::Index>(si));
        } else {
            std::size_t pi = corpus_vocab.index_of(tok).value();
            art.adapted_rows.row(static_cast<Eigen::Index>(i)) =
                projected.rows().row(static_cast<Eigen::Index>(pi));
        }
    }

    stage("reports (" + sn + ")", [&] {
        art.shift = semantic_shift_report(shared, source_emb, projected);
        std::ifstream corpus(side_cfg.corpus_path, std::ios::binary);
        if (!corpus) throw IoError("cannot open corpus " + side_cfg.corpus_path);
        art.overlap = vocab_overlap_stats(art.source_vocab, art.adapted_vocab, &corpus);
    });

    art.summary.corpus_vocab_size = corpus_vocab.size();
    art.summary.adapted_vocab_size = art.adapted_vocab.size();
    art.summary.shared_anchor_count = shared.size();
    return art;
}

void write_side_files(const SideArtifacts& art, Side side, const fs::path& dir,
                      std::vector<std::string>& artifacts) {
    const std::string sn = to_string(side);
    std::string vocab_name = sn + ".vocab";
    std::string vec_name = sn + "_projected.vec";
    save_vocab(art.adapted_vocab, (dir / vocab_name).string());
    save_embeddings(EmbeddingMatrix(art.adapted_vocab, art.adapted_rows),
                    (dir / vec_name).string());
    artifacts.push_back(vocab_name);
    artifacts.push_back(vec_name);

    auto emit = [&](const std::string& base, auto&& writer) {
        std::string txt = base + ".txt";
        std::string jsonl = base + ".jsonl";
        std::ofstream t(dir / txt, std::ios::binary);
        std::ofstream j(dir / jsonl, std::ios::binary);
        if (!t || !j) throw IoError("cannot create report files in " + dir.string());
        writer(t, j);
        if (!t.good() || !j.good()) throw IoError("failed writing report files in " + dir.string());
        artifacts.push_back(txt);
        artifacts.push_back(jsonl);
    };
    emit(sn + "_shift",
         [&](std::ostream& t, std::ostream& j) { write_shift_report(art.shift, t, j); });
    emit(sn + "_overlap",
         [&](std::ostream& t, std::ostream& j) { write_overlap_stats(art.overlap, t, j); });
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
    stage("config", [&] {
        if (config.checkpoint_path.empty()) throw DataError("checkpoint path is empty");
        if (config.output_dir.empty()) throw DataError("output directory is empty");
        if (config.encoder.corpus_path.empty()) throw DataError("encoder corpus path is empty");
        if (config.decoder.corpus_path.empty()) throw DataError("decoder corpus path is empty");
    });

    fs::path out_dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    fs::path staging = out_dir / "staging";
    fs::remove_all(staging, ec);
    fs::create_directories(staging, ec);
    if (ec) throw IoError("cannot create staging directory " + staging.string() + ": " + ec.message());

    PipelineResult result;
    result.output_dir = out_dir.string();
    try {
        Checkpoint cp = stage("load_checkpoint", [&] {
            return read_checkpoint(config.checkpoint_path);
        });
        std::vector<std::string> specials = dedupe(
            config.special_tokens.empty() ? cp.manifest().special_tokens : config.special_tokens);

        SideArtifacts enc = process_side(cp, Side::kEncoder, config.encoder,
                                         config.checkpoint_path, specials, config.seed);
        SideArtifacts dec = process_side(cp, Side::kDecoder, config.decoder,
                                         config.checkpoint_path, specials, config.seed + 1);
        result.encoder = enc.summary;
        result.decoder = dec.summary;

        Checkpoint with_enc = stage("swap_embeddings (encoder)", [&] {
            return swap_embeddings(cp, Side::kEncoder, enc.adapted_vocab,
                                   EmbeddingMatrix(enc.adapted_vocab, enc.adapted_rows),
                                   enc.source_vocab, "encoder.vocab");
        });
        Checkpoint adapted = stage("swap_embeddings (decoder)", [&] {
            return swap_embeddings(with_enc, Side::kDecoder, dec.adapted_vocab,
                                   EmbeddingMatrix(dec.adapted_vocab, dec.adapted_rows),
                                   dec.source_vocab, "decoder.vocab");
        });

        ValidationReport vr = validate_checkpoint(adapted);
        if (!vr.passed)
            throw DataError("stage validate: adapted checkpoint failed validation: " +
                            join(vr.violations, "; "));

        stage("write_outputs", [&] {
            write_checkpoint(adapted, (staging / "adapted.ckpt").string());
            result.artifacts.push_back("adapted.ckpt");
            write_side_files(enc, Side::kEncoder, staging, result.artifacts);
            write_side_files(dec, Side::kDecoder, staging, result.artifacts);

            nlohmann::ordered_json man;
            nlohmann::ordered_json cfg;
            cfg["checkpoint"] = config.checkpoint_path;
            cfg["output_dir"] = config.output_dir;
            cfg["seed"] = config.seed;
            cfg["special_tokens"] = specials;
            auto side_json = [](const SideConfig& side_cfg, const SideArtifacts& art) {
                nlohmann::ordered_json s;
                s["source_vocab"] = art.source_vocab_path;
                s["corpus"] = side_cfg.corpus_path;
                s["cbow"] = cbow_json(art.cbow_used);
                s["projection"] = projection_json(side_cfg.projection);
                return s;
            };
            cfg["encoder"] = side_json(config.encoder, enc);
            cfg["decoder"] = side_json(config.decoder, dec);
            man["config"] = cfg;
            man["seed"] = config.seed;

            nlohmann::ordered_json inputs;
            inputs["checkpoint"] = to_hex(hash_file(config.checkpoint_path));
            inputs["encoder_source_vocab"] = to_hex(hash_file(enc.source_vocab_path));
            inputs["encoder_corpus"] = to_hex(hash_file(config.encoder.corpus_path));
            inputs["decoder_source_vocab"] = to_hex(hash_file(dec.source_vocab_path));
            inputs["decoder_corpus"] = to_hex(hash_file(config.decoder.corpus_path));
            man["inputs"] = inputs;

            nlohmann::ordered_json outputs;
            for (const std::string& name : result.artifacts)
                outputs[name] = to_hex(hash_file((staging / name).string()));
            man["outputs"] = outputs;

            std::ofstream mf(staging / "run_manifest.json", std::ios::binary);
            if (!mf) throw IoError("cannot create run manifest");
            mf << man.dump(2) << "\n";
            if (!mf.good()) throw IoError("failed writing run manifest");
            result.artifacts.push_back("run_manifest.json");
        });

        for (const std::string& name : result.artifacts) {
            fs::rename(staging / name, out_dir / name, ec);
            if (ec)
                throw IoError("cannot move " + name + " into " + out_dir.string() + ": " +
                              ec.message());
        }
        fs::remove_all(staging, ec);
    } catch (...) {
        // Keep whatever was produced, but clearly separated from good output.
        std::error_code qec;
        fs::path quarantine = out_dir / "quarantine";
        fs::remove_all(quarantine, qec);
        fs::rename(staging, quarantine, qec);
        throw;
    }
    return result;
}

}  // namespace vocadapt
