#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vocadapt/analysis.hpp"
#include "vocadapt/cbow.hpp"
#include "vocadapt/checkpoint.hpp"
#include "vocadapt/embedding.hpp"
#include "vocadapt/errors.hpp"
#include "vocadapt/pipeline.hpp"
#include "vocadapt/projection.hpp"
#include "vocadapt/vocab.hpp"

namespace {

using namespace vocadapt;

// Marks only those special names actually present; standalone embedding files
// carry no special markers, so absence is not an error here.
Vocabulary mark_present_specials(const Vocabulary& vocab, const std::vector<std::string>& names) {
    std::vector<std::string> present;
    for (const std::string& n : names)
        if (vocab.contains(n)) present.push_back(n);
    return vocab.with_specials(present);
}

std::vector<std::string> load_token_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open token list " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        if (ls >> tok) tokens.push_back(tok);
    }
    return tokens;
}

// Streams a report to stdout and, when a path was given, its JSONL twin to
// that file.
class JsonlSink {
public:
    explicit JsonlSink(const std::string& path) {
        if (path.empty()) return;
        file_.open(path, std::ios::binary);
        if (!file_) throw IoError("cannot create " + path);
        enabled_ = true;
    }

    std::ostream& stream() { return enabled_ ? static_cast<std::ostream&>(file_) : discard_; }

    void finish(const std::string& path) {
        if (enabled_ && !file_.good()) throw IoError("failed writing " + path);
    }

private:
    bool enabled_ = false;
    std::ofstream file_;
    std::ostringstream discard_;
};

std::string resolve_manifest_vocab(const Checkpoint& cp, Side side,
                                   const std::string& checkpoint_path) {
    const std::string& ref = cp.role(side).vocab_file;
    if (ref.empty())
        throw DataError("checkpoint manifest carries no vocabulary reference for the " +
                        to_string(side) + "; pass --source_vocab");
    std::filesystem::path p(ref);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(checkpoint_path).parent_path() / p).string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "vocadapt: induce in-domain embeddings, project them into a pre-trained "
        "translation model's embedding space, and swap them into its checkpoint."};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file; flags take precedence");

    // ---- build-vocab ----
    struct {
        std::string corpus, output;
        std::uint64_t min_count = 1;
        std::size_t max_vocab = 16000;
    } bv;
    CLI::App* bv_cmd = app.add_subcommand("build-vocab", "Count corpus tokens into a vocabulary");
    bv_cmd->add_option("--corpus", bv.corpus, "Whitespace-tokenized text corpus")->required();
    bv_cmd->add_option("--output", bv.output, "Vocabulary file to write")->required();
    bv_cmd->add_option("--min_count", bv.min_count, "Minimum token frequency");
    bv_cmd->add_option("--max_vocab", bv.max_vocab, "Keep at most this many tokens");
    bv_cmd->callback([&] {
        Vocabulary vocab = build_vocab_file(bv.corpus, bv.min_count, bv.max_vocab);
        save_vocab(vocab, bv.output);
        std::cout << "wrote " << vocab.size() << " tokens to " << bv.output << "\n";
    });

    // ---- train-cbow ----
    struct {
        std::string corpus, vocab, output;
        CbowConfig cfg;
    } tc;
    CLI::App* tc_cmd = app.add_subcommand("train-cbow", "Train CBOW embeddings on a corpus");
    tc_cmd->add_option("--corpus", tc.corpus, "Whitespace-tokenized text corpus")->required();
    tc_cmd->add_option("--vocab", tc.vocab, "Vocabulary file (default: built from the corpus)");
    tc_cmd->add_option("--output", tc.output, "Embedding file to write")->required();
    tc_cmd->add_option("--dim", tc.cfg.dim, "Embedding dimension");
    tc_cmd->add_option("--window", tc.cfg.window, "Context window radius");
    tc_cmd->add_option("--negatives", tc.cfg.negatives, "Negative samples per prediction");
    tc_cmd->add_option("--epochs", tc.cfg.epochs, "Training epochs");
    tc_cmd->add_option("--initial_lr", tc.cfg.initial_lr, "Initial learning rate");
    tc_cmd->add_option("--min_count", tc.cfg.min_count, "Minimum token frequency");
    tc_cmd->add_option("--max_vocab", tc.cfg.max_vocab, "Vocabulary size cap");
    tc_cmd->add_option("--seed", tc.cfg.seed, "RNG seed");
    tc_cmd->add_option("--subsample_threshold", tc.cfg.subsample_threshold,
                       "Frequent-token subsampling threshold; 0 disables");
    tc_cmd->add_option("--threads", tc.cfg.threads,
                       "Worker threads; more than 1 relaxes bit-determinism");
    tc_cmd->callback([&] {
        Vocabulary vocab = tc.vocab.empty()
                               ? build_vocab_file(tc.corpus, tc.cfg.min_count, tc.cfg.max_vocab)
                               : load_vocab(tc.vocab);
        EmbeddingMatrix emb = train_cbow_file(tc.corpus, vocab, tc.cfg);
        save_embeddings(emb, tc.output);
        std::cout << "wrote " << emb.size() << " x " << emb.dim() << " embeddings to " << tc.output
                  << "\n";
    });

    // ---- project ----
    struct {
        std::string target, source, output, method = "llm", anchors;
        std::vector<std::string> specials;
        ProjectionConfig cfg;
    } pj;
    CLI::App* pj_cmd =
        app.add_subcommand("project", "Project target-domain embeddings into the source space");
    pj_cmd->add_option("--target", pj.target, "Target-domain embedding file")->required();
    pj_cmd->add_option("--source", pj.source, "Pre-trained source embedding file")->required();
    pj_cmd->add_option("--output", pj.output, "Projected embedding file to write")->required();
    pj_cmd->add_option("--method", pj.method, "Projection method")
        ->check(CLI::IsMember({"linear", "llm", "cbow-as-is"}));
    pj_cmd->add_option("--k", pj.cfg.k, "Neighbor count for the llm method");
    pj_cmd->add_flag("--normalize_anchors", pj.cfg.normalize_anchors,
                     "Length-normalize anchors before the linear fit");
    pj_cmd->add_option("--gram_epsilon", pj.cfg.gram_epsilon,
                       "Gram regularization; default 1e-3 when k exceeds the dimension, else 0");
    pj_cmd->add_option("--anchor_top_n", pj.cfg.anchor_top_n,
                       "Linear fit: keep only the n most frequent anchors; 0 keeps all");
    pj_cmd->add_option("--threads", pj.cfg.threads, "Per-token projection threads");
    pj_cmd->add_option("--anchors", pj.anchors,
                       "File with one anchor token per line, overriding the computed intersection");
    pj_cmd->add_option("--special_tokens", pj.specials, "Tokens excluded from anchor computation")
        ->delimiter(',');
    pj_cmd->callback([&] {
        EmbeddingMatrix target_raw = load_embeddings(pj.target);
        EmbeddingMatrix source_raw = load_embeddings(pj.source);
        EmbeddingMatrix target(mark_present_specials(target_raw.vocab(), pj.specials),
                               target_raw.rows());
        EmbeddingMatrix source(mark_present_specials(source_raw.vocab(), pj.specials),
                               source_raw.rows());
        pj.cfg.method = parse_method(pj.method);
        std::optional<SharedAnchorSet> shared;
        if (!pj.anchors.empty())
            shared = anchors_from_tokens(load_token_list(pj.anchors), target.vocab(),
                                         source.vocab());
        EmbeddingMatrix out =
            project(target, source, pj.cfg, shared ? &*shared : nullptr);
        save_embeddings(out, pj.output);
        std::cout << "wrote " << out.size() << " x " << out.dim() << " projected embeddings to "
                  << pj.output << "\n";
    });

    // ---- swap ----
    struct {
        std::string checkpoint, side, embeddings, vocab, source_vocab, vocab_ref, output;
    } sw;
    CLI::App* sw_cmd =
        app.add_subcommand("swap", "Replace one side's vocabulary and embedding rows");
    sw_cmd->add_option("--checkpoint", sw.checkpoint, "Checkpoint to adapt")->required();
    sw_cmd->add_option("--side", sw.side, "encoder or decoder")
        ->required()
        ->check(CLI::IsMember({"encoder", "decoder"}));
    sw_cmd->add_option("--embeddings", sw.embeddings, "New embedding file")->required();
    sw_cmd->add_option("--vocab", sw.vocab,
                       "New vocabulary file; must list the embedding file's tokens");
    sw_cmd->add_option("--source_vocab", sw.source_vocab,
                       "Old vocabulary file; default: the manifest's reference");
    sw_cmd->add_option("--vocab_ref", sw.vocab_ref,
                       "Vocabulary reference recorded in the new manifest");
    sw_cmd->add_option("--output", sw.output, "Adapted checkpoint to write")->required();
    sw_cmd->callback([&] {
        Checkpoint cp = read_checkpoint(sw.checkpoint);
        Side side = parse_side(sw.side);
        EmbeddingMatrix emb = load_embeddings(sw.embeddings);
        Vocabulary new_vocab = sw.vocab.empty() ? emb.vocab() : load_vocab(sw.vocab);
        std::string source_path = sw.source_vocab.empty()
                                      ? resolve_manifest_vocab(cp, side, sw.checkpoint)
                                      : sw.source_vocab;
        Vocabulary source_vocab =
            load_vocab(source_path).with_specials(cp.manifest().special_tokens);
        std::string ref = sw.vocab_ref;
        if (ref.empty())
            ref = std::filesystem::path(sw.vocab.empty() ? sw.embeddings : sw.vocab)
                      .filename()
                      .string();
        Checkpoint adapted = swap_embeddings(cp, side, new_vocab, emb, source_vocab, ref);
        write_checkpoint(adapted, sw.output);
        ValidationReport vr = validate_checkpoint(adapted);
        if (!vr.passed) {
            std::string msg = "adapted checkpoint failed validation:";
            for (const std::string& v : vr.violations) msg += "\n  " + v;
            throw DataError(msg);
        }
        std::cout << "wrote adapted checkpoint to " << sw.output << "\n";
    });

    // ---- analyze ----
    CLI::App* an_cmd = app.add_subcommand("analyze", "Inspect embedding spaces");
    an_cmd->require_subcommand(1);

    struct {
        std::string embeddings, shared_with, jsonl;
        std::vector<std::string> tokens, specials;
        std::size_t top = 10;
    } nn;
    CLI::App* nn_cmd =
        an_cmd->add_subcommand("neighbors", "Nearest neighbors of one or more query tokens");
    nn_cmd->add_option("--embeddings", nn.embeddings, "Embedding file")->required();
    nn_cmd->add_option("--token", nn.tokens, "Query token; repeatable")->required();
    nn_cmd->add_option("--top", nn.top, "Neighbors per query");
    nn_cmd->add_option("--shared_with", nn.shared_with,
                       "Vocabulary file; restrict candidates to tokens shared with it");
    nn_cmd->add_option("--special_tokens", nn.specials, "Tokens excluded from the shared set")
        ->delimiter(',');
    nn_cmd->add_option("--jsonl", nn.jsonl, "Also write JSONL records to this file");
    nn_cmd->callback([&] {
        EmbeddingMatrix emb = load_embeddings(nn.embeddings);
        std::optional<SharedAnchorSet> shared;
        if (!nn.shared_with.empty()) {
            Vocabulary other = mark_present_specials(load_vocab(nn.shared_with), nn.specials);
            shared = compute_shared(mark_present_specials(emb.vocab(), nn.specials), other);
        }
        JsonlSink sink(nn.jsonl);
        for (const std::string& tok : nn.tokens) {
            NeighborReport rep =
                nearest_neighbors_report(tok, emb, shared ? &*shared : nullptr, nn.top);
            write_neighbor_report(rep, std::cout, sink.stream());
        }
        sink.finish(nn.jsonl);
    });

    struct {
        std::string source, target, jsonl;
        std::vector<std::string> specials;
    } sh;
    CLI::App* sh_cmd = an_cmd->add_subcommand(
        "shift", "Rank shared tokens by how far projection moved them");
    sh_cmd->add_option("--source", sh.source, "Pre-trained source embedding file")->required();
    sh_cmd->add_option("--target", sh.target, "Projected target embedding file")->required();
    sh_cmd->add_option("--special_tokens", sh.specials, "Tokens excluded from the shared set")
        ->delimiter(',');
    sh_cmd->add_option("--jsonl", sh.jsonl, "Also write JSONL records to this file");
    sh_cmd->callback([&] {
        EmbeddingMatrix source = load_embeddings(sh.source);
        EmbeddingMatrix target = load_embeddings(sh.target);
        SharedAnchorSet shared =
            compute_shared(mark_present_specials(target.vocab(), sh.specials),
                           mark_present_specials(source.vocab(), sh.specials));
        ShiftReport rep = semantic_shift_report(shared, source, target);
        JsonlSink sink(sh.jsonl);
        write_shift_report(rep, std::cout, sink.stream());
        sink.finish(sh.jsonl);
    });

    // ---- stats ----
    struct {
        std::string vocab_a, vocab_b, corpus_b, jsonl;
    } st;
    CLI::App* st_cmd = app.add_subcommand("stats", "Vocabulary overlap statistics");
    st_cmd->add_option("--vocab_a", st.vocab_a, "First vocabulary file")->required();
    st_cmd->add_option("--vocab_b", st.vocab_b, "Second vocabulary file")->required();
    st_cmd->add_option("--corpus_b", st.corpus_b,
                       "Corpus whose distinct tokens are checked for coverage by vocab A");
    st_cmd->add_option("--jsonl", st.jsonl, "Also write a JSON record to this file");
    st_cmd->callback([&] {
        Vocabulary a = load_vocab(st.vocab_a);
        Vocabulary b = load_vocab(st.vocab_b);
        OverlapStats stats;
        if (st.corpus_b.empty()) {
            stats = vocab_overlap_stats(a, b);
        } else {
            std::ifstream corpus(st.corpus_b, std::ios::binary);
            if (!corpus) throw IoError("cannot open corpus " + st.corpus_b);
            stats = vocab_overlap_stats(a, b, &corpus);
        }
        JsonlSink sink(st.jsonl);
        write_overlap_stats(stats, std::cout, sink.stream());
        sink.finish(st.jsonl);
    });

    // ---- pipeline ----
    struct {
        PipelineConfig cfg;
        std::string method = "llm";
        std::size_t threads = 1;
        CbowConfig cbow;
        ProjectionConfig proj;
    } pl;
    pl.cbow.dim = 0;  // adopt the checkpoint width unless overridden
    CLI::App* pl_cmd = app.add_subcommand(
        "pipeline", "Full adaptation: vocab, CBOW, projection, checkpoint swap, reports");
    pl_cmd->add_option("--checkpoint", pl.cfg.checkpoint_path, "Pre-trained checkpoint")
        ->required();
    pl_cmd->add_option("--output_dir", pl.cfg.output_dir, "Directory for all artifacts")
        ->required();
    pl_cmd->add_option("--encoder_corpus", pl.cfg.encoder.corpus_path,
                       "In-domain corpus, encoder language")
        ->required();
    pl_cmd->add_option("--decoder_corpus", pl.cfg.decoder.corpus_path,
                       "In-domain corpus, decoder language")
        ->required();
    pl_cmd->add_option("--encoder_vocab", pl.cfg.encoder.source_vocab_path,
                       "Encoder-side source vocabulary; default: the manifest's reference");
    pl_cmd->add_option("--decoder_vocab", pl.cfg.decoder.source_vocab_path,
                       "Decoder-side source vocabulary; default: the manifest's reference");
    pl_cmd->add_option("--special_tokens", pl.cfg.special_tokens,
                       "Override the manifest's special-token list")
        ->delimiter(',');
    pl_cmd->add_option("--seed", pl.cfg.seed, "Master seed; the decoder side uses seed + 1");
    pl_cmd->add_option("--dim", pl.cbow.dim, "CBOW dimension; 0 adopts the checkpoint width");
    pl_cmd->add_option("--window", pl.cbow.window, "Context window radius");
    pl_cmd->add_option("--negatives", pl.cbow.negatives, "Negative samples per prediction");
    pl_cmd->add_option("--epochs", pl.cbow.epochs, "Training epochs");
    pl_cmd->add_option("--initial_lr", pl.cbow.initial_lr, "Initial learning rate");
    pl_cmd->add_option("--min_count", pl.cbow.min_count, "Minimum token frequency");
    pl_cmd->add_option("--max_vocab", pl.cbow.max_vocab, "Vocabulary size cap");
    pl_cmd->add_option("--subsample_threshold", pl.cbow.subsample_threshold,
                       "Frequent-token subsampling threshold; 0 disables");
    pl_cmd->add_option("--method", pl.method, "Projection method")
        ->check(CLI::IsMember({"linear", "llm", "cbow-as-is"}));
    pl_cmd->add_option("--k", pl.proj.k, "Neighbor count for the llm method");
    pl_cmd->add_flag("--normalize_anchors", pl.proj.normalize_anchors,
                     "Length-normalize anchors before the linear fit");
    pl_cmd->add_option("--gram_epsilon", pl.proj.gram_epsilon,
                       "Gram regularization; default 1e-3 when k exceeds the dimension, else 0");
    pl_cmd->add_option("--anchor_top_n", pl.proj.anchor_top_n,
                       "Linear fit: keep only the n most frequent anchors; 0 keeps all");
    pl_cmd->add_option("--threads", pl.threads,
                       "Worker threads for CBOW and projection; more than 1 relaxes "
                       "bit-determinism");
    pl_cmd->callback([&] {
        pl.proj.method = parse_method(pl.method);
        pl.cbow.threads = pl.threads;
        pl.proj.threads = pl.threads;
        pl.cfg.encoder.cbow = pl.cbow;
        pl.cfg.decoder.cbow = pl.cbow;
        pl.cfg.encoder.projection = pl.proj;
        pl.cfg.decoder.projection = pl.proj;
        PipelineResult res = run_pipeline(pl.cfg);
        std::cout << "adapted checkpoint written to " << res.output_dir << "/adapted.ckpt\n";
        auto line = [](const char* name, const SideSummary& s) {
            std::cout << name << ": corpus vocab " << s.corpus_vocab_size << ", adapted vocab "
                      << s.adapted_vocab_size << ", shared anchors " << s.shared_anchor_count
                      << "\n";
        };
        line("encoder", res.encoder);
        line("decoder", res.decoder);
        std::cout << res.artifacts.size() << " artifacts in " << res.output_dir << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
