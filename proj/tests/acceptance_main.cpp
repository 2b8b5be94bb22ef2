// Acceptance gate: one [PASS]/[FAIL] line per criterion, nonzero exit when
// any criterion fails. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/testutil.hpp"
#include "vocadapt/analysis.hpp"
#include "vocadapt/cbow.hpp"
#include "vocadapt/checkpoint.hpp"
#include "vocadapt/embedding.hpp"
#include "vocadapt/hash.hpp"
#include "vocadapt/projection.hpp"
#include "vocadapt/vocab.hpp"

using namespace vocadapt;

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
    std::vector<std::string> tokens(n);
    for (std::size_t i = 0; i < n; ++i) tokens[i] = prefix + std::to_string(i);
    return tokens;
}

Mat random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = oracle::unit(gen) - 0.5;
    return m;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criterion bodies; each returns a one-line detail and throws on failure

std::string weight_solver_vs_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_gap = 0.0, worst_sum = 0.0;
    for (int i = 0; i < 25; ++i) {
        std::mt19937_64 gen(1000 + static_cast<std::uint64_t>(i));
        Eigen::RowVectorXd q(2), n1(2), n2(2);
        for (auto* v : {&q, &n1, &n2})
            for (Eigen::Index c = 0; c < 2; ++c) (*v)(c) = oracle::unit(gen) * 2.0 - 1.0;
        Mat neighbors(2, 2);
        neighbors.row(0) = n1;
        neighbors.row(1) = n2;
        std::vector<double> alpha = solve_local_weights(q, neighbors, 0.0);
        double sum = alpha[0] + alpha[1];
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        double obj = oracle::reconstruction_objective(q, neighbors, alpha);
        double best = oracle::grid_best_objective(q, n1, n2);
        worst_gap = std::max(worst_gap, obj - best);
        require(std::abs(sum - 1.0) <= 1e-9,
                "weights sum to " + std::to_string(sum) + " on instance " + std::to_string(i));
        require(obj <= best + 1e-6, "solver objective " + std::to_string(obj) +
                                        " exceeds oracle " + std::to_string(best) +
                                        " on instance " + std::to_string(i));
    }
    const double secs = elapsed_s(t0);
    require(secs < 5.0, "took " + fmt("%.2f", secs) + " s, limit 5");
    return "25 instances, max objective gap " + fmt("%.2e", worst_gap) + ", max |sum-1| " +
           fmt("%.2e", worst_sum) + ", " + fmt("%.2f", secs) + " s";
}

std::string orthogonal_fit_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = 8;
    Vocabulary vocab(numbered("a", 100));
    Mat target_rows = random_rows(100, d, 4242);
    Eigen::MatrixXd r = oracle::random_orthogonal(d, 99);
    Mat source_rows = target_rows * r;
    EmbeddingMatrix target(vocab, target_rows), source(vocab, source_rows);
    SharedAnchorSet shared = compute_shared(vocab, vocab);
    ProjectionConfig cfg;
    cfg.method = ProjectionMethod::kLinear;
    OrthogonalMap map = fit_orthogonal(shared, target, source, cfg);
    const double recovery = (map.matrix() - r).norm();
    const double ortho = (map.matrix().transpose() * map.matrix() -
                          Mat::Identity(d, d)).norm();
    require(recovery <= 1e-5, "planted-rotation error " + fmt("%.2e", recovery));
    require(ortho <= 1e-6, "orthogonality defect " + fmt("%.2e", ortho));
    const double secs = elapsed_s(t0);
    require(secs < 1.0, "took " + fmt("%.2f", secs) + " s, limit 1");
    return "recovery error " + fmt("%.2e", recovery) + ", orthogonality defect " +
           fmt("%.2e", ortho) + ", " + fmt("%.2f", secs) + " s";
}

std::string rotation_equivariance() {
    const int d = 6;
    const std::size_t n_shared = 30, n_free = 15;
    std::vector<std::string> target_tokens = numbered("s", n_shared);
    std::vector<std::string> free_tokens = numbered("f", n_free);
    target_tokens.insert(target_tokens.end(), free_tokens.begin(), free_tokens.end());
    Vocabulary target_vocab(target_tokens), source_vocab(numbered("s", n_shared));

    // Ground truth lives in the source space; the target space is that same
    // geometry rotated.
    Mat truth = random_rows(n_shared + n_free, d, 777);
    Eigen::MatrixXd q = oracle::random_orthogonal(d, 123);
    Mat target_rows = truth * q;
    EmbeddingMatrix target(target_vocab, target_rows);
    EmbeddingMatrix source(source_vocab, Mat(truth.topRows(n_shared)));

    ProjectionConfig cfg;
    cfg.k = d + 2;
    cfg.gram_epsilon = 1e-9;
    EmbeddingMatrix projected = llm_project(target, source, compute_shared(target_vocab, source_vocab), cfg);

    double min_cos = 1.0, max_err = 0.0;
    for (std::size_t i = n_shared; i < n_shared + n_free; ++i) {
        Eigen::RowVectorXd expect = truth.row(static_cast<Eigen::Index>(i));
        Eigen::RowVectorXd got = projected.row(i);
        min_cos = std::min(min_cos, cosine_similarity(got, expect));
        max_err = std::max(max_err, (got - expect).cwiseAbs().maxCoeff());
    }
    require(min_cos >= 0.999, "worst cosine to ground truth " + fmt("%.6f", min_cos));
    require(max_err <= 1e-4, "worst per-row component error " + fmt("%.2e", max_err));
    return std::to_string(n_free) + " held-out tokens, min cosine " + fmt("%.6f", min_cos) +
           ", max component error " + fmt("%.2e", max_err);
}

std::string bit_exact_recomputation() {
    const int d = 5;
    const std::size_t n_shared = 20, n_free = 10;
    std::vector<std::string> target_tokens = numbered("s", n_shared);
    std::vector<std::string> free_tokens = numbered("f", n_free);
    target_tokens.insert(target_tokens.end(), free_tokens.begin(), free_tokens.end());
    Vocabulary target_vocab(target_tokens), source_vocab(numbered("s", n_shared));
    EmbeddingMatrix target(target_vocab, random_rows(n_shared + n_free, d, 31));
    EmbeddingMatrix source(source_vocab, random_rows(n_shared, d, 32));
    SharedAnchorSet shared = compute_shared(target_vocab, source_vocab);

    ProjectionConfig cfg;
    cfg.k = 4;
    cfg.gram_epsilon = 1e-9;
    LlmProjection proj = llm_project_detailed(target, source, shared, cfg);
    require(proj.reconstructions.size() == target_vocab.size(), "one reconstruction per token");

    std::size_t rows_checked = 0;
    for (const LocalReconstruction& rec : proj.reconstructions) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
        for (std::size_t j = 0; j < rec.anchor_entries.size(); ++j) {
            const auto src = source.row(shared.entries()[rec.anchor_entries[j]].source_index);
            for (Eigen::Index c = 0; c < d; ++c) acc(c) += rec.weights[j] * src(c);
        }
        for (Eigen::Index c = 0; c < d; ++c)
            require(acc(c) == proj.embeddings.row(rec.token_index)(c),
                    "row " + std::to_string(rec.token_index) + " differs at column " +
                        std::to_string(c));
        ++rows_checked;
    }
    return std::to_string(rows_checked) + " rows recomputed bit-exactly from stored weights";
}

std::string semantic_shift_behavior() {
    // Same eleven tokens in both spaces; only "bank" changes neighborhood:
    // river-like in the target domain, money-like in the source domain.
    // The stable clusters are tight enough that every stable token's nearest
    // anchors are stable too, so bank's moved source row only affects bank.
    Vocabulary vocab({"bank", "river", "water", "stream", "flow", "lake", "creek",
                      "money", "coin", "cash", "gold"});
    Mat target_rows(11, 3), source_rows(11, 3);
    target_rows << 0.95, 0.30, 0.10,  // bank, river-like here
        1.00, 0.10, 0.05,             // river
        0.98, 0.12, 0.07,             // water
        1.02, 0.08, 0.03,             // stream
        0.99, 0.09, 0.06,             // flow
        1.01, 0.12, 0.04,             // lake
        0.97, 0.10, 0.05,             // creek
        0.10, 1.00, 0.05,             // money
        0.12, 0.98, 0.07,             // coin
        0.08, 1.02, 0.03,             // cash
        0.11, 0.99, 0.04;             // gold
    source_rows = target_rows;
    source_rows.row(0) << 0.30, 0.95, 0.10;  // bank, money-like here
    EmbeddingMatrix target(vocab, target_rows), source(vocab, source_rows);
    SharedAnchorSet shared = compute_shared(vocab, vocab);

    ProjectionConfig cfg;
    cfg.method = ProjectionMethod::kLlm;
    cfg.k = 3;
    cfg.gram_epsilon = 1e-9;
    EmbeddingMatrix projected = project(target, source, cfg, &shared);
    ShiftReport moved = semantic_shift_report(shared, source, projected);
    double bank_shift = -1.0;
    for (const ShiftEntry& e : moved.ranked)
        if (e.token == "bank") bank_shift = e.shift;
    require(bank_shift > 0.0, "bank shift " + fmt("%.4f", bank_shift) + " not positive");
    require(moved.ranked.front().token == "bank", "bank is not the top-shifted token");
    require(moved.ranked[1].shift < 0.1 * bank_shift,
            "runner-up shift " + fmt("%.4f", moved.ranked[1].shift) +
                " is not well below bank's " + fmt("%.4f", bank_shift));

    ProjectionConfig as_is;
    as_is.method = ProjectionMethod::kCbowAsIs;
    EmbeddingMatrix identity = project(source, source, as_is, &shared);
    ShiftReport still = semantic_shift_report(shared, source, identity);
    for (const ShiftEntry& e : still.ranked)
        require(e.shift == 0.0, "identity projection shifted " + e.token + " by " +
                                    fmt("%.2e", e.shift));
    return "cross-domain token shift " + fmt("%.4f", bank_shift) +
           ", identity projection shift exactly 0 for all tokens";
}

std::string cbow_determinism_and_separation() {
    const auto t0 = std::chrono::steady_clock::now();
    // x/y/z rotate through one slot between cluster-A context words, p/q/r
    // between cluster-B ones; input vectors align for tokens sharing contexts.
    std::string corpus;
    corpus.reserve(5000 * 6 * 12);
    for (int i = 0; i < 5000; ++i) {
        for (const char* t : {"x", "y", "z"}) corpus += std::string("ca1 ") + t + " ca2\n";
        for (const char* t : {"p", "q", "r"}) corpus += std::string("cb1 ") + t + " cb2\n";
    }

    CbowConfig cfg;
    cfg.dim = 16;
    cfg.window = 2;
    cfg.epochs = 3;
    cfg.seed = 0;
    cfg.subsample_threshold = 0.0;  // every token is frequent in this corpus

    std::istringstream vs(corpus);
    Vocabulary vocab = build_vocab(vs, 1, 16000);
    std::istringstream c1(corpus), c2(corpus);
    EmbeddingMatrix first = train_cbow(c1, vocab, cfg);
    EmbeddingMatrix second = train_cbow(c2, vocab, cfg);
    require((first.rows().array() == second.rows().array()).all(),
            "fixed-seed retraining is not bit-identical");

    auto mean_cos = [&](const std::vector<std::pair<const char*, const char*>>& pairs) {
        double s = 0.0;
        for (const auto& [a, b] : pairs)
            s += cosine_similarity(first.row(*vocab.index_of(a)), first.row(*vocab.index_of(b)));
        return s / static_cast<double>(pairs.size());
    };
    const double within = mean_cos({{"x", "y"}, {"x", "z"}, {"y", "z"},
                                    {"p", "q"}, {"p", "r"}, {"q", "r"}});
    const double cross = mean_cos({{"x", "p"}, {"x", "q"}, {"x", "r"},
                                   {"y", "p"}, {"y", "q"}, {"y", "r"},
                                   {"z", "p"}, {"z", "q"}, {"z", "r"}});
    require(within > cross, "within-cluster cosine " + fmt("%.4f", within) +
                                " does not exceed cross-cluster " + fmt("%.4f", cross));
    const double secs = elapsed_s(t0);
    require(secs < 30.0, "took " + fmt("%.2f", secs) + " s, limit 30");
    return "bit-identical retrain; within-cluster cosine " + fmt("%.3f", within) +
           " vs cross-cluster " + fmt("%.3f", cross) + ", " + fmt("%.2f", secs) + " s";
}

std::string checkpoint_integrity() {
    testutil::TempDir tmp;
    CheckpointManifest m;
    m.encoder = {"enc.emb", "enc.vocab", 4};
    m.decoder = {"dec.emb", "dec.vocab", 5};
    m.tied_decoder = true;
    m.special_tokens = {"<pad>", "<unk>"};
    m.tensor_order = {"enc.emb", "body.weight", "dec.emb"};
    std::map<std::string, Tensor> tensors;
    auto fill = [](std::vector<std::size_t> shape, float start) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.resize(t.element_count());
        for (std::size_t i = 0; i < t.data.size(); ++i)
            t.data[i] = start + 0.25f * static_cast<float>(i);
        return t;
    };
    tensors["enc.emb"] = fill({4, 8}, 0.0f);
    tensors["body.weight"] = fill({3, 3}, -2.0f);
    tensors["dec.emb"] = fill({5, 8}, 50.0f);
    Checkpoint cp(m, tensors);

    Vocabulary source_vocab =
        Vocabulary({"<pad>", "<unk>", "eins", "zwei", "drei"}).with_specials({"<pad>", "<unk>"});
    Vocabulary new_vocab({"<pad>", "<unk>", "zwei", "vier", "acht", "neun"});
    Checkpoint adapted = swap_embeddings(
        cp, Side::kDecoder, new_vocab,
        EmbeddingMatrix(new_vocab, random_rows(6, 8, 55)), source_vocab, "adapted.vocab");

    // Serialize, reload, serialize again: the two files must match byte for byte.
    write_checkpoint(adapted, tmp.file("a1.ckpt"));
    Checkpoint reloaded = read_checkpoint(tmp.file("a1.ckpt"));
    write_checkpoint(reloaded, tmp.file("a2.ckpt"));
    require(testutil::read_file(tmp.file("a1.ckpt")) == testutil::read_file(tmp.file("a2.ckpt")),
            "serialize/deserialize/serialize is not byte-identical");

    require(adapted.tensor("body.weight").data == cp.tensor("body.weight").data &&
                adapted.tensor("enc.emb").data == cp.tensor("enc.emb").data,
            "a non-embedding tensor changed");
    std::size_t changed = 0;
    for (const auto& [name, before] : cp.tensors()) {
        const Tensor& after = adapted.tensor(name);
        if (before.shape != after.shape || before.data != after.data) ++changed;
    }
    require(changed == 1, std::to_string(changed) + " stored tensors changed, expected 1");
    require(adapted.decoder_output_projection() == &adapted.embedding_tensor(Side::kDecoder),
            "tied decoder no longer shares its output projection");
    ValidationReport vr = validate_checkpoint(reloaded);
    require(vr.passed, "validation failed: " +
                           (vr.violations.empty() ? std::string("?") : vr.violations.front()));
    return "byte-identical round trip, 1 tensor changed, validation passed";
}

std::string pipeline_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    testutil::TempDir tmp;
    const std::string data = testutil::data_dir().string();
    auto run = [&](const std::string& dir) {
        return testutil::run_cli("pipeline --checkpoint " + data + "/toy.ckpt --output_dir " +
                                 dir + " --encoder_corpus " + data +
                                 "/encoder_corpus.txt --decoder_corpus " + data +
                                 "/decoder_corpus.txt --method llm --k 10 --seed 1");
    };
    require(run(tmp.file("runA")) == 0, "first pipeline run did not exit 0");
    const double secs = elapsed_s(t0);
    require(secs < 60.0, "took " + fmt("%.2f", secs) + " s, limit 60");
    require(run(tmp.file("runB")) == 0, "second pipeline run did not exit 0");

    auto manifest = [&](const std::string& dir) {
        return nlohmann::json::parse(
            testutil::read_file((std::filesystem::path(dir) / "run_manifest.json").string()));
    };
    auto ma = manifest(tmp.file("runA")), mb = manifest(tmp.file("runB"));
    require(ma.at("outputs") == mb.at("outputs"), "output hashes differ between runs");
    require(ma.at("config").at("encoder").at("cbow").at("max_vocab") == 16000,
            "vocabulary cap default is not 16000");
    require(ma.at("config").at("encoder").at("projection").at("k") == 10,
            "neighbor count is not 10");
    require(hash_file(tmp.file("runA") + "/adapted.ckpt") ==
                hash_file(tmp.file("runB") + "/adapted.ckpt"),
            "adapted checkpoints differ between runs");
    return std::to_string(ma.at("outputs").size()) + " artifacts with identical hashes, " +
           fmt("%.2f", secs) + " s";
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::string (*body)();
    };
    const std::vector<Criterion> criteria{
        {1, "local weight solver matches the grid-search oracle", weight_solver_vs_oracle},
        {2, "orthogonal fit recovers a planted rotation", orthogonal_fit_recovery},
        {3, "locally linear projection is rotation-equivariant", rotation_equivariance},
        {4, "stored weights reproduce projected rows bit-exactly", bit_exact_recomputation},
        {5, "cross-domain token shifts, identity projection does not", semantic_shift_behavior},
        {6, "cbow is seed-deterministic and separates clusters", cbow_determinism_and_separation},
        {7, "checkpoint swap round trip is byte-identical", checkpoint_integrity},
        {8, "end-to-end pipeline is deterministic on bundled data", pipeline_determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            detail = c.body();
            ok = true;
        } catch (const std::exception& e) {
            detail = e.what();
        }
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": " << c.name
                  << " (" << detail << ")\n";
        if (!ok) ++failures;
    }
    if (failures > 0) {
        std::cout << failures << " of " << criteria.size() << " criteria failed\n";
        return 1;
    }
    std::cout << "all " << criteria.size() << " criteria passed\n";
    return 0;
}
