#include "vocadapt/cbow.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "vocadapt/errors.hpp"

namespace vocadapt {

namespace {

constexpr double kMaxExp = 6.0;           // logits outside [-6, 6] saturate
constexpr std::size_t kTableSize = 1'000'000;
constexpr double kUnigramPower = 0.75;
constexpr double kLrFloor = 1e-4;         // fraction of initial_lr

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// mt19937_64 with fully specified derivations, so a fixed seed yields the
// same stream on every platform (std distributions are not pinned down).
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }  // [0, 1)
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
};

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

struct Corpus {
    std::vector<std::vector<std::uint32_t>> lines;  // in-vocab token ids only
    std::vector<std::uint64_t> counts;              // per vocab id
    std::uint64_t total_words = 0;
};

Corpus read_corpus(std::istream& in, const Vocabulary& vocab) {
    Corpus c;
    c.counts.assign(vocab.size(), 0);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::uint32_t> ids;
        for (const auto& tok : split_tokens(line)) {
            auto idx = vocab.index_of(tok);
            if (!idx) continue;
            ids.push_back(static_cast<std::uint32_t>(*idx));
            ++c.counts[*idx];
            ++c.total_words;
        }
        if (!ids.empty()) c.lines.push_back(std::move(ids));
    }
    return c;
}

std::vector<std::uint32_t> build_unigram_table(const std::vector<std::uint64_t>& counts) {
    std::vector<std::uint32_t> table(kTableSize);
    double total_pow = 0.0;
    for (auto c : counts) total_pow += std::pow(static_cast<double>(c), kUnigramPower);
    std::size_t i = 0;
    double cum = std::pow(static_cast<double>(counts[0]), kUnigramPower) / total_pow;
    for (std::size_t a = 0; a < kTableSize; ++a) {
        table[a] = static_cast<std::uint32_t>(i);
        if (static_cast<double>(a + 1) / kTableSize > cum && i + 1 < counts.size()) {
            ++i;
            cum += std::pow(static_cast<double>(counts[i]), kUnigramPower) / total_pow;
        }
    }
    return table;
}

struct TrainShared {
    const Corpus& corpus;
    const CbowConfig& cfg;
    const std::vector<std::uint32_t>& table;
    const std::vector<double>& keep_prob;  // empty when subsampling disabled
    Mat& syn0;
    Mat& syn1;
    std::uint64_t total_planned = 0;
    std::atomic<std::uint64_t> processed{0};
    std::atomic<std::uint64_t> pairs{0};
};

void train_range(TrainShared& sh, std::size_t line_begin, std::size_t line_end, Rng& rng) {
    const auto& cfg = sh.cfg;
    const Eigen::Index dim = sh.syn0.cols();
    Eigen::RowVectorXd neu1(dim), neu1e(dim);
    std::vector<std::uint32_t> sent;
    std::uint64_t local_pairs = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t li = line_begin; li < line_end; ++li) {
            const auto& line = sh.corpus.lines[li];
            double frac = static_cast<double>(sh.processed.load(std::memory_order_relaxed)) /
                          static_cast<double>(sh.total_planned + 1);
            double lr = std::max(cfg.initial_lr * (1.0 - frac), cfg.initial_lr * kLrFloor);

            sent.clear();
            for (std::uint32_t id : line) {
                sh.processed.fetch_add(1, std::memory_order_relaxed);
                if (!sh.keep_prob.empty() && sh.keep_prob[id] < rng.unit()) continue;
                sent.push_back(id);
            }

            for (std::size_t pos = 0; pos < sent.size(); ++pos) {
                const std::uint32_t center = sent[pos];
                // reduced window, as in the reference CBOW formulation
                const std::size_t w_eff = cfg.window - rng.below(cfg.window);
                neu1.setZero();
                int cw = 0;
                const std::size_t lo = pos >= w_eff ? pos - w_eff : 0;
                const std::size_t hi = std::min(pos + w_eff, sent.size() - 1);
                for (std::size_t p = lo; p <= hi; ++p) {
                    if (p == pos) continue;
                    neu1 += sh.syn0.row(sent[p]);
                    ++cw;
                }
                if (cw == 0) continue;
                neu1 /= static_cast<double>(cw);
                ++local_pairs;

                neu1e.setZero();
                for (std::size_t d = 0; d <= cfg.negatives; ++d) {
                    std::uint32_t target;
                    double label;
                    if (d == 0) {
                        target = center;
                        label = 1.0;
                    } else {
                        target = sh.table[rng.below(sh.table.size())];
                        if (target == center) continue;
                        label = 0.0;
                    }
                    const double f = neu1.dot(sh.syn1.row(target));
                    double g;
                    if (f > kMaxExp)
                        g = (label - 1.0) * lr;
                    else if (f < -kMaxExp)
                        g = label * lr;
                    else
                        g = (label - 1.0 / (1.0 + std::exp(-f))) * lr;
                    neu1e += g * sh.syn1.row(target);
                    sh.syn1.row(target) += g * neu1;
                }
                for (std::size_t p = lo; p <= hi; ++p) {
                    if (p == pos) continue;
                    sh.syn0.row(sent[p]) += neu1e;
                }
            }
        }
    }
    sh.pairs.fetch_add(local_pairs, std::memory_order_relaxed);
}

}  // namespace

void CbowConfig::validate() const {
    if (dim == 0) throw DataError("cbow config: dim must be positive");
    if (window == 0) throw DataError("cbow config: window must be positive");
    if (negatives == 0) throw DataError("cbow config: negatives must be positive");
    if (epochs == 0) throw DataError("cbow config: epochs must be positive");
    if (initial_lr <= 0.0) throw DataError("cbow config: initial_lr must be positive");
    if (max_vocab == 0) throw DataError("cbow config: max_vocab must be positive");
    if (subsample_threshold < 0.0)
        throw DataError("cbow config: subsample_threshold must be non-negative");
    if (threads == 0) throw DataError("cbow config: threads must be positive");
}

Vocabulary build_vocab(std::istream& corpus, std::uint64_t min_count, std::size_t max_vocab) {
    if (max_vocab == 0) throw DataError("build_vocab: max_vocab must be positive");

    std::unordered_map<std::string, std::pair<std::uint64_t, std::size_t>> counts;
    std::size_t next_rank = 0;
    std::string line;
    while (std::getline(corpus, line)) {
        for (auto& tok : split_tokens(line)) {
            auto [it, inserted] = counts.try_emplace(std::move(tok), 0, next_rank);
            if (inserted) ++next_rank;
            ++it->second.first;
        }
    }

    struct Entry {
        const std::string* token;
        std::uint64_t count;
        std::size_t first_seen;
    };
    std::vector<Entry> entries;
    entries.reserve(counts.size());
    for (const auto& [tok, cr] : counts)
        if (cr.first >= min_count) entries.push_back({&tok, cr.first, cr.second});
    if (entries.empty())
        throw DataError("build_vocab: empty resulting vocabulary");

    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.first_seen < b.first_seen;
    });
    if (entries.size() > max_vocab) entries.resize(max_vocab);

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freqs;
    tokens.reserve(entries.size());
    freqs.reserve(entries.size());
    for (const auto& e : entries) {
        tokens.push_back(*e.token);
        freqs.push_back(e.count);
    }
    return Vocabulary(std::move(tokens), std::move(freqs));
}

Vocabulary build_vocab_file(const std::string& path, std::uint64_t min_count,
                            std::size_t max_vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return build_vocab(in, min_count, max_vocab);
}

EmbeddingMatrix train_cbow(std::istream& corpus, const Vocabulary& vocab,
                           const CbowConfig& config) {
    config.validate();
    if (vocab.size() == 0) throw DataError("train_cbow: empty vocabulary");

    Corpus c = read_corpus(corpus, vocab);
    bool any_pair = false;
    for (const auto& l : c.lines)
        if (l.size() >= 2) { any_pair = true; break; }
    if (!any_pair)
        throw DataError("train_cbow: corpus yields zero training pairs");

    const auto V = static_cast<Eigen::Index>(vocab.size());
    const auto D = static_cast<Eigen::Index>(config.dim);

    Rng rng(config.seed);
    Mat syn0(V, D);
    for (Eigen::Index i = 0; i < V; ++i)
        for (Eigen::Index j = 0; j < D; ++j)
            syn0(i, j) = (rng.unit() - 0.5) / static_cast<double>(config.dim);
    Mat syn1 = Mat::Zero(V, D);

    std::vector<std::uint32_t> table = build_unigram_table(c.counts);

    std::vector<double> keep_prob;
    if (config.subsample_threshold > 0.0) {
        keep_prob.resize(vocab.size(), 1.0);
        const double thr = config.subsample_threshold * static_cast<double>(c.total_words);
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (c.counts[i] == 0) continue;
            const double cn = static_cast<double>(c.counts[i]);
            keep_prob[i] = (std::sqrt(cn / thr) + 1.0) * thr / cn;
        }
    }

    TrainShared sh{c, config, table, keep_prob, syn0, syn1};
    sh.total_planned = config.epochs * c.total_words;

    if (config.threads <= 1) {
        train_range(sh, 0, c.lines.size(), rng);
    } else {
        const std::size_t n = c.lines.size();
        const std::size_t t = std::min(config.threads, n);
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < t; ++w) {
            const std::size_t begin = n * w / t;
            const std::size_t end = n * (w + 1) / t;
            workers.emplace_back([&sh, begin, end, w, &config] {
                Rng worker_rng(splitmix64(config.seed) ^ splitmix64(w + 1));
                train_range(sh, begin, end, worker_rng);
            });
        }
        for (auto& th : workers) th.join();
    }

    if (sh.pairs.load() == 0)
        throw DataError("train_cbow: corpus yields zero training pairs");

    return EmbeddingMatrix(vocab, std::move(syn0));
}

EmbeddingMatrix train_cbow_file(const std::string& path, const Vocabulary& vocab,
                                const CbowConfig& config) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return train_cbow(in, vocab, config);
}

}  // namespace vocadapt
