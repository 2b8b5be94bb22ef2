#include "vocadapt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "vocadapt/errors.hpp"

namespace vocadapt {

namespace {

bool has_whitespace(std::string_view token) {
    return token.find_first_of(" \t\r\n\v\f") != std::string_view::npos;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens,
                       std::vector<std::uint64_t> frequencies,
                       std::vector<std::size_t> special_indices)
    : tokens_(std::move(tokens)) {
    if (frequencies.empty())
        frequencies.assign(tokens_.size(), 0);
    if (frequencies.size() != tokens_.size())
        throw DataError("vocabulary: frequency count " + std::to_string(frequencies.size()) +
                        " does not match token count " + std::to_string(tokens_.size()));
    frequencies_ = std::move(frequencies);

    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty())
            throw DataError("vocabulary: empty token at index " + std::to_string(i));
        auto [it, inserted] = index_.emplace(tokens_[i], i);
        if (!inserted)
            throw DataError("vocabulary: duplicate token \"" + tokens_[i] + "\"");
    }

    special_.assign(tokens_.size(), false);
    for (std::size_t idx : special_indices) {
        if (idx >= tokens_.size())
            throw DataError("vocabulary: special index " + std::to_string(idx) +
                            " out of range (size " + std::to_string(tokens_.size()) + ")");
        special_[idx] = true;
    }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> Vocabulary::special_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < special_.size(); ++i)
        if (special_[i]) out.push_back(i);
    return out;
}

Vocabulary Vocabulary::with_specials(const std::vector<std::string>& names) const {
    std::vector<std::size_t> specials = special_indices();
    for (const auto& name : names) {
        auto idx = index_of(name);
        if (!idx)
            throw DataError("vocabulary: cannot mark special token \"" + name +
                            "\": not in vocabulary");
        specials.push_back(*idx);
    }
    return Vocabulary(tokens_, frequencies_, specials);
}

bool Vocabulary::operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && frequencies_ == other.frequencies_ &&
           special_ == other.special_;
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freqs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string token, count_str, extra;
        iss >> token;
        std::uint64_t freq = 0;
        if (iss >> count_str) {
            try {
                freq = std::stoull(count_str);
            } catch (const std::exception&) {
                throw ParseError("vocabulary file " + path + ": invalid count \"" + count_str + "\"",
                                 lineno);
            }
            if (iss >> extra)
                throw ParseError("vocabulary file " + path + ": trailing field \"" + extra + "\"",
                                 lineno);
        }
        tokens.push_back(std::move(token));
        freqs.push_back(freq);
    }
    if (tokens.empty())
        throw ParseError("vocabulary file " + path + ": no tokens");
    try {
        return Vocabulary(std::move(tokens), std::move(freqs));
    } catch (const DataError& e) {
        throw ParseError("vocabulary file " + path + ": " + e.what());
    }
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const std::string& t = vocab.token(i);
        if (has_whitespace(t))
            throw DataError("cannot save token containing whitespace: \"" + t + "\"");
        out << t << ' ' << vocab.frequency(i) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace vocadapt
