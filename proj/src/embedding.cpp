#include "vocadapt/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "vocadapt/errors.hpp"

namespace vocadapt {

namespace {

// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool parse_size(std::string_view s, std::size_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, Mat rows)
    : vocab_(std::move(vocab)), rows_(std::move(rows)) {
    if (static_cast<std::size_t>(rows_.rows()) != vocab_.size())
        throw DataError("embedding matrix: " + std::to_string(rows_.rows()) +
                        " rows but vocabulary has " + std::to_string(vocab_.size()) + " tokens");
    if (rows_.cols() < 1)
        throw DataError("embedding matrix: dimension must be positive");
    if (!rows_.allFinite()) {
        for (Eigen::Index i = 0; i < rows_.rows(); ++i)
            for (Eigen::Index j = 0; j < rows_.cols(); ++j)
                if (!std::isfinite(rows_(i, j)))
                    throw DataError("embedding matrix: non-finite value at row " +
                                    std::to_string(i) + " (\"" + vocab_.token(i) +
                                    "\"), column " + std::to_string(j));
    }
}

double cosine_similarity(RowView a, RowView b) {
    if (a.size() != b.size())
        throw DataError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    double na = a.norm();
    double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw DataError("cosine: zero-norm vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path);

    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path + ": empty file, expected \"<count> <dim>\" header", 1);
    strip_cr(line);
    auto header = split_fields(line);
    std::size_t count = 0, dim = 0;
    if (header.size() != 2 || !parse_size(header[0], count) || !parse_size(header[1], dim))
        throw ParseError(path + ": malformed header \"" + line + "\"", 1);
    if (dim == 0)
        throw ParseError(path + ": dimension must be positive", 1);

    std::vector<std::string> tokens;
    tokens.reserve(count);
    std::unordered_set<std::string_view> seen;
    Mat rows(count, dim);

    std::size_t lineno = 1;
    for (std::size_t r = 0; r < count; ++r) {
        if (!std::getline(in, line))
            throw ParseError(path + ": expected " + std::to_string(count) + " rows, found " +
                             std::to_string(r), lineno);
        ++lineno;
        strip_cr(line);
        auto fields = split_fields(line);
        if (fields.empty())
            throw ParseError(path + ": blank row", lineno);
        if (fields.size() - 1 != dim)
            throw ParseError(path + ": row length " + std::to_string(fields.size() - 1) +
                             " != dim " + std::to_string(dim), lineno);
        for (std::size_t j = 0; j < dim; ++j) {
            double v;
            if (!parse_double(fields[j + 1], v))
                throw ParseError(path + ": invalid value \"" + std::string(fields[j + 1]) + "\"",
                                 lineno);
            if (!std::isfinite(v))
                throw ParseError(path + ": non-finite value for token \"" +
                                 std::string(fields[0]) + "\"", lineno);
            rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
        }
        tokens.emplace_back(fields[0]);
        if (!seen.insert(tokens.back()).second)
            throw ParseError(path + ": duplicate token \"" + tokens.back() + "\"", lineno);
    }
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (!line.empty())
            throw ParseError(path + ": trailing data beyond declared " + std::to_string(count) +
                             " rows", lineno);
    }

    return EmbeddingMatrix(Vocabulary(std::move(tokens)), std::move(rows));
}

void save_embeddings(const EmbeddingMatrix& emb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open embedding file for writing: " + path);

    out << emb.size() << ' ' << emb.dim() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < emb.size(); ++i) {
        const std::string& token = emb.vocab().token(i);
        if (token.find_first_of(" \t\r\n\v\f") != std::string::npos)
            throw DataError("cannot save token containing whitespace: \"" + token + "\"");
        out << token;
        for (Eigen::Index j = 0; j < emb.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.8g", emb.rows()(static_cast<Eigen::Index>(i), j));
            out << ' ' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace vocadapt
