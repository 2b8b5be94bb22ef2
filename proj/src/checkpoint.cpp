#include "vocadapt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>

#include "vocadapt/errors.hpp"

namespace vocadapt {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;

using json = nlohmann::json;

void put_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f32_le(std::ostream& out, const std::vector<float>& values) {
    std::vector<unsigned char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        buf[4 * i + 0] = static_cast<unsigned char>(bits);
        buf[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
        buf[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
        buf[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> get_f32_le(std::istream& in, std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i + 0]) |
                             (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                             (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                             (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        values[i] = std::bit_cast<float>(bits);
    }
    return values;
}

json role_to_json(const EmbeddingRole& role) {
    return json{{"embedding_tensor", role.tensor_key},
                {"vocab_file", role.vocab_file},
                {"vocab_size", role.vocab_size}};
}

EmbeddingRole role_from_json(const json& j) {
    EmbeddingRole role;
    role.tensor_key = j.at("embedding_tensor").get<std::string>();
    role.vocab_file = j.at("vocab_file").get<std::string>();
    role.vocab_size = j.at("vocab_size").get<std::size_t>();
    return role;
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return shape.empty() ? 0 : n;
}

Side parse_side(const std::string& name) {
    if (name == "encoder") return Side::kEncoder;
    if (name == "decoder") return Side::kDecoder;
    throw DataError("unknown side \"" + name + "\" (expected encoder or decoder)");
}

std::string to_string(Side side) {
    return side == Side::kEncoder ? "encoder" : "decoder";
}

Checkpoint::Checkpoint(CheckpointManifest manifest, std::map<std::string, Tensor> tensors)
    : manifest_(std::move(manifest)), tensors_(std::move(tensors)) {
    if (manifest_.version != kFormatVersion)
        throw DataError("checkpoint: unsupported format version " +
                        std::to_string(manifest_.version));
    std::set<std::string> ordered(manifest_.tensor_order.begin(), manifest_.tensor_order.end());
    if (ordered.size() != manifest_.tensor_order.size())
        throw DataError("checkpoint: duplicate tensor name in manifest order");
    for (const auto& name : manifest_.tensor_order)
        if (!tensors_.count(name))
            throw DataError("checkpoint: manifest references missing tensor \"" + name + "\"");
    for (const auto& [name, t] : tensors_) {
        if (!ordered.count(name))
            throw DataError("checkpoint: tensor \"" + name + "\" absent from manifest order");
        if (t.data.size() != t.element_count())
            throw DataError("checkpoint: tensor \"" + name + "\" data length " +
                            std::to_string(t.data.size()) + " does not match shape product " +
                            std::to_string(t.element_count()));
    }
    for (const auto* role : {&manifest_.encoder, &manifest_.decoder})
        if (!tensors_.count(role->tensor_key))
            throw DataError("checkpoint: manifest references missing tensor \"" +
                            role->tensor_key + "\"");
}

bool Checkpoint::has_tensor(const std::string& name) const { return tensors_.count(name) > 0; }

const Tensor& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw DataError("checkpoint: no tensor named \"" + name + "\"");
    return it->second;
}

const EmbeddingRole& Checkpoint::role(Side side) const {
    return side == Side::kEncoder ? manifest_.encoder : manifest_.decoder;
}

const Tensor& Checkpoint::embedding_tensor(Side side) const {
    return tensor(role(side).tensor_key);
}

const Tensor* Checkpoint::decoder_output_projection() const {
    if (!manifest_.tied_decoder) return nullptr;
    return &tensor(manifest_.decoder.tensor_key);
}

std::size_t Checkpoint::embedding_width(Side side) const {
    const Tensor& t = embedding_tensor(side);
    if (t.shape.size() != 2)
        throw DataError("checkpoint: " + to_string(side) + " embedding tensor \"" +
                        role(side).tensor_key + "\" is not rank 2");
    return t.shape[1];
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError(path + ": bad magic, not a checkpoint file");

    const std::uint64_t manifest_len = get_u64_le(in);
    if (!in || manifest_len > file_size - 16)
        throw ParseError(path + ": corrupted manifest length field");
    std::string manifest_text(manifest_len, '\0');
    in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw ParseError(path + ": truncated manifest");

    CheckpointManifest manifest;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_infos;
    try {
        const json j = json::parse(manifest_text);
        manifest.version = j.at("version").get<int>();
        if (manifest.version != kFormatVersion)
            throw ParseError(path + ": format version mismatch (got " +
                             std::to_string(manifest.version) + ", expected " +
                             std::to_string(kFormatVersion) + ")");
        manifest.encoder = role_from_json(j.at("encoder"));
        manifest.decoder = role_from_json(j.at("decoder"));
        manifest.tied_decoder = j.at("decoder").at("tied").get<bool>();
        manifest.special_tokens = j.at("special_tokens").get<std::vector<std::string>>();
        for (const auto& tj : j.at("tensors")) {
            tensor_infos.emplace_back(tj.at("name").get<std::string>(),
                                      tj.at("shape").get<std::vector<std::size_t>>());
            manifest.tensor_order.push_back(tensor_infos.back().first);
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": invalid checkpoint manifest: " + e.what());
    }

    std::map<std::string, Tensor> tensors;
    std::uint64_t expected_payload = 0;
    for (const auto& [name, shape] : tensor_infos) {
        Tensor t;
        t.shape = shape;
        expected_payload += static_cast<std::uint64_t>(t.element_count()) * 4;
        tensors[name] = std::move(t);
    }
    if (16 + manifest_len + expected_payload != file_size)
        throw ParseError(path + ": payload size mismatch (expected " +
                         std::to_string(expected_payload) + " bytes, file has " +
                         std::to_string(file_size - 16 - manifest_len) + ")");
    for (const auto& [name, shape] : tensor_infos) {
        Tensor& t = tensors[name];
        t.data = get_f32_le(in, t.element_count());
        if (!in) throw ParseError(path + ": truncated tensor payload for \"" + name + "\"");
    }

    return Checkpoint(std::move(manifest), std::move(tensors));
}

void write_checkpoint(const Checkpoint& cp, const std::string& path) {
    json tensors_json = json::array();
    for (const auto& name : cp.manifest().tensor_order)
        tensors_json.push_back(json{{"name", name}, {"shape", cp.tensor(name).shape}});
    json decoder_json = role_to_json(cp.manifest().decoder);
    decoder_json["tied"] = cp.manifest().tied_decoder;
    const json manifest_json{{"version", cp.manifest().version},
                             {"encoder", role_to_json(cp.manifest().encoder)},
                             {"decoder", decoder_json},
                             {"special_tokens", cp.manifest().special_tokens},
                             {"tensors", tensors_json}};
    const std::string manifest_text = manifest_json.dump(2);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    put_u64_le(out, manifest_text.size());
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    for (const auto& name : cp.manifest().tensor_order)
        put_f32_le(out, cp.tensor(name).data);
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint swap_embeddings(const Checkpoint& cp, Side side, const Vocabulary& new_vocab,
                           const EmbeddingMatrix& new_emb, const Vocabulary& source_vocab,
                           const std::string& new_vocab_ref) {
    if (new_emb.vocab().tokens() != new_vocab.tokens())
        throw DataError("swap_embeddings: embedding matrix vocabulary does not match new_vocab");

    const EmbeddingRole& role = cp.role(side);
    const Tensor& old_tensor = cp.embedding_tensor(side);
    const std::size_t width = cp.embedding_width(side);
    if (static_cast<std::size_t>(new_emb.dim()) != width)
        throw DataError("swap_embeddings: dimension mismatch on " + to_string(side) +
                        " side (new embeddings dim " + std::to_string(new_emb.dim()) +
                        " vs checkpoint width " + std::to_string(width) + ")");

    // Source-side special rows survive the swap verbatim.
    std::vector<std::pair<std::size_t, std::size_t>> special_rows;  // (new row, old row)
    std::vector<std::string> missing;
    for (std::size_t s : source_vocab.special_indices()) {
        const std::string& tok = source_vocab.token(s);
        if (s >= old_tensor.shape.at(0))
            throw DataError("swap_embeddings: special index " + std::to_string(s) +
                            " out of range of old embedding tensor");
        auto ni = new_vocab.index_of(tok);
        if (!ni) {
            missing.push_back(tok);
            continue;
        }
        special_rows.emplace_back(*ni, s);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "\"" : ", \"") + m + "\"";
        throw DataError("swap_embeddings: special tokens missing from new vocabulary: " + list);
    }

    Tensor replacement;
    replacement.shape = {new_vocab.size(), width};
    replacement.data.resize(new_vocab.size() * width);
    for (std::size_t i = 0; i < new_vocab.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            replacement.data[i * width + j] =
                static_cast<float>(new_emb.rows()(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)));
    for (const auto& [new_row, old_row] : special_rows)
        std::copy_n(old_tensor.data.begin() + static_cast<std::ptrdiff_t>(old_row * width), width,
                    replacement.data.begin() + static_cast<std::ptrdiff_t>(new_row * width));

    CheckpointManifest manifest = cp.manifest();
    EmbeddingRole& new_role =
        side == Side::kEncoder ? manifest.encoder : manifest.decoder;
    new_role.vocab_size = new_vocab.size();
    if (!new_vocab_ref.empty()) new_role.vocab_file = new_vocab_ref;

    std::map<std::string, Tensor> tensors = cp.tensors();
    tensors[role.tensor_key] = std::move(replacement);
    return Checkpoint(std::move(manifest), std::move(tensors));
}

ValidationReport validate_checkpoint(const Checkpoint& cp) {
    ValidationReport report;
    auto violation = [&](const std::string& msg) {
        report.passed = false;
        report.violations.push_back(msg);
    };

    for (const auto& [name, t] : cp.tensors()) {
        if (t.data.size() != t.element_count())
            violation("tensor \"" + name + "\": data length " + std::to_string(t.data.size()) +
                      " does not match shape product " + std::to_string(t.element_count()));
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            if (!std::isfinite(t.data[i])) {
                violation("tensor \"" + name + "\": non-finite value at flat index " +
                          std::to_string(i));
                break;
            }
        }
    }

    for (Side side : {Side::kEncoder, Side::kDecoder}) {
        const EmbeddingRole& role = cp.role(side);
        if (!cp.has_tensor(role.tensor_key)) {
            violation(to_string(side) + " embedding tensor \"" + role.tensor_key + "\" missing");
            continue;
        }
        const Tensor& t = cp.tensor(role.tensor_key);
        if (t.shape.size() != 2) {
            violation(to_string(side) + " embedding tensor \"" + role.tensor_key +
                      "\" is not rank 2");
            continue;
        }
        if (t.shape[0] != role.vocab_size)
            violation(to_string(side) + " embedding tensor \"" + role.tensor_key + "\" has " +
                      std::to_string(t.shape[0]) + " rows but referenced vocabulary size is " +
                      std::to_string(role.vocab_size));
    }

    return report;
}

EmbeddingMatrix embedding_from_checkpoint(const Checkpoint& cp, Side side,
                                          const Vocabulary& vocab) {
    const Tensor& t = cp.embedding_tensor(side);
    if (t.shape.size() != 2)
        throw DataError("checkpoint: " + to_string(side) + " embedding tensor is not rank 2");
    if (t.shape[0] != vocab.size())
        throw DataError("checkpoint: " + to_string(side) + " embedding tensor has " +
                        std::to_string(t.shape[0]) + " rows but vocabulary has " +
                        std::to_string(vocab.size()) + " tokens");
    Mat rows(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
    for (std::size_t i = 0; i < t.shape[0]; ++i)
        for (std::size_t j = 0; j < t.shape[1]; ++j)
            rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<double>(t.data[i * t.shape[1] + j]);
    return EmbeddingMatrix(vocab, std::move(rows));
}

}  // namespace vocadapt
