#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vocadapt {

// 64-bit FNV-1a. Used as a content fingerprint in run manifests so that two
// runs can be compared for byte-identical outputs; not a cryptographic hash.
class Fnv1a64 {
public:
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Hash of a file's raw bytes. Throws IoError if the file cannot be read.
std::uint64_t hash_file(const std::string& path);

std::string to_hex(std::uint64_t v);

}  // namespace vocadapt
