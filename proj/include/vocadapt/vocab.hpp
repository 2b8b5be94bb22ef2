#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vocadapt {

// Ordered token list with index lookup, per-token frequency and special-token
// markers (pad/bos/eos/unk). Immutable after construction; with_specials()
// returns a modified copy.
class Vocabulary {
public:
    Vocabulary() = default;

    // Tokens must be unique and non-empty. frequencies may be empty (all zero)
    // or one count per token. special_indices must be in range.
    Vocabulary(std::vector<std::string> tokens,
               std::vector<std::uint64_t> frequencies = {},
               std::vector<std::size_t> special_indices = {});

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }

    std::optional<std::size_t> index_of(std::string_view token) const;
    bool contains(std::string_view token) const { return index_of(token).has_value(); }

    std::uint64_t frequency(std::size_t i) const { return frequencies_.at(i); }
    const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }

    bool is_special(std::size_t i) const { return special_.at(i); }
    std::vector<std::size_t> special_indices() const;

    // Copy with the named tokens marked special. Every name must be present.
    Vocabulary with_specials(const std::vector<std::string>& names) const;

    bool operator==(const Vocabulary& other) const;

private:
    struct StringHash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const {
            return std::hash<std::string_view>{}(s);
        }
    };

    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> frequencies_;
    std::vector<bool> special_;
    std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

// Text format: one token per line, optionally followed by a single space and
// a frequency count. No special markers; callers mark specials afterwards.
Vocabulary load_vocab(const std::string& path);
void save_vocab(const Vocabulary& vocab, const std::string& path);

}  // namespace vocadapt
