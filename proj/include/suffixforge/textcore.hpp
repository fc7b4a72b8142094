#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "suffixforge/numkernel.hpp"

namespace suffixforge {

// Reserved token ids; every vocabulary starts with these four entries.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumReserved = 4;

// Whitespace word-level vocabulary. Ids 0..3 are reserved and render as
// literal markers; real words start at id 4.
class Vocab {
public:
    // words = entries for ids 4.., already normalized (lowercase, no spaces)
    explicit Vocab(std::vector<std::string> words);

    int size() const { return static_cast<int>(words_.size()); }
    const std::string& word(int id) const;
    // -1 when the word is unknown
    int id_of(const std::string& word) const;

    // all entries including the reserved markers
    const std::vector<std::string>& entries() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

// Lowercases, splits on whitespace, exact-match lookup; unknown words map to
// the unk id. Never throws.
TokenSeq tokenize(const std::string& text, const Vocab& vocab);

// Space-joined words; rejects out-of-range ids.
std::string detokenize(const TokenSeq& tokens, const Vocab& vocab);

// One word per line, LF endings, UTF-8; line N holds the word for id N+4.
// Rejects duplicates, blank lines, embedded whitespace, and words that do not
// survive tokenizer normalization, naming the offending line.
Vocab load_vocab_file(const std::string& path);
void save_vocab_file(const Vocab& vocab, const std::string& path);

}  // namespace suffixforge
