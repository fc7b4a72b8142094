#include "suffixforge/textcore.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "suffixforge/errors.hpp"

namespace suffixforge {

namespace {

const std::vector<std::string>& reserved_markers() {
    static const std::vector<std::string> m = {"<pad>", "<unk>", "<bos>", "<eos>"};
    return m;
}

std::string lower_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool has_whitespace(const std::string& s) {
    for (unsigned char c : s)
        if (std::isspace(c)) return true;
    return false;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> words) {
    words_ = reserved_markers();
    words_.insert(words_.end(), words.begin(), words.end());
    for (size_t i = 0; i < words_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(words_[i], static_cast<int>(i));
        if (!inserted)
            throw DatasetError("vocab: duplicate word '" + words_[i] + "'");
    }
    for (size_t i = kNumReserved; i < words_.size(); ++i) {
        const std::string& w = words_[i];
        if (w.empty() || has_whitespace(w) || lower_ascii(w) != w)
            throw DatasetError("vocab: word '" + w + "' is not tokenizer-normal");
    }
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size())
        throw DomainError("vocab: id " + std::to_string(id) + " out of range for size " +
                          std::to_string(size()));
    return words_[static_cast<size_t>(id)];
}

int Vocab::id_of(const std::string& word) const {
    const auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

TokenSeq tokenize(const std::string& text, const Vocab& vocab) {
    TokenSeq out;
    std::istringstream ss(lower_ascii(text));
    std::string w;
    while (ss >> w) {
        const int id = vocab.id_of(w);
        out.push_back(id < 0 ? kUnk : id);
    }
    return out;
}

std::string detokenize(const TokenSeq& tokens, const Vocab& vocab) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.word(tokens[i]);
    }
    return out;
}

Vocab load_vocab_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("vocab: cannot open '" + path + "'");
    std::vector<std::string> words;
    std::string line;
    int line_no = 0;
    std::unordered_map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            throw FormatError("vocab: CR line ending at line " + std::to_string(line_no));
        if (line.empty())
            throw FormatError("vocab: blank line at line " + std::to_string(line_no));
        if (has_whitespace(line))
            throw FormatError("vocab: embedded whitespace at line " + std::to_string(line_no));
        if (lower_ascii(line) != line)
            throw FormatError("vocab: word not lowercase at line " + std::to_string(line_no) +
                              " ('" + line + "'); round-trip requires tokenizer-normal words");
        for (const auto& m : reserved_markers())
            if (line == m)
                throw FormatError("vocab: reserved marker '" + line + "' at line " +
                                  std::to_string(line_no));
        const auto [it, inserted] = seen.emplace(line, line_no);
        if (!inserted)
            throw FormatError("vocab: duplicate word '" + line + "' at line " +
                              std::to_string(line_no) + " (first seen at line " +
                              std::to_string(it->second) + ")");
        words.push_back(line);
    }
    return Vocab(std::move(words));
}

void save_vocab_file(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("vocab: cannot write '" + path + "'");
    const auto& entries = vocab.entries();
    for (size_t i = kNumReserved; i < entries.size(); ++i) out << entries[i] << '\n';
    if (!out) throw FormatError("vocab: write failed for '" + path + "'");
}

}  // namespace suffixforge
