#include <unistd.h>

#include "doctest.h"
#include "suffixforge/errors.hpp"
#include "suffixforge/textcore.hpp"
#include "tmpdir.hpp"

using namespace suffixforge;

TEST_CASE("vocab maps words to ids starting after the reserved block") {
    Vocab v({"alpha", "beta", "gamma"});
    CHECK(v.size() == kNumReserved + 3);
    CHECK(v.id_of("alpha") == 4);
    CHECK(v.id_of("gamma") == 6);
    CHECK(v.id_of("delta") == -1);
    CHECK(v.word(4) == "alpha");
    CHECK(v.word(kBos) == "<bos>");
    CHECK_THROWS_AS(v.word(-1), DomainError);
    CHECK_THROWS_AS(v.word(v.size()), DomainError);
}

TEST_CASE("vocab construction rejects non-normal words") {
    CHECK_THROWS_AS(Vocab({"ok", "ok"}), DatasetError);
    CHECK_THROWS_AS(Vocab({"Upper"}), DatasetError);
    CHECK_THROWS_AS(Vocab({"two words"}), DatasetError);
    CHECK_THROWS_AS(Vocab({""}), DatasetError);
    CHECK_THROWS_AS(Vocab({"<bos>"}), DatasetError);
}

TEST_CASE("tokenize lowercases, splits, and maps unknowns to unk") {
    Vocab v({"tell", "me", "about", "it"});
    const TokenSeq t = tokenize("  Tell ME\tabout\n zzz it ", v);
    REQUIRE(t.size() == 5);
    CHECK(t[0] == v.id_of("tell"));
    CHECK(t[1] == v.id_of("me"));
    CHECK(t[2] == v.id_of("about"));
    CHECK(t[3] == kUnk);
    CHECK(t[4] == v.id_of("it"));
    CHECK(tokenize("", v).empty());
    CHECK(tokenize("   \n\t ", v).empty());
}

TEST_CASE("detokenize round-trips real words and rejects bad ids") {
    Vocab v({"red", "green", "blue"});
    const std::string text = "blue red green";
    CHECK(detokenize(tokenize(text, v), v) == text);
    CHECK(detokenize({}, v).empty());
    CHECK(detokenize({kUnk}, v) == "<unk>");
    CHECK_THROWS_AS(detokenize({99}, v), DomainError);
    CHECK_THROWS_AS(detokenize({-2}, v), DomainError);
}

TEST_CASE("vocab files round-trip through save and load") {
    TmpDir dir("sfx-textcore");
    Vocab v({"one", "two", "three", "four"});
    const std::string p = dir.file("words.txt");
    save_vocab_file(v, p);
    const Vocab back = load_vocab_file(p);
    CHECK(back.entries() == v.entries());
}

TEST_CASE("vocab file loading names the offending line") {
    TmpDir dir("sfx-textcore");
    const auto expect_mentions = [](const std::string& path, const std::string& needle) {
        try {
            load_vocab_file(path);
            FAIL_CHECK("expected a FormatError for " << path);
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_mentions(dir.write("dup.txt", "aa\nbb\naa\n"), "line 3");
    expect_mentions(dir.write("blank.txt", "aa\n\nbb\n"), "line 2");
    expect_mentions(dir.write("upper.txt", "aa\nBeta\n"), "line 2");
    expect_mentions(dir.write("cr.txt", "aa\r\nbb\n"), "line 1");
    expect_mentions(dir.write("space.txt", "a b\n"), "line 1");
    expect_mentions(dir.write("marker.txt", "aa\n<eos>\n"), "line 2");
    CHECK_THROWS_AS(load_vocab_file(dir.file("missing.txt")), FormatError);
}
