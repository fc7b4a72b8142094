#include <unistd.h>

#include <fstream>

#include "doctest.h"
#include "suffixforge/datapipe.hpp"
#include "suffixforge/errors.hpp"
#include "tmpdir.hpp"

using namespace suffixforge;

namespace {

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string minimal_config_body(const std::string& extra = "") {
    std::string body = R"({
  "seed": 9,
  "system": "/tmp/m.sfm",
  "vocab": "/tmp/v.txt",
  "behaviors": "/data/behaviors.jsonl",
  "corpus": "/tmp/corpus",
  "output": "/tmp/out")";
    if (!extra.empty()) body += ",\n" + extra;
    body += "\n}\n";
    return body;
}

}  // namespace

TEST_CASE("ppm parsing reads pixels as exact integer doubles") {
    TmpDir dir("sfx-datapipe");
    const std::string p =
        dir.write("one.ppm", std::string("P6\n1 1\n255\n") + '\xff' + '\x00' + '\x0a');
    const ImageTensor img = load_ppm(p);
    CHECK(img.h == 1);
    CHECK(img.w == 1);
    CHECK(img.c == 3);
    CHECK(img.pix(0) == 255.0);
    CHECK(img.pix(1) == 0.0);
    CHECK(img.pix(2) == 10.0);
}

TEST_CASE("ppm parsing tolerates comments and flexible whitespace") {
    TmpDir dir("sfx-datapipe");
    std::string raw = "P6 # a comment\n# another\n 2\t1 # dims\n255\n";
    raw += std::string(6, '\x40');
    const ImageTensor img = load_ppm(dir.write("c.ppm", raw));
    CHECK(img.w == 2);
    CHECK(img.h == 1);
    CHECK(img.pix(0) == 64.0);
}

TEST_CASE("ppm parsing rejects bad headers and rasters precisely") {
    TmpDir dir("sfx-datapipe");
    const auto expect = [&](const std::string& name, const std::string& raw,
                            const std::string& needle) {
        const std::string p = dir.write(name, raw);
        try {
            load_ppm(p);
            FAIL_CHECK("expected FormatError for " << name);
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect("p3.ppm", "P3\n1 1\n255\n abc", "P6");
    expect("maxval.ppm", std::string("P6\n1 1\n65535\n") + std::string(3, 'x'), "maxval");
    expect("short.ppm", "P6\n2 2\n255\nxyz", "truncated");
    expect("long.ppm", std::string("P6\n1 1\n255\n") + std::string(5, 'x'), "trailing");
    expect("nodims.ppm", "P6\n", "width");
    CHECK_THROWS_AS(load_ppm(dir.file("absent.ppm")), FormatError);
}

TEST_CASE("ppm export writes exact bytes and rounds half away from zero") {
    TmpDir dir("sfx-datapipe");
    ImageTensor img;
    img.h = 1;
    img.w = 2;
    img.c = 3;
    img.pix = Vec(6);
    img.pix << 0.0, 0.49, 0.5, 254.4, 254.5, 255.0;
    const std::string p = dir.file("round.ppm");
    save_ppm(img, p);
    const std::string raw = read_bytes(p);
    const std::string want_header = "P6\n2 1\n255\n";
    REQUIRE(raw.size() == want_header.size() + 6);
    CHECK(raw.substr(0, want_header.size()) == want_header);
    const unsigned char* b = reinterpret_cast<const unsigned char*>(raw.data()) +
                             want_header.size();
    CHECK(b[0] == 0);
    CHECK(b[1] == 0);
    CHECK(b[2] == 1);
    CHECK(b[3] == 254);
    CHECK(b[4] == 255);
    CHECK(b[5] == 255);

    // full round trip
    const ImageTensor back = load_ppm(p);
    CHECK(back.pix(2) == 1.0);
    CHECK(back.pix(4) == 255.0);

    ImageTensor gray = img;
    gray.c = 1;
    gray.pix = Vec::Zero(2);
    CHECK_THROWS_AS(save_ppm(gray, dir.file("gray.ppm")), DomainError);
    ImageTensor out_of_range = img;
    out_of_range.pix(0) = -1.0;
    CHECK_THROWS_AS(save_ppm(out_of_range, dir.file("neg.ppm")), DomainError);
}

TEST_CASE("behavior files round-trip and reject malformed rows by line") {
    TmpDir dir("sfx-datapipe");
    std::vector<BehaviorPair> rows;
    rows.push_back({"v1", class_names()[0], "tell me", "sure", {"a", "b"}});
    rows.push_back({"v2", class_names()[3], "explain it", "sure", {}});
    const std::string p = dir.file("behaviors.jsonl");
    save_behaviors(rows, p);
    const auto back = load_behaviors(p);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "v1");
    CHECK(back[0].keywords == std::vector<std::string>{"a", "b"});
    CHECK(back[1].class_label == class_names()[3]);

    const auto expect = [&](const std::string& name, const std::string& raw,
                            const std::string& needle) {
        const std::string path = dir.write(name, raw);
        try {
            load_behaviors(path);
            FAIL_CHECK("expected DatasetError for " << name);
        } catch (const DatasetError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    const std::string good =
        R"({"id":"x","class":"Hate","query":"q","target":"t","keywords":[]})";
    expect("dup.jsonl", good + "\n" + good + "\n", "duplicate id");
    expect("blank.jsonl", good + "\n\n" + good + "\n", "line 2");
    expect("class.jsonl",
           R"({"id":"x","class":"Nope","query":"q","target":"t","keywords":[]})" "\n",
           "unknown class");
    expect("extra.jsonl",
           R"({"id":"x","class":"Hate","query":"q","target":"t","keywords":[],"zz":1})" "\n",
           "zz");
    expect("missing.jsonl", R"({"id":"x","class":"Hate","query":"q"})" "\n", "missing key");
    expect("type.jsonl",
           R"({"id":"x","class":"Hate","query":"q","target":"t","keywords":"a"})" "\n",
           "keywords");
    expect("notjson.jsonl", "hello\n", "line 1");
    expect("empty.jsonl", "", "no rows");
}

TEST_CASE("run configs apply defaults, including step size from epsilon") {
    TmpDir dir("sfx-datapipe");
    const RunConfig cfg = load_run_config(dir.write("min.json", minimal_config_body()));
    CHECK(cfg.seed == 9);
    CHECK(cfg.system_path == "/tmp/m.sfm");
    CHECK(cfg.attack.epsilon == 32.0);
    CHECK(cfg.attack.step_size == 4.0);  // epsilon / 8
    CHECK(cfg.attack.p_norm == PNorm::Inf);
    CHECK(cfg.match_scheme == "match");
    CHECK(cfg.pool_k == 5);
    CHECK(cfg.num_candidates == 32);
    CHECK(cfg.eval_max_len == 8);
    CHECK(cfg.refusal_lexicon == "/data/refusal_lexicon.txt");
    CHECK(cfg.compliance_lexicon == "/data/compliance_lexicon.txt");

    const RunConfig wide = load_run_config(dir.write(
        "eps.json", minimal_config_body(R"(  "attack": {"epsilon": 64.0})")));
    CHECK(wide.attack.epsilon == 64.0);
    CHECK(wide.attack.step_size == 8.0);

    const RunConfig two = load_run_config(dir.write(
        "two.json",
        minimal_config_body(
            R"(  "attack": {"p_norm": "2", "step_size": 1.5}, "match": {"scheme": "rank"})")));
    CHECK(two.attack.p_norm == PNorm::Two);
    CHECK(two.attack.step_size == 1.5);
    CHECK(two.match_scheme == "rank");
}

TEST_CASE("run configs reject unknown keys and bad values by name") {
    TmpDir dir("sfx-datapipe");
    const auto expect = [&](const std::string& name, const std::string& body,
                            const std::string& needle) {
        const std::string p = dir.write(name, body);
        try {
            load_run_config(p);
            FAIL_CHECK("expected ConfigError for " << name);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect("typo.json", minimal_config_body(R"(  "attack": {"epslon": 8})"), "epslon");
    expect("top.json", minimal_config_body(R"(  "extra": 1)"), "extra");
    expect("pnorm.json", minimal_config_body(R"(  "attack": {"p_norm": "3"})"), "p_norm");
    expect("scheme.json", minimal_config_body(R"(  "match": {"scheme": "best"})"), "scheme");
    expect("negeps.json", minimal_config_body(R"(  "attack": {"epsilon": -4})"), "positive");
    expect("badseed.json", R"({"seed": -1, "system": "s", "vocab": "v",
        "behaviors": "b", "corpus": "c", "output": "o"})", "seed");
    expect("noseed.json", R"({"system": "s", "vocab": "v",
        "behaviors": "b", "corpus": "c", "output": "o"})", "seed");
    expect("notjson.json", "nope", "config");
    expect("k.json", minimal_config_body(R"(  "convert": {"k": 0})"), "k");
}

TEST_CASE("the config echo drops the output directory") {
    TmpDir dir("sfx-datapipe");
    const RunConfig cfg = load_run_config(dir.write("a.json", minimal_config_body()));
    RunConfig moved = cfg;
    moved.output_dir = "/somewhere/else";
    CHECK(run_config_to_json(cfg) == run_config_to_json(moved));
    const auto echo = run_config_to_json(cfg);
    CHECK(!echo.contains("output"));
    CHECK(echo["seed"] == 9);
    CHECK(echo["attack"]["epsilon"] == 32.0);
}

TEST_CASE("json files round-trip with a trailing newline") {
    TmpDir dir("sfx-datapipe");
    nlohmann::ordered_json doc;
    doc["b"] = 1;
    doc["a"] = {1, 2, 3};
    const std::string p = dir.file("doc.json");
    save_json_file(doc, p);
    const std::string raw = read_bytes(p);
    CHECK(raw.back() == '\n');
    CHECK(load_json_file(p) == doc);
    // ordered_json keeps insertion order, so the echo is byte-stable
    CHECK(raw.find("\"b\"") < raw.find("\"a\""));
    CHECK_THROWS_AS(load_json_file(dir.write("bad.json", "{")), FormatError);
    CHECK_THROWS_AS(load_json_file(dir.file("absent.json")), FormatError);
}

TEST_CASE("doubles format to the shortest round-tripping decimal") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(2.5) == "2.5");
    CHECK(format_double(-1.0) == "-1");
    for (double v : {0.1, 1.0 / 3.0, 1e-12, 123456789.123, -2.5e300}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
