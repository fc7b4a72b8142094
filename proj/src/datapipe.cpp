#include "suffixforge/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "suffixforge/errors.hpp"

namespace suffixforge {

namespace {

using nlohmann::ordered_json;

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// PPM header token scanner: whitespace separates tokens, '#' starts a
// comment that runs to end of line
struct PpmScanner {
    const std::string& bytes;
    const std::string& path;
    size_t pos = 0;

    void skip_space() {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError("ppm '" + path + "': " + what + " at byte " + std::to_string(pos));
    }

    int next_int(const char* field) {
        skip_space();
        if (pos >= bytes.size()) fail(std::string("missing ") + field);
        size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos == start) fail(std::string("expected digits for ") + field);
        if (pos - start > 9) fail(std::string("oversized ") + field);
        int value = 0;
        std::from_chars(bytes.data() + start, bytes.data() + pos, value);
        return value;
    }
};

}  // namespace

ImageTensor load_ppm(const std::string& path) {
    const std::string bytes = read_all(path);
    PpmScanner sc{bytes, path};
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw FormatError("ppm '" + path + "': magic is not P6");
    sc.pos = 2;
    const int w = sc.next_int("width");
    const int h = sc.next_int("height");
    const int maxval = sc.next_int("maxval");
    if (w < 1 || h < 1) sc.fail("non-positive dimensions");
    if (maxval != 255)
        throw FormatError("ppm '" + path + "': maxval " + std::to_string(maxval) +
                          ", only 255 is supported");
    if (sc.pos >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[sc.pos])))
        sc.fail("expected single whitespace after maxval");
    ++sc.pos;
    const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
    const size_t have = bytes.size() - sc.pos;
    if (have < need)
        throw FormatError("ppm '" + path + "': raster truncated, need " + std::to_string(need) +
                          " bytes, have " + std::to_string(have));
    if (have > need)
        throw FormatError("ppm '" + path + "': " + std::to_string(have - need) +
                          " trailing bytes after raster");
    ImageTensor img;
    img.h = h;
    img.w = w;
    img.c = 3;
    img.pix.resize(static_cast<Eigen::Index>(need));
    for (size_t i = 0; i < need; ++i)
        img.pix(static_cast<Eigen::Index>(i)) =
            static_cast<double>(static_cast<unsigned char>(bytes[sc.pos + i]));
    return img;
}

void save_ppm(const ImageTensor& img, const std::string& path) {
    img.validate_shape();
    img.validate_box();
    if (img.c != 3)
        throw DomainError("ppm export needs 3 channels, image has " + std::to_string(img.c));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    const Eigen::Index n = img.pix.size();
    std::string raster(static_cast<size_t>(n), '\0');
    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = std::round(img.pix(i));
        raster[static_cast<size_t>(i)] = static_cast<char>(static_cast<unsigned char>(q));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw FormatError("short write to '" + path + "'");
}

namespace {

void require_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw FormatError(where + ": unknown key '" + key + "'");
    }
}

std::string get_string(const ordered_json& obj, const std::string& key,
                       const std::string& where) {
    if (!obj.contains(key)) throw FormatError(where + ": missing key '" + key + "'");
    if (!obj[key].is_string()) throw FormatError(where + ": key '" + key + "' must be a string");
    return obj[key].get<std::string>();
}

}  // namespace

std::vector<BehaviorPair> load_behaviors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("behaviors: cannot open '" + path + "'");
    std::vector<BehaviorPair> behaviors;
    std::set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty())
            throw DatasetError("behaviors: blank line " + std::to_string(line_no) + " in '" +
                               path + "'");
        const std::string where = "behaviors line " + std::to_string(line_no);
        ordered_json obj;
        try {
            obj = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(where + ": " + e.what());
        }
        if (!obj.is_object()) throw DatasetError(where + ": not a JSON object");
        BehaviorPair b;
        try {
            require_keys(obj, {"id", "class", "query", "target", "keywords"}, where);
            b.id = get_string(obj, "id", where);
            b.class_label = get_string(obj, "class", where);
            b.query = get_string(obj, "query", where);
            b.target = get_string(obj, "target", where);
        } catch (const FormatError& e) {
            throw DatasetError(e.what());
        }
        if (!obj.contains("keywords") || !obj["keywords"].is_array())
            throw DatasetError(where + ": key 'keywords' must be an array");
        for (const auto& kw : obj["keywords"]) {
            if (!kw.is_string())
                throw DatasetError(where + ": keywords must be strings");
            b.keywords.push_back(kw.get<std::string>());
        }
        if (b.id.empty()) throw DatasetError(where + ": empty id");
        if (b.query.empty()) throw DatasetError(where + ": empty query");
        if (b.target.empty()) throw DatasetError(where + ": empty target");
        const auto& names = class_names();
        if (std::find(names.begin(), names.end(), b.class_label) == names.end())
            throw DatasetError(where + ": unknown class '" + b.class_label + "'");
        if (!seen_ids.insert(b.id).second)
            throw DatasetError(where + ": duplicate id '" + b.id + "'");
        behaviors.push_back(std::move(b));
    }
    if (behaviors.empty()) throw DatasetError("behaviors: '" + path + "' holds no rows");
    return behaviors;
}

void save_behaviors(const std::vector<BehaviorPair>& behaviors, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    for (const auto& b : behaviors) {
        ordered_json obj;
        obj["id"] = b.id;
        obj["class"] = b.class_label;
        obj["query"] = b.query;
        obj["target"] = b.target;
        obj["keywords"] = b.keywords;
        out << obj.dump() << "\n";
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

namespace {

uint64_t get_seed(const ordered_json& obj, const std::string& where) {
    if (!obj.contains("seed")) throw ConfigError(where + ": missing key 'seed'");
    const auto& v = obj["seed"];
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<int64_t>() >= 0)
        return static_cast<uint64_t>(v.get<int64_t>());
    throw ConfigError(where + ": 'seed' must be a non-negative integer");
}

double get_positive(const ordered_json& obj, const std::string& key, double fallback,
                    const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw ConfigError(where + ": '" + key + "' must be a number");
    const double v = obj[key].get<double>();
    if (!(v > 0.0)) throw ConfigError(where + ": '" + key + "' must be positive");
    return v;
}

int get_int_min(const ordered_json& obj, const std::string& key, int fallback, int lo,
                const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer())
        throw ConfigError(where + ": '" + key + "' must be an integer");
    const int64_t v = obj[key].get<int64_t>();
    if (v < lo)
        throw ConfigError(where + ": '" + key + "' must be >= " + std::to_string(lo));
    if (v > 1000000) throw ConfigError(where + ": '" + key + "' is implausibly large");
    return static_cast<int>(v);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_all(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config '" + path + "': not a JSON object");
    const std::string where = "config '" + path + "'";
    try {
        require_keys(doc,
                     {"seed", "system", "vocab", "behaviors", "corpus", "output", "attack",
                      "match", "convert", "eval"},
                     where);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }

    RunConfig cfg;
    cfg.seed = get_seed(doc, where);
    auto path_field = [&](const char* key) {
        try {
            return get_string(doc, key, where);
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
    };
    cfg.system_path = path_field("system");
    cfg.vocab_path = path_field("vocab");
    cfg.behaviors_path = path_field("behaviors");
    cfg.corpus_dir = path_field("corpus");
    cfg.output_dir = path_field("output");

    if (doc.contains("attack")) {
        const auto& a = doc["attack"];
        if (!a.is_object()) throw ConfigError(where + ": 'attack' must be an object");
        const std::string aw = where + " attack";
        try {
            require_keys(a, {"epsilon", "p_norm", "step_size", "iters", "num_pairs"}, aw);
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
        cfg.attack.epsilon = get_positive(a, "epsilon", cfg.attack.epsilon, aw);
        if (a.contains("p_norm")) {
            if (!a["p_norm"].is_string())
                throw ConfigError(aw + ": 'p_norm' must be \"inf\" or \"2\"");
            const std::string p = a["p_norm"].get<std::string>();
            if (p == "inf")
                cfg.attack.p_norm = PNorm::Inf;
            else if (p == "2")
                cfg.attack.p_norm = PNorm::Two;
            else
                throw ConfigError(aw + ": 'p_norm' must be \"inf\" or \"2\", got \"" + p + "\"");
        }
        cfg.attack.step_size = get_positive(a, "step_size", cfg.attack.epsilon / 8.0, aw);
        cfg.attack.iters = get_int_min(a, "iters", cfg.attack.iters, 0, aw);
        cfg.attack.num_pairs = get_int_min(a, "num_pairs", cfg.attack.num_pairs, 0, aw);
    } else {
        cfg.attack.step_size = cfg.attack.epsilon / 8.0;
    }

    if (doc.contains("match")) {
        const auto& m = doc["match"];
        if (!m.is_object()) throw ConfigError(where + ": 'match' must be an object");
        const std::string mw = where + " match";
        try {
            require_keys(m, {"scheme", "step_size", "iters"}, mw);
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
        if (m.contains("scheme")) {
            if (!m["scheme"].is_string())
                throw ConfigError(mw + ": 'scheme' must be \"match\", \"rank\" or \"random\"");
            cfg.match_scheme = m["scheme"].get<std::string>();
            if (cfg.match_scheme != "match" && cfg.match_scheme != "rank" &&
                cfg.match_scheme != "random")
                throw ConfigError(mw + ": 'scheme' must be \"match\", \"rank\" or \"random\", got \"" +
                                  cfg.match_scheme + "\"");
        }
        cfg.match_step = get_positive(m, "step_size", cfg.match_step, mw);
        cfg.match_iters = get_int_min(m, "iters", cfg.match_iters, 0, mw);
    }

    if (doc.contains("convert")) {
        const auto& cv = doc["convert"];
        if (!cv.is_object()) throw ConfigError(where + ": 'convert' must be an object");
        const std::string cw = where + " convert";
        try {
            require_keys(cv, {"k", "candidates"}, cw);
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
        cfg.pool_k = get_int_min(cv, "k", cfg.pool_k, 1, cw);
        cfg.num_candidates = get_int_min(cv, "candidates", cfg.num_candidates, 1, cw);
    }

    if (doc.contains("eval")) {
        const auto& ev = doc["eval"];
        if (!ev.is_object()) throw ConfigError(where + ": 'eval' must be an object");
        const std::string ew = where + " eval";
        try {
            require_keys(ev, {"max_len", "refusal_lexicon", "compliance_lexicon"}, ew);
            cfg.eval_max_len = get_int_min(ev, "max_len", cfg.eval_max_len, 1, ew);
            if (ev.contains("refusal_lexicon"))
                cfg.refusal_lexicon = get_string(ev, "refusal_lexicon", ew);
            if (ev.contains("compliance_lexicon"))
                cfg.compliance_lexicon = get_string(ev, "compliance_lexicon", ew);
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
    }
    const auto beh_dir = std::filesystem::path(cfg.behaviors_path).parent_path();
    if (cfg.refusal_lexicon.empty())
        cfg.refusal_lexicon = (beh_dir / "refusal_lexicon.txt").string();
    if (cfg.compliance_lexicon.empty())
        cfg.compliance_lexicon = (beh_dir / "compliance_lexicon.txt").string();
    return cfg;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json doc;
    doc["seed"] = cfg.seed;
    doc["system"] = cfg.system_path;
    doc["vocab"] = cfg.vocab_path;
    doc["behaviors"] = cfg.behaviors_path;
    doc["corpus"] = cfg.corpus_dir;
    doc["attack"] = {{"epsilon", cfg.attack.epsilon},
                     {"p_norm", cfg.attack.p_norm == PNorm::Inf ? "inf" : "2"},
                     {"step_size", cfg.attack.step_size},
                     {"iters", cfg.attack.iters},
                     {"num_pairs", cfg.attack.num_pairs}};
    doc["match"] = {{"scheme", cfg.match_scheme},
                    {"step_size", cfg.match_step},
                    {"iters", cfg.match_iters}};
    doc["convert"] = {{"k", cfg.pool_k}, {"candidates", cfg.num_candidates}};
    doc["eval"] = {{"max_len", cfg.eval_max_len},
                   {"refusal_lexicon", cfg.refusal_lexicon},
                   {"compliance_lexicon", cfg.compliance_lexicon}};
    return doc;
}

nlohmann::ordered_json load_json_file(const std::string& path) {
    try {
        return nlohmann::ordered_json::parse(read_all(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("json '" + path + "': " + e.what());
    }
}

void save_json_file(const nlohmann::ordered_json& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw FormatError("short write to '" + path + "'");
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace suffixforge
