#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "suffixforge/attack.hpp"
#include "suffixforge/evalharness.hpp"
#include "suffixforge/models.hpp"

#include "json.hpp"

namespace suffixforge {

// binary PPM (P6), maxval 255 only; pixels come back as exact integer doubles
ImageTensor load_ppm(const std::string& path);

// rounds half away from zero to bytes; image must be 3-channel and in range
void save_ppm(const ImageTensor& img, const std::string& path);

// one JSON object per line: id, class, query, target, keywords
std::vector<BehaviorPair> load_behaviors(const std::string& path);
void save_behaviors(const std::vector<BehaviorPair>& behaviors, const std::string& path);

struct RunConfig {
    uint64_t seed = 0;
    std::string system_path;
    std::string vocab_path;
    std::string behaviors_path;
    std::string corpus_dir;
    std::string output_dir;
    AttackConfig attack;             // step_size defaults to epsilon / 8
    std::string match_scheme = "match";  // "match", "rank" or "random"
    double match_step = 2.0;
    int match_iters = 300;
    int pool_k = 5;
    int num_candidates = 32;
    int eval_max_len = 8;
    std::string refusal_lexicon;     // default: refusal_lexicon.txt next to behaviors
    std::string compliance_lexicon;  // default: compliance_lexicon.txt next to behaviors
};

// strict: unknown keys are rejected by name, as are malformed values
RunConfig load_run_config(const std::string& path);

// the config as it entered the run, minus the output directory, so reruns
// into different directories compare byte for byte
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

nlohmann::ordered_json load_json_file(const std::string& path);
void save_json_file(const nlohmann::ordered_json& doc, const std::string& path);

// shortest decimal string that round-trips the double
std::string format_double(double value);

}  // namespace suffixforge
