#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "suffixforge/datapipe.hpp"

namespace suffixforge {

inline constexpr const char* kToolVersion = "0.1.0";

// carries the failing stage name up to the process boundary
struct StageError : Error {
    std::string stage;
    StageError(std::string stage_name, const std::string& message)
        : Error(message), stage(std::move(stage_name)) {}
};

struct FixtureParams {
    uint64_t seed = 1;
    std::string out_dir;
    int vocab_size = 64;
    int dim = 32;
    int suffix_len = 8;
};

// Emits a self-checked frozen system with a known working suffix, its vocab,
// a 9-class synthetic behavior corpus, seeded images, refusal/compliance
// lexicons, a ready-to-run config, and a fixture manifest. The known suffix
// lands in answers.json, which no pipeline stage reads.
void cmd_gen_fixtures(const FixtureParams& params);

// canonical stage order for a run
const std::vector<std::string>& stage_names();

std::string class_slug(const std::string& name);

// One stage against an existing output directory; stages communicate through
// files only, so any stage can be rerun in isolation once its inputs exist.
void run_stage(const RunConfig& cfg, const std::string& stage);

// all stages in canonical order
void cmd_run_all(const RunConfig& cfg);

// prints a finished run's report; format is "csv" or "json"
void cmd_report(const std::string& run_dir, const std::string& format, std::ostream& out);

}  // namespace suffixforge
