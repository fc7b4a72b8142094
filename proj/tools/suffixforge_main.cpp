#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "suffixforge/pipeline.hpp"

using namespace suffixforge;

int main(int argc, char** argv) {
    CLI::App app{"jailbreak-suffix laboratory: image attack, de-embedding, ASR reports"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    FixtureParams fixture;
    auto* gen = app.add_subcommand("gen-fixtures",
                                   "emit a self-checked frozen system, vocab, behaviors, "
                                   "image corpus, lexicons, and a ready-to-run config");
    gen->add_option("--seed", fixture.seed, "fixture seed")->required();
    gen->add_option("--out", fixture.out_dir, "output directory")->required();
    gen->add_option("--vocab-size", fixture.vocab_size, "vocabulary size including reserved ids");
    gen->add_option("--dim", fixture.dim, "embedding width");
    gen->add_option("--suffix-len", fixture.suffix_len, "suffix length in tokens");

    std::string config_path;
    std::string stage;
    auto* run = app.add_subcommand("run", "run the pipeline (or one stage) from a config file");
    run->add_option("--config", config_path, "run config JSON")->required();
    run->add_option("--stage", stage,
                    "single stage: match-init, attack, convert, eval, cross-class, report");

    std::string run_dir;
    std::string format = "csv";
    auto* rep = app.add_subcommand("report", "print a finished run's report");
    rep->add_option("--run", run_dir, "run output directory")->required();
    rep->add_option("--format", format, "csv or json");

    CLI11_PARSE(app, argc, argv);

    std::string label = "setup";
    try {
        if (gen->parsed()) {
            label = "gen-fixtures";
            cmd_gen_fixtures(fixture);
        } else if (run->parsed()) {
            if (!stage.empty()) label = stage;
            const RunConfig cfg = load_run_config(config_path);
            if (stage.empty())
                cmd_run_all(cfg);
            else
                run_stage(cfg, stage);
        } else {
            label = "report";
            cmd_report(run_dir, format, std::cout);
        }
    } catch (const StageError& e) {
        std::cerr << "stage=" << e.stage << " error=" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "stage=" << label << " error=" << e.what() << "\n";
        return 1;
    }
    return 0;
}
