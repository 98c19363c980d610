#include "polarlens/common.hpp"
#include "polarlens/pipeline.hpp"
#include "polarlens/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace polarlens;

struct CommonOpts {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    bool stub_providers = false;
    bool resume = false;
};

void attach_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "pipeline config TOML")->required();
    cmd->add_option("--out", o.out, "output directory (overrides out_dir)");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--set", o.sets, "dotted.key=value config override (repeatable)");
    cmd->add_flag("--stub-providers", o.stub_providers,
                  "force deterministic stub scorer/embedder");
    cmd->add_flag("--resume", o.resume, "skip stages whose outputs already exist");
}

int run_stages(const CommonOpts& o, const std::vector<Stage>& stages) {
    std::vector<std::string> overrides = o.sets;
    if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
    if (!o.out.empty()) overrides.push_back("out_dir=" + o.out);
    if (o.stub_providers) overrides.push_back("providers.mode=stub");
    auto cfg = load_pipeline_config(o.config, overrides);
    run_pipeline(cfg, stages, o.resume);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polarlens: polarization and toxicity analytics over tweet corpora"};
    app.require_subcommand(1);

    struct StageCmd {
        const char* name;
        const char* help;
        std::vector<Stage> stages;
    };
    const StageCmd stage_cmds[] = {
        {"ingest", "load and normalize the corpus", {Stage::ingest}},
        {"score", "fill in missing toxicity scores", {Stage::score}},
        {"ideology", "3-stage correspondence-analysis ideology scores", {Stage::ideology}},
        {"cluster", "DP-means clustering of toxic tweets", {Stage::cluster}},
        {"topics", "topic keywords, stats, monthly series and waves", {Stage::topics}},
        {"graph", "mention graph, aggregates and assortativity", {Stage::graph}},
        {"gam", "user-level and topic-month GAM fits", {Stage::gam}},
        {"report", "aggregate summary report", {Stage::report}},
        {"run", "run the full pipeline", all_stages()},
    };

    std::vector<std::pair<CommonOpts, std::vector<Stage>>> bound;
    bound.reserve(std::size(stage_cmds));
    std::vector<CLI::App*> cmds;
    for (const auto& sc : stage_cmds) {
        bound.emplace_back(CommonOpts{}, sc.stages);
        auto* cmd = app.add_subcommand(sc.name, sc.help);
        attach_common(cmd, bound.back().first);
        cmds.push_back(cmd);
    }

    SynthParams synth;
    std::string synth_out;
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus with ground truth");
    gen->add_option("--out", synth_out, "output directory")->required();
    gen->add_option("--seed", synth.seed, "generator seed");
    gen->add_option("--users", synth.n_users, "number of regular users");
    gen->add_option("--tweets", synth.n_tweets, "number of tweets");
    gen->add_option("--topics", synth.n_topics, "number of planted topics");
    gen->add_option("--waves", synth.n_wave_topics, "number of planted wave topics");
    gen->add_option("--wave-share", synth.wave_share, "mention share inside wave topics");
    gen->add_option("--drift-right", synth.drift_right_share,
                    "share of non-wave topics drifting rightward");
    gen->add_option("--months", synth.n_months, "window length in months");
    gen->add_option("--dim", synth.embedding_dim, "embedding dimension");
    gen->add_option("--blob-noise", synth.blob_noise, "embedding noise scale");
    gen->add_option("--elites-per-side", synth.elites_per_side, "seed elites per bloc");
    gen->add_option("--candidates-per-side", synth.candidates_per_side,
                    "expansion candidates per bloc");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            gen_synthetic(synth, synth_out);
            std::printf("wrote synthetic corpus to %s\n", synth_out.c_str());
            return 0;
        }
        for (std::size_t i = 0; i < cmds.size(); ++i)
            if (cmds[i]->parsed()) return run_stages(bound[i].first, bound[i].second);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
