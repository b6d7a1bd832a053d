// persic: command-line front end tying the library modules into
// reproducible experiment runs. Every command resolves its settings from an
// optional JSON config file plus flags (flags win), snapshots the resolved
// config into the output directory, and keeps timestamps out of every
// artifact except the sidecar run.log.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "persic/experiment.hpp"

namespace fs = std::filesystem;
using persic::Json;

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Output directory plus its timestamped sidecar log. All other artifacts in
// the directory are byte-stable for identical inputs and seed.
class OutDir {
public:
    explicit OutDir(const std::string& path) : dir_(path) {
        if (path.empty()) persic::fail("--out is required for this command");
        fs::create_directories(dir_);
        log_.open(dir_ / "run.log", std::ios::app);
        if (!log_) persic::fail("cannot open ", (dir_ / "run.log").string(), " for writing");
    }

    const fs::path& dir() const { return dir_; }

    void note(const std::string& line) {
        log_ << "[" << utc_now() << "] " << line << "\n";
        log_.flush();
    }

    void snapshot(const Json& resolved) {
        persic::write_json_file(dir_ / "resolved_config.json", resolved);
    }

    void write_json(const std::string& name, const Json& j) {
        persic::write_json_file(dir_ / name, j);
    }

    void write_text(const std::string& name, const std::string& body) {
        std::ofstream out(dir_ / name);
        if (!out) persic::fail("cannot open for writing: ", (dir_ / name).string());
        out << body;
    }

private:
    fs::path dir_;
    std::ofstream log_;
};

// Flags shared by every subcommand. seed/jobs overrides apply only when the
// flag was actually passed, so config-file values survive otherwise.
struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    bool json = false;
    int jobs = 1;
    CLI::App* sub = nullptr;

    void attach(CLI::App* s, bool with_jobs = false) {
        sub = s;
        s->add_option("--config", config_path, "JSON config file; flags override its values")
            ->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "top-level seed; all randomness derives from it");
        s->add_option("--out", out, "output directory (created if missing)");
        s->add_flag("--json", json, "print the machine-readable report to stdout");
        if (with_jobs)
            s->add_option("--jobs", jobs, "train models in up to this many parallel threads")
                ->check(CLI::PositiveNumber);
    }

    Json config() const {
        return config_path.empty() ? Json::object() : persic::read_json_file(config_path);
    }

    bool passed(const std::string& flag) const { return sub->count(flag) > 0; }

    persic::RunConfig run_config() const {
        persic::RunConfig cfg;
        cfg.apply_json(config());
        if (passed("--seed")) cfg.seed = seed;
        return cfg;
    }
};

struct LoadedExperiment {
    persic::InteractionDataset data;
    persic::FeaturePipeline pipeline;
    persic::FeatureStore store;
    persic::DatasetSplit split;
};

LoadedExperiment load_experiment(const std::string& data_dir, const std::string& pipeline_path,
                                 const persic::RunConfig& cfg) {
    LoadedExperiment ex;
    ex.data = persic::load_dataset(data_dir);
    ex.pipeline = persic::FeaturePipeline::load(pipeline_path);
    if (ex.pipeline.concept_dim() != ex.data.concept_dim())
        persic::fail("pipeline concept dim ", ex.pipeline.concept_dim(),
                     " does not match dataset concept dim ", ex.data.concept_dim());
    ex.store = persic::build_features(ex.pipeline, ex.data);
    ex.split = persic::split_dataset(ex.data, {cfg.train_fraction, cfg.seed});
    return ex;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void emit_report(const persic::RankingReport& report, OutDir& out, const std::string& stem,
                 bool as_json) {
    out.write_json(stem + ".json", report.to_json());
    out.write_text(stem + ".csv", report.to_csv());
    out.write_text(stem + ".txt", report.to_text());
    if (as_json)
        std::cout << report.to_json(false).dump(1) << "\n";
    else
        std::cout << report.to_text();
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const CommonFlags& flags) {
    Json cfg_json = flags.config();
    persic::SynthSpec spec;
    if (auto it = cfg_json.find("synth"); it != cfg_json.end())
        spec = persic::SynthSpec::from_json(*it);
    else if (!cfg_json.empty())
        spec = persic::SynthSpec::from_json(cfg_json);
    if (flags.passed("--seed")) spec.seed = flags.seed;

    OutDir out(flags.out);
    out.note("synth start");
    auto [data, truth] = persic::generate(spec);
    persic::save_dataset(data, out.dir());
    persic::write_json_file(out.dir() / "ground_truth.json", truth.to_json());
    persic::synth_lexicon(spec).save(out.dir() / "lexicon.json");
    Json resolved;
    resolved["command"] = "synth";
    resolved["synth"] = spec.to_json();
    out.snapshot(resolved);
    out.note("synth done");

    const auto stats = persic::dataset_stats(data);
    if (flags.json) {
        Json j = stats.to_json();
        j["out"] = out.dir().string();
        std::cout << j.dump(1) << "\n";
    } else {
        std::cout << stats.to_text();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// features

int cmd_features(const CommonFlags& flags, const std::string& data_dir,
                 const std::string& lexicon_path, int k_flag) {
    persic::RunConfig cfg = flags.run_config();
    if (k_flag > 0) cfg.lsa_k = k_flag;

    const auto data = persic::load_dataset(data_dir);
    persic::CategoryLexicon lex;
    std::string lex_source;
    if (!lexicon_path.empty()) {
        lex = persic::CategoryLexicon::load(lexicon_path);
        lex_source = lexicon_path;
    } else if (fs::exists(fs::path(data_dir) / "lexicon.json")) {
        lex_source = (fs::path(data_dir) / "lexicon.json").string();
        lex = persic::CategoryLexicon::load(lex_source);
    } else {
        lex = persic::builtin_demo_lexicon();
        lex_source = "builtin";
    }
    persic::log_info("using lexicon: ", lex_source);

    OutDir out(flags.out);
    out.note("features start");
    const auto pipeline = persic::FeaturePipeline::fit(data, std::move(lex), cfg.lsa_k);
    pipeline.save(out.dir() / "pipeline.json");

    const auto store = persic::build_features(pipeline, data);
    persic::Mat users(store.users.empty() ? 0 : store.users[0].concat().size(),
                      store.users.size());
    for (std::size_t i = 0; i < store.users.size(); ++i)
        users.col(static_cast<Eigen::Index>(i)) = store.users[i].concat();
    Json uj;
    uj["kind"] = "user_features";
    uj["features"] = persic::mat_to_json(users);
    out.write_json("user_features.json", uj);
    Json pj;
    pj["kind"] = "post_features";
    pj["features"] = persic::mat_to_json(persic::post_input_matrix(store));
    out.write_json("post_features.json", pj);

    Json resolved;
    resolved["command"] = "features";
    resolved["data"] = data_dir;
    resolved["lexicon"] = lex_source;
    resolved["lsa_k"] = cfg.lsa_k;
    out.snapshot(resolved);
    out.note("features done");

    Json summary;
    summary["k"] = pipeline.k();
    summary["vocabulary"] = pipeline.tfidf().vocab_size();
    summary["categories"] = pipeline.n_categories();
    summary["user_dim"] = pipeline.user_dim();
    summary["post_dim"] = pipeline.post_dim();
    if (flags.json)
        std::cout << summary.dump(1) << "\n";
    else
        std::cout << "fitted pipeline: k=" << pipeline.k()
                  << " vocab=" << pipeline.tfidf().vocab_size()
                  << " user_dim=" << pipeline.user_dim()
                  << " post_dim=" << pipeline.post_dim() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const CommonFlags& flags, const std::string& data_dir,
              const std::string& pipeline_path, const std::string& model_name,
              const std::string& ablation_name) {
    persic::RunConfig cfg = flags.run_config();
    auto ex = load_experiment(data_dir, pipeline_path, cfg);

    OutDir out(flags.out);
    out.note("train start: model=" + model_name);
    persic::AnyModel model{persic::LatentFactorModel{}};
    persic::TrainResult trace;
    if (model_name == "persic") {
        const persic::Ablation ab = persic::ablation_from_name(ablation_name);
        persic::PersicConfig pc{ab, cfg.d_p};
        persic::TrainConfig tc = cfg.train;
        tc.seed = persic::derive_seed(cfg.seed, "model.persic");
        auto m = persic::init_persic(ex.pipeline, ex.data, pc, tc.seed);
        trace = persic::train_persic(m, ex.data, ex.split, ex.store, tc);
        model = persic::AnyModel{std::move(m)};
    } else {
        auto [m, t] = persic::train_model(model_name, ex.data, ex.split, ex.store, ex.pipeline,
                                          cfg);
        model = std::move(m);
        trace = std::move(t);
    }
    out.note("train done");

    Json meta;
    meta["model"] = model_name;
    if (model_name == "persic") meta["ablation"] = ablation_name;
    meta["objective_trace"] = trace.objective_trace;
    persic::save_checkpoint(out.dir() / "checkpoint.json", model, ex.pipeline.checksum(), meta);

    std::ostringstream csv;
    csv << "epoch,objective\n" << std::setprecision(17);
    for (std::size_t e = 0; e < trace.objective_trace.size(); ++e)
        csv << (e + 1) << "," << trace.objective_trace[e] << "\n";
    out.write_text("trace.csv", csv.str());

    Json resolved;
    resolved["command"] = "train";
    resolved["data"] = data_dir;
    resolved["pipeline"] = pipeline_path;
    resolved["model"] = model_name;
    if (model_name == "persic") resolved["ablation"] = ablation_name;
    resolved["config"] = cfg.to_json();
    out.snapshot(resolved);

    Json summary;
    summary["model"] = model_name;
    summary["epochs"] = trace.objective_trace.size();
    if (!trace.objective_trace.empty())
        summary["final_objective"] = trace.objective_trace.back();
    summary["checkpoint"] = (out.dir() / "checkpoint.json").string();
    if (flags.json)
        std::cout << summary.dump(1) << "\n";
    else
        std::cout << "trained " << model_name << " for " << trace.objective_trace.size()
                  << " epochs; checkpoint at " << (out.dir() / "checkpoint.json").string()
                  << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const CommonFlags& flags, const std::string& data_dir,
             const std::string& pipeline_path, const std::string& checkpoint_path) {
    persic::RunConfig cfg = flags.run_config();
    auto ex = load_experiment(data_dir, pipeline_path, cfg);
    auto loaded = persic::load_checkpoint(checkpoint_path);
    if (loaded.pipeline_checksum != 0 && loaded.pipeline_checksum != ex.pipeline.checksum())
        persic::fail("checkpoint ", checkpoint_path,
                     " was trained against a different feature pipeline (checksum mismatch)");

    OutDir out(flags.out);
    out.note("eval start: checkpoint=" + checkpoint_path);
    persic::EvalOptions opt;
    opt.cutoffs = cfg.cutoffs;
    persic::RankingReport report;
    report.rows.push_back(persic::evaluate_any(loaded.model_kind, loaded.model, ex.data,
                                               ex.split, ex.store, opt));
    report.config = cfg.to_json();
    report.config["checkpoint"] = checkpoint_path;

    Json resolved;
    resolved["command"] = "eval";
    resolved["data"] = data_dir;
    resolved["pipeline"] = pipeline_path;
    resolved["checkpoint"] = checkpoint_path;
    resolved["config"] = cfg.to_json();
    out.snapshot(resolved);
    emit_report(report, out, "report", flags.json);
    out.note("eval done");
    return 0;
}

// ---------------------------------------------------------------------------
// ablate / compare

int cmd_ablate(const CommonFlags& flags, const std::string& data_dir,
               const std::string& pipeline_path, const std::string& ablation_list) {
    persic::RunConfig cfg = flags.run_config();
    auto ex = load_experiment(data_dir, pipeline_path, cfg);
    std::vector<persic::Ablation> ablations;
    for (const auto& name : split_csv_list(ablation_list))
        ablations.push_back(persic::ablation_from_name(name));

    OutDir out(flags.out);
    out.note("ablate start");
    auto report = persic::run_ablation(ex.data, ex.split, ex.store, ex.pipeline, ablations, cfg,
                                       flags.jobs);
    Json resolved;
    resolved["command"] = "ablate";
    resolved["data"] = data_dir;
    resolved["pipeline"] = pipeline_path;
    resolved["config"] = report.config;
    out.snapshot(resolved);
    emit_report(report, out, "ablation", flags.json);
    out.note("ablate done");
    return 0;
}

int cmd_compare(const CommonFlags& flags, const std::string& data_dir,
                const std::string& pipeline_path, const std::string& model_list) {
    persic::RunConfig cfg = flags.run_config();
    auto ex = load_experiment(data_dir, pipeline_path, cfg);
    const auto names = split_csv_list(model_list);

    OutDir out(flags.out);
    out.note("compare start");
    auto report = persic::compare_models(ex.data, ex.split, ex.store, ex.pipeline, names, cfg,
                                         flags.jobs);
    Json resolved;
    resolved["command"] = "compare";
    resolved["data"] = data_dir;
    resolved["pipeline"] = pipeline_path;
    resolved["config"] = report.config;
    out.snapshot(resolved);
    emit_report(report, out, "compare", flags.json);
    out.note("compare done");
    return 0;
}

// ---------------------------------------------------------------------------
// traits / stats

int cmd_traits(const CommonFlags& flags, const std::string& data_dir, int top_n) {
    const auto data = persic::load_dataset(data_dir);
    const auto report = persic::trait_concept_correlation(data, top_n);
    if (!flags.out.empty()) {
        OutDir out(flags.out);
        out.note("traits start");
        Json resolved;
        resolved["command"] = "traits";
        resolved["data"] = data_dir;
        resolved["top"] = top_n;
        out.snapshot(resolved);
        out.write_json("traits.json", report.to_json());
        out.write_text("traits.txt", report.to_text());
        out.note("traits done");
    }
    if (flags.json)
        std::cout << report.to_json().dump(1) << "\n";
    else
        std::cout << report.to_text();
    return 0;
}

int cmd_stats(const CommonFlags& flags, const std::string& data_dir) {
    const auto data = persic::load_dataset(data_dir);
    const auto stats = persic::dataset_stats(data);
    if (!flags.out.empty()) {
        OutDir out(flags.out);
        Json resolved;
        resolved["command"] = "stats";
        resolved["data"] = data_dir;
        out.snapshot(resolved);
        out.write_json("stats.json", stats.to_json());
    }
    if (flags.json)
        std::cout << stats.to_json().dump(1) << "\n";
    else
        std::cout << stats.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persic: personality-driven multi-view content recommendation toolkit"};
    app.require_subcommand(1);

    CommonFlags f_synth, f_feat, f_train, f_eval, f_ablate, f_compare, f_traits, f_stats;
    std::string feat_data, feat_lexicon;
    int feat_k = 0;
    std::string train_data, train_pipeline, train_model = "persic",
                train_ablation = "posts_likes_pers";
    std::string eval_data, eval_pipeline, eval_checkpoint;
    std::string abl_data, abl_pipeline,
        abl_list = "onehot,posts,likes,posts_likes,posts_pers,posts_likes_pers";
    std::string cmp_data, cmp_pipeline, cmp_list = "mf,fm,neucf,bivae,pcd,persic";
    std::string traits_data, stats_data;
    int traits_top = 10;

    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
    f_synth.attach(s_synth);

    auto* s_feat = app.add_subcommand("features", "Fit the feature pipeline and emit bundles");
    f_feat.attach(s_feat);
    s_feat->add_option("--data", feat_data, "dataset directory")->required();
    s_feat->add_option("--lexicon", feat_lexicon,
                       "category lexicon JSON (default: <data>/lexicon.json, else builtin)");
    s_feat->add_option("--k", feat_k, "latent semantic dimensions")->check(CLI::PositiveNumber);

    auto* s_train = app.add_subcommand("train", "Train one model and write a checkpoint");
    f_train.attach(s_train);
    s_train->add_option("--data", train_data, "dataset directory")->required();
    s_train->add_option("--pipeline", train_pipeline, "fitted pipeline JSON")->required();
    s_train->add_option("--model", train_model, "mf, fm, neucf, bivae, pcd, or persic");
    s_train->add_option("--ablation", train_ablation,
                        "persic feature subset: onehot, posts, likes, posts_likes, posts_pers, "
                        "posts_likes_pers");

    auto* s_eval = app.add_subcommand("eval", "Evaluate a checkpoint on ranking metrics");
    f_eval.attach(s_eval);
    s_eval->add_option("--data", eval_data, "dataset directory")->required();
    s_eval->add_option("--pipeline", eval_pipeline, "fitted pipeline JSON")->required();
    s_eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint JSON")->required();

    auto* s_ablate = app.add_subcommand("ablate", "Train and evaluate PersiC feature subsets");
    f_ablate.attach(s_ablate, true);
    s_ablate->add_option("--data", abl_data, "dataset directory")->required();
    s_ablate->add_option("--pipeline", abl_pipeline, "fitted pipeline JSON")->required();
    s_ablate->add_option("--ablations", abl_list, "comma-separated feature subsets");

    auto* s_compare = app.add_subcommand("compare", "Train and evaluate a list of models");
    f_compare.attach(s_compare, true);
    s_compare->add_option("--data", cmp_data, "dataset directory")->required();
    s_compare->add_option("--pipeline", cmp_pipeline, "fitted pipeline JSON")->required();
    s_compare->add_option("--models", cmp_list, "comma-separated model names");

    auto* s_traits = app.add_subcommand("traits", "Correlate trait poles with content concepts");
    f_traits.attach(s_traits);
    s_traits->add_option("--data", traits_data, "dataset directory")->required();
    s_traits->add_option("--top", traits_top, "concepts reported per pole")
        ->check(CLI::PositiveNumber);

    auto* s_stats = app.add_subcommand("stats", "Summarize a dataset bundle");
    f_stats.attach(s_stats);
    s_stats->add_option("--data", stats_data, "dataset directory")->required();

    try {
        app.parse(argc, argv);
        if (s_synth->parsed()) return cmd_synth(f_synth);
        if (s_feat->parsed()) return cmd_features(f_feat, feat_data, feat_lexicon, feat_k);
        if (s_train->parsed())
            return cmd_train(f_train, train_data, train_pipeline, train_model, train_ablation);
        if (s_eval->parsed()) return cmd_eval(f_eval, eval_data, eval_pipeline, eval_checkpoint);
        if (s_ablate->parsed()) return cmd_ablate(f_ablate, abl_data, abl_pipeline, abl_list);
        if (s_compare->parsed())
            return cmd_compare(f_compare, cmp_data, cmp_pipeline, cmp_list);
        if (s_traits->parsed()) return cmd_traits(f_traits, traits_data, traits_top);
        if (s_stats->parsed()) return cmd_stats(f_stats, stats_data);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const persic::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
