#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "persic/bivae.hpp"
#include "persic/eval.hpp"
#include "persic/mf.hpp"
#include "persic/neucf.hpp"
#include "persic/pcd.hpp"
#include "persic/persic_model.hpp"
#include "persic/synth.hpp"

namespace persic {

inline const std::vector<std::string> kModelNames{"mf", "fm", "neucf", "bivae", "pcd", "persic"};

using AnyModel = std::variant<LatentFactorModel, NeucfModel, BivaeModel, PcdModel, PersicModel>;

// Settings for one experiment run; JSON-overridable so the CLI config file
// and flags share one schema.
struct RunConfig {
    double train_fraction = 0.8;
    int lsa_k = 100;
    int d_p = 512;
    TrainConfig train;
    LatentFactorConfig mf{32, false};
    LatentFactorConfig fm{32, true};
    NeucfConfig neucf;
    BivaeConfig bivae;
    PcdConfig pcd;
    std::vector<int> cutoffs{10, 50};
    std::uint64_t seed = 0;

    void apply_json(const Json& j) {
        auto get = [&](const Json& obj, const char* name, auto& field) {
            if (auto it = obj.find(name); it != obj.end())
                field = it->get<std::decay_t<decltype(field)>>();
        };
        get(j, "train_fraction", train_fraction);
        get(j, "lsa_k", lsa_k);
        get(j, "d_p", d_p);
        get(j, "cutoffs", cutoffs);
        get(j, "seed", seed);
        if (auto it = j.find("train"); it != j.end()) {
            get(*it, "epochs", train.epochs);
            get(*it, "batch_size", train.batch_size);
            get(*it, "negatives_per_positive", train.negatives_per_positive);
            get(*it, "learning_rate", train.learning_rate);
            get(*it, "weight_decay", train.weight_decay);
            get(*it, "dropout_rate", train.dropout_rate);
        }
        if (auto it = j.find("mf"); it != j.end()) get(*it, "dim", mf.dim);
        if (auto it = j.find("fm"); it != j.end()) get(*it, "dim", fm.dim);
        if (auto it = j.find("neucf"); it != j.end()) {
            get(*it, "dim", neucf.dim);
            get(*it, "layers", neucf.layers);
        }
        if (auto it = j.find("bivae"); it != j.end()) {
            get(*it, "latent_dim", bivae.latent_dim);
            get(*it, "hidden", bivae.hidden);
            get(*it, "epochs", bivae.epochs);
            get(*it, "batch_size", bivae.batch_size);
            get(*it, "learning_rate", bivae.learning_rate);
        }
        if (auto it = j.find("pcd"); it != j.end()) {
            get(*it, "n_assoc", pcd.n_assoc);
            get(*it, "latent_dim", pcd.latent_dim);
            get(*it, "hidden", pcd.hidden);
            get(*it, "margin", pcd.margin);
            get(*it, "alpha", pcd.alpha);
            get(*it, "beta", pcd.beta);
        }
        mf.fm = false;
        fm.fm = true;
    }

    Json to_json() const {
        Json j;
        j["train_fraction"] = train_fraction;
        j["lsa_k"] = lsa_k;
        j["d_p"] = d_p;
        j["train"] = {{"epochs", train.epochs},
                      {"batch_size", train.batch_size},
                      {"negatives_per_positive", train.negatives_per_positive},
                      {"learning_rate", train.learning_rate},
                      {"weight_decay", train.weight_decay},
                      {"dropout_rate", train.dropout_rate}};
        j["mf"] = {{"dim", mf.dim}};
        j["fm"] = {{"dim", fm.dim}};
        j["neucf"] = {{"dim", neucf.dim}, {"layers", neucf.layers}};
        j["bivae"] = {{"latent_dim", bivae.latent_dim},
                      {"hidden", bivae.hidden},
                      {"epochs", bivae.epochs},
                      {"batch_size", bivae.batch_size},
                      {"learning_rate", bivae.learning_rate}};
        j["pcd"] = {{"n_assoc", pcd.n_assoc},   {"latent_dim", pcd.latent_dim},
                    {"hidden", pcd.hidden},     {"margin", pcd.margin},
                    {"alpha", pcd.alpha},       {"beta", pcd.beta}};
        j["cutoffs"] = cutoffs;
        j["seed"] = seed;
        return j;
    }
};

inline Mat post_input_matrix(const FeatureStore& store) {
    if (store.posts.empty()) fail("feature store has no posts");
    Mat m(store.posts[0].concat().size(), store.posts.size());
    for (std::size_t p = 0; p < store.posts.size(); ++p)
        m.col(static_cast<Eigen::Index>(p)) = store.posts[p].concat();
    return m;
}

// Trains the named model on the train split. Each model draws its own seed
// substream from cfg.seed, so model lists stay reproducible independently of
// execution order.
inline std::pair<AnyModel, TrainResult> train_model(const std::string& name,
                                                    const InteractionDataset& data,
                                                    const DatasetSplit& split,
                                                    const FeatureStore& store,
                                                    const FeaturePipeline& pipeline,
                                                    const RunConfig& cfg) {
    const std::uint64_t seed = derive_seed(cfg.seed, "model." + name);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    if (name == "mf" || name == "fm") {
        auto m = LatentFactorModel::init(data.n_users(), data.n_posts(),
                                         name == "fm" ? cfg.fm : cfg.mf, seed);
        auto trace = train_latent_factor(m, data, split, tc);
        return {AnyModel{std::move(m)}, std::move(trace)};
    }
    if (name == "neucf") {
        auto m = NeucfModel::init(data.n_users(), data.n_posts(), cfg.neucf, seed);
        auto trace = train_neucf(m, data, split, tc);
        return {AnyModel{std::move(m)}, std::move(trace)};
    }
    if (name == "bivae") {
        BivaeConfig bc = cfg.bivae;
        bc.seed = seed;
        auto m = BivaeModel::init(data.n_users(), data.n_posts(), bc, seed);
        const Mat x = interaction_matrix(data.n_users(), data.n_posts(), split.train);
        auto trace = train_bivae(m, x, bc);
        return {AnyModel{std::move(m)}, std::move(trace)};
    }
    if (name == "pcd") {
        auto m = PcdModel::init(data.n_users(), static_cast<int>(pipeline.post_dim()), cfg.pcd,
                                seed);
        const Mat posts = post_input_matrix(store);
        auto trace = train_pcd(m, data, split, posts, tc);
        return {AnyModel{std::move(m)}, std::move(trace)};
    }
    if (name == "persic") {
        PersicConfig pc{Ablation::kPostsLikesPers, cfg.d_p};
        auto m = init_persic(pipeline, data, pc, seed);
        auto trace = train_persic(m, data, split, store, tc);
        return {AnyModel{std::move(m)}, std::move(trace)};
    }
    fail("unknown model \"", name, "\"; expected one of mf, fm, neucf, bivae, pcd, persic");
}

// Uniform (user, post) scorer over dataset indices. Precomputes latents
// where the model has a feature tower.
inline std::function<double(int, int)> make_scorer(const AnyModel& model,
                                                   const FeatureStore& store) {
    if (const auto* m = std::get_if<LatentFactorModel>(&model))
        return [m](int u, int i) { return m->score(u, i); };
    if (const auto* m = std::get_if<NeucfModel>(&model)) {
        // one batched tower forward per user instead of one per candidate
        auto scores = std::make_shared<Mat>(m->n_users(), m->n_items());
        std::vector<std::pair<int, int>> pairs(m->n_items());
        for (int u = 0; u < m->n_users(); ++u) {
            for (int i = 0; i < m->n_items(); ++i) pairs[i] = {u, i};
            scores->row(u) = m->forward_pairs(pairs, nullptr).row(0);
        }
        return [scores](int u, int i) { return (*scores)(u, i); };
    }
    if (const auto* m = std::get_if<BivaeModel>(&model))
        return [m](int u, int i) { return m->score(u, i); };
    if (const auto* m = std::get_if<PcdModel>(&model)) {
        auto post_lat = std::make_shared<Mat>(m->post_latents(post_input_matrix(store)));
        auto user_lat = std::make_shared<Mat>(m->config().latent_dim, m->n_users());
        for (int u = 0; u < m->n_users(); ++u) user_lat->col(u) = m->user_vector(u);
        return [post_lat, user_lat](int u, int i) {
            return PcdModel::cosine(user_lat->col(u), post_lat->col(i));
        };
    }
    const auto& m = std::get<PersicModel>(model);
    auto user_lat = std::make_shared<Mat>(m.user_latents(store));
    auto post_lat = std::make_shared<Mat>(m.post_latents(store));
    return [user_lat, post_lat](int u, int i) {
        return user_lat->col(u).dot(post_lat->col(i));
    };
}

inline RankingRow evaluate_any(const std::string& name, const AnyModel& model,
                               const InteractionDataset& data, const DatasetSplit& split,
                               const FeatureStore& store, const EvalOptions& opt) {
    return evaluate_scores(name, data, split, make_scorer(model, store), opt);
}

namespace detail {

template <class Task>
std::vector<RankingRow> run_rows(const std::vector<Task>& tasks, int jobs) {
    std::vector<RankingRow> rows(tasks.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) rows[i] = tasks[i]();
        return rows;
    }
    std::vector<std::future<RankingRow>> futures;
    futures.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i)
        futures.push_back(std::async(std::launch::async, tasks[i]));
    for (std::size_t i = 0; i < tasks.size(); ++i) rows[i] = futures[i].get();
    return rows;
}

}  // namespace detail

// Table-2-shaped comparison: one row per model name, all trained on the same
// split with per-model seed substreams.
inline RankingReport compare_models(const InteractionDataset& data, const DatasetSplit& split,
                                    const FeatureStore& store, const FeaturePipeline& pipeline,
                                    const std::vector<std::string>& names, const RunConfig& cfg,
                                    int jobs = 1) {
    if (names.empty()) fail("model list is empty");
    using Task = std::function<RankingRow()>;
    std::vector<Task> tasks;
    EvalOptions opt;
    opt.cutoffs = cfg.cutoffs;
    for (const auto& name : names)
        tasks.push_back([&, name]() {
            auto [model, trace] = train_model(name, data, split, store, pipeline, cfg);
            return evaluate_any(name, model, data, split, store, opt);
        });
    RankingReport report;
    report.rows = detail::run_rows(tasks, jobs);
    report.config = cfg.to_json();
    report.config["models"] = names;
    return report;
}

// Table-3-shaped ablation study: one PersiC variant per feature subset,
// trained under identical seed and config.
inline RankingReport run_ablation(const InteractionDataset& data, const DatasetSplit& split,
                                  const FeatureStore& store, const FeaturePipeline& pipeline,
                                  const std::vector<Ablation>& ablations, const RunConfig& cfg,
                                  int jobs = 1) {
    if (ablations.empty()) fail("ablation list is empty");
    const std::uint64_t seed = derive_seed(cfg.seed, "model.persic");
    using Task = std::function<RankingRow()>;
    std::vector<Task> tasks;
    EvalOptions opt;
    opt.cutoffs = cfg.cutoffs;
    for (Ablation ab : ablations)
        tasks.push_back([&, ab]() {
            PersicConfig pc{ab, cfg.d_p};
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            PersicModel m = init_persic(pipeline, data, pc, seed);
            train_persic(m, data, split, store, tc);
            return evaluate_any(ablation_name(ab), AnyModel{std::move(m)}, data, split, store,
                                opt);
        });
    RankingReport report;
    report.rows = detail::run_rows(tasks, jobs);
    report.config = cfg.to_json();
    Json abl = Json::array();
    for (Ablation ab : ablations) abl.push_back(ablation_name(ab));
    report.config["ablations"] = std::move(abl);
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON format for every model, tagged by model_kind and
// carrying the feature-pipeline checksum it was trained against.

inline void save_checkpoint(const std::filesystem::path& path, const AnyModel& model,
                            std::uint64_t pipeline_checksum, const Json& train_meta = {}) {
    Json j = std::visit([](const auto& m) { return m.to_json(); }, model);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(pipeline_checksum));
    j["pipeline_checksum"] = buf;
    if (!train_meta.is_null()) j["train"] = train_meta;
    write_json_file(path, j);
}

inline AnyModel model_from_json(const Json& j) {
    const auto kind = j.at("model_kind").get<std::string>();
    if (kind == "mf" || kind == "fm") return LatentFactorModel::from_json(j);
    if (kind == "neucf") return NeucfModel::from_json(j);
    if (kind == "bivae") return BivaeModel::from_json(j);
    if (kind == "pcd") return PcdModel::from_json(j);
    if (kind == "persic") return PersicModel::from_json(j);
    fail("unknown model_kind \"", kind, "\" in checkpoint");
}

struct LoadedCheckpoint {
    AnyModel model;
    std::string model_kind;
    std::uint64_t pipeline_checksum = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail("missing checkpoint: ", path.string());
    const Json j = read_json_file(path);
    if (j.at("format_version").get<int>() != 1) fail("unsupported checkpoint format_version");
    LoadedCheckpoint out{model_from_json(j), j.at("model_kind").get<std::string>(), 0};
    if (auto it = j.find("pipeline_checksum"); it != j.end())
        out.pipeline_checksum = std::stoull(it->get<std::string>(), nullptr, 16);
    return out;
}

}  // namespace persic
