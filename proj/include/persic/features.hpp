#pragma once

#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "persic/dataset.hpp"
#include "persic/lexicon.hpp"
#include "persic/lsa.hpp"
#include "persic/tfidf.hpp"

namespace persic {

inline Vec mean_concepts(const std::vector<Vec>& vectors, int concept_dim) {
    Vec out = Vec::Zero(concept_dim);
    if (vectors.empty()) return out;
    for (const auto& v : vectors) {
        if (v.size() != concept_dim)
            fail("concept vector length ", v.size(), " differs from expected ", concept_dim);
        out += v;
    }
    return out / static_cast<double>(vectors.size());
}

// User-side features: k-dim text embeddings, mean concept distributions and
// lexicon category rates for both the timeline and liked-post sources, plus
// the 12 personality activations. Concatenation order matches field order.
struct UserFeatureBundle {
    Vec t_p, i_p, t_l, i_l, l_p, l_l, pers;

    Vec concat() const {
        Vec out(t_p.size() + i_p.size() + t_l.size() + i_l.size() + l_p.size() + l_l.size() +
                pers.size());
        Eigen::Index at = 0;
        for (const Vec* part : {&t_p, &i_p, &t_l, &i_l, &l_p, &l_l, &pers}) {
            out.segment(at, part->size()) = *part;
            at += part->size();
        }
        return out;
    }
};

struct PostFeatureBundle {
    Vec t_b, i_b;

    Vec concat() const {
        Vec out(t_b.size() + i_b.size());
        out << t_b, i_b;
        return out;
    }
};

inline std::string join_texts(const std::vector<std::string>& texts) {
    std::string doc;
    for (const auto& t : texts) {
        if (!doc.empty()) doc += ' ';
        doc += t;
    }
    return doc;
}

// One fitted tf-idf + LSA text space shared by timeline, liked and post
// texts, plus the lexicon and concept dimensions. Immutable once fitted;
// transform calls are safe to run concurrently.
class FeaturePipeline {
public:
    FeaturePipeline() = default;

    static FeaturePipeline fit(const InteractionDataset& data, CategoryLexicon lex, int k,
                               const TokenizerSettings& settings = {}) {
        FeaturePipeline p;
        p.lex_ = std::move(lex);
        p.concept_dim_ = data.concept_dim();

        std::vector<std::string> corpus;
        corpus.reserve(data.posts().size() + 2 * data.users().size());
        for (const auto& post : data.posts()) corpus.push_back(post.text);
        for (const auto& u : data.users()) {
            corpus.push_back(join_texts(u.timeline_texts));
            corpus.push_back(join_texts(u.liked_texts));
        }
        p.tfidf_ = fit_tfidf(corpus, settings);

        std::vector<SparseVec> rows;
        rows.reserve(corpus.size());
        for (const auto& doc : corpus) rows.push_back(p.tfidf_.transform(doc));
        p.lsa_ = fit_lsa(rows, p.tfidf_.vocab_size(), k);
        return p;
    }

    int k() const { return lsa_.k; }
    int concept_dim() const { return concept_dim_; }
    int n_categories() const { return lex_.n_categories(); }
    int user_dim() const { return 2 * k() + 2 * concept_dim_ + 2 * n_categories() + kPersDim; }
    int post_dim() const { return k() + concept_dim_; }

    const TfidfModel& tfidf() const { return tfidf_; }
    const LsaModel& lsa() const { return lsa_; }
    const CategoryLexicon& lexicon() const { return lex_; }

    Vec embed_text(const std::string& doc) const { return lsa_.transform(tfidf_.transform(doc)); }

    UserFeatureBundle user_bundle(const UserRecord& u) const {
        UserFeatureBundle b;
        b.t_p = embed_text(join_texts(u.timeline_texts));
        b.i_p = mean_concepts(u.timeline_concepts, concept_dim_);
        b.t_l = embed_text(join_texts(u.liked_texts));
        b.i_l = mean_concepts(u.liked_concepts, concept_dim_);
        b.l_p = lex_.features(u.timeline_texts, tfidf_.tokenizer);
        b.l_l = lex_.features(u.liked_texts, tfidf_.tokenizer);
        b.pers = u.pers;
        return b;
    }

    PostFeatureBundle post_bundle(const PostRecord& post) const {
        PostFeatureBundle b;
        b.t_b = embed_text(post.text);
        b.i_b = post.concepts;
        return b;
    }

    // Stable fingerprint of the fitted state; embedded in model checkpoints
    // so a checkpoint cannot silently be applied with a different pipeline.
    std::uint64_t checksum() const { return fnv1a64(core_json().dump()); }

    Json to_json() const {
        Json j = core_json();
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(checksum()));
        j["checksum"] = buf;
        return j;
    }

    static FeaturePipeline from_json(const Json& j) {
        if (detail::require(j, "format_version", "feature pipeline").get<int>() != 1)
            fail("unsupported feature pipeline format_version");
        FeaturePipeline p;
        p.tfidf_.tokenizer.lowercase = j.at("tokenizer").at("lowercase").get<bool>();
        p.tfidf_.tokenizer.strip_urls = j.at("tokenizer").at("strip_urls").get<bool>();
        p.tfidf_.tokenizer.strip_mentions = j.at("tokenizer").at("strip_mentions").get<bool>();
        p.tfidf_.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        p.tfidf_.idf = vec_from_json(j.at("idf"));
        if (p.tfidf_.idf.size() != static_cast<Eigen::Index>(p.tfidf_.vocabulary.size()))
            fail("feature pipeline: idf length does not match vocabulary");
        p.tfidf_.rebuild_index();
        p.lsa_.projection = mat_from_json(j.at("projection"));
        p.lsa_.singular_values = vec_from_json(j.at("singular_values"));
        p.lsa_.k = static_cast<int>(p.lsa_.projection.cols());
        p.concept_dim_ = j.at("concept_dim").get<int>();
        p.lex_ = CategoryLexicon::from_json(j.at("lexicon"));
        if (auto it = j.find("checksum"); it != j.end()) {
            char buf[17];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(p.checksum()));
            if (it->get<std::string>() != buf)
                fail("feature pipeline checksum mismatch: file is corrupt or hand-edited");
        }
        return p;
    }

    void save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }
    static FeaturePipeline load(const std::filesystem::path& path) {
        return from_json(read_json_file(path));
    }

private:
    Json core_json() const {
        Json j;
        j["format_version"] = 1;
        j["kind"] = "feature_pipeline";
        j["tokenizer"] = {{"lowercase", tfidf_.tokenizer.lowercase},
                          {"strip_urls", tfidf_.tokenizer.strip_urls},
                          {"strip_mentions", tfidf_.tokenizer.strip_mentions}};
        j["vocabulary"] = tfidf_.vocabulary;
        j["idf"] = vec_to_json(tfidf_.idf);
        j["projection"] = mat_to_json(lsa_.projection);
        j["singular_values"] = vec_to_json(lsa_.singular_values);
        j["concept_dim"] = concept_dim_;
        j["lexicon"] = lex_.to_json();
        return j;
    }

    TfidfModel tfidf_;
    LsaModel lsa_;
    CategoryLexicon lex_;
    int concept_dim_ = 0;
};

// Every bundle for a dataset, aligned to its user/post indices.
struct FeatureStore {
    std::vector<UserFeatureBundle> users;
    std::vector<PostFeatureBundle> posts;
};

inline FeatureStore build_features(const FeaturePipeline& pipeline, const InteractionDataset& data) {
    FeatureStore store;
    store.users.reserve(data.users().size());
    store.posts.reserve(data.posts().size());
    for (const auto& u : data.users()) store.users.push_back(pipeline.user_bundle(u));
    for (const auto& post : data.posts()) store.posts.push_back(pipeline.post_bundle(post));
    return store;
}

}  // namespace persic
