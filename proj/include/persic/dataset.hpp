#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "persic/rng.hpp"
#include "persic/serde.hpp"

namespace persic {

// ---------------------------------------------------------------------------
// Records

// Four binary trait pairs: Extroversion/Introversion, Sensing/iNtuition,
// Thinking/Feeling, Judging/Perceiving. Stored as the first pole of each pair.
struct MbtiTraits {
    bool extrovert = false;
    bool sensing = false;
    bool thinking = false;
    bool judging = false;

    bool operator==(const MbtiTraits&) const = default;

    std::string to_string() const {
        std::string s;
        s += extrovert ? 'E' : 'I';
        s += sensing ? 'S' : 'N';
        s += thinking ? 'T' : 'F';
        s += judging ? 'J' : 'P';
        return s;
    }

    static MbtiTraits parse(const std::string& s) {
        if (s.size() != 4) fail("MBTI label must have 4 letters, got \"", s, "\"");
        auto pick = [&](char c, char a, char b, const char* pair) {
            if (c == a) return true;
            if (c == b) return false;
            fail("MBTI letter '", c, "' is not one of ", pair);
        };
        MbtiTraits t;
        t.extrovert = pick(s[0], 'E', 'I', "E/I");
        t.sensing = pick(s[1], 'S', 'N', "S/N");
        t.thinking = pick(s[2], 'T', 'F', "T/F");
        t.judging = pick(s[3], 'J', 'P', "J/P");
        return t;
    }

    bool pole(int pair_index, bool first_pole) const {
        const std::array<bool, 4> firsts{extrovert, sensing, thinking, judging};
        return firsts.at(static_cast<std::size_t>(pair_index)) == first_pole;
    }
};

constexpr int kPersDim = 12;

struct UserRecord {
    std::string user_id;
    std::vector<std::string> timeline_texts;
    std::vector<Vec> timeline_concepts;
    std::vector<std::string> liked_texts;
    std::vector<Vec> liked_concepts;
    Vec pers;  // 12-dim personality activations, consumed as-is
    std::optional<MbtiTraits> mbti;
};

struct PostRecord {
    std::string post_id;
    std::string brand_id;
    std::string text;
    Vec concepts;  // nonnegative, shared length across the dataset
};

// ---------------------------------------------------------------------------
// Dataset

enum class FilterPolicy {
    kDropSparseUsers,  // drop users with fewer than two interactions
    kKeepAll,
};

// Users, posts and the implicit-feedback matrix. Immutable after
// construction; safe to share across concurrent readers.
class InteractionDataset {
public:
    InteractionDataset() = default;

    static InteractionDataset build(std::vector<UserRecord> users,
                                    std::vector<PostRecord> posts,
                                    const std::vector<std::pair<std::string, std::string>>& interactions,
                                    FilterPolicy policy = FilterPolicy::kDropSparseUsers) {
        InteractionDataset d;
        d.users_ = std::move(users);
        d.posts_ = std::move(posts);
        d.validate_records();

        std::unordered_map<std::string, int> uidx, pidx;
        for (int i = 0; i < static_cast<int>(d.users_.size()); ++i) {
            if (!uidx.emplace(d.users_[i].user_id, i).second)
                fail("duplicate user_id \"", d.users_[i].user_id, "\"");
        }
        for (int i = 0; i < static_cast<int>(d.posts_.size()); ++i) {
            if (!pidx.emplace(d.posts_[i].post_id, i).second)
                fail("duplicate post_id \"", d.posts_[i].post_id, "\"");
        }

        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(interactions.size());
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(interactions.size() * 2);
        for (std::size_t row = 0; row < interactions.size(); ++row) {
            const auto& [uid, pid] = interactions[row];
            auto ui = uidx.find(uid);
            if (ui == uidx.end())
                fail("interaction ", row + 1, " references unknown user_id \"", uid, "\"");
            auto pi = pidx.find(pid);
            if (pi == pidx.end())
                fail("interaction ", row + 1, " references unknown post_id \"", pid, "\"");
            const std::uint64_t key =
                (static_cast<std::uint64_t>(ui->second) << 32) | static_cast<std::uint32_t>(pi->second);
            if (!seen.insert(key).second)
                fail("duplicate interaction (", uid, ", ", pid, ") at row ", row + 1);
            pairs.emplace_back(ui->second, pi->second);
        }

        if (policy == FilterPolicy::kDropSparseUsers) {
            std::vector<int> count(d.users_.size(), 0);
            for (const auto& [u, p] : pairs) ++count[u];
            std::vector<int> remap(d.users_.size(), -1);
            std::vector<UserRecord> kept;
            kept.reserve(d.users_.size());
            int dropped = 0;
            for (std::size_t i = 0; i < d.users_.size(); ++i) {
                if (count[i] >= 2) {
                    remap[i] = static_cast<int>(kept.size());
                    kept.push_back(std::move(d.users_[i]));
                } else {
                    ++dropped;
                }
            }
            if (dropped > 0) {
                log_info("dropped ", dropped, " user(s) with fewer than 2 interactions");
                std::vector<std::pair<int, int>> filtered;
                filtered.reserve(pairs.size());
                for (const auto& [u, p] : pairs)
                    if (remap[u] >= 0) filtered.emplace_back(remap[u], p);
                pairs = std::move(filtered);
            }
            d.users_ = std::move(kept);
            d.dropped_users_ = dropped;
        }

        d.interactions_ = std::move(pairs);
        d.index();
        return d;
    }

    const std::vector<UserRecord>& users() const { return users_; }
    const std::vector<PostRecord>& posts() const { return posts_; }
    const std::vector<std::pair<int, int>>& interactions() const { return interactions_; }
    int n_users() const { return static_cast<int>(users_.size()); }
    int n_posts() const { return static_cast<int>(posts_.size()); }
    int concept_dim() const { return concept_dim_; }
    int dropped_users() const { return dropped_users_; }

    // Post indices liked by the user, ascending.
    const std::vector<int>& liked_posts(int user) const { return liked_by_user_.at(user); }
    const std::vector<std::vector<int>>& likes_by_user() const { return liked_by_user_; }

    int user_index(const std::string& id) const {
        auto it = user_index_.find(id);
        if (it == user_index_.end()) fail("unknown user_id \"", id, "\"");
        return it->second;
    }
    int post_index(const std::string& id) const {
        auto it = post_index_.find(id);
        if (it == post_index_.end()) fail("unknown post_id \"", id, "\"");
        return it->second;
    }

private:
    void validate_records() {
        concept_dim_ = -1;
        auto check_vec = [&](const Vec& v, const std::string& what) {
            if (concept_dim_ < 0) concept_dim_ = static_cast<int>(v.size());
            if (static_cast<int>(v.size()) != concept_dim_)
                fail(what, ": concept vector length ", v.size(), " differs from dataset length ",
                     concept_dim_);
            if ((v.array() < 0.0).any()) fail(what, ": concept vector has negative entries");
        };
        for (const auto& p : posts_) check_vec(p.concepts, "post " + p.post_id);
        for (const auto& u : users_) {
            if (u.pers.size() != kPersDim)
                fail("user ", u.user_id, ": pers vector must have ", kPersDim, " entries, got ",
                     u.pers.size());
            for (const auto& v : u.timeline_concepts) check_vec(v, "user " + u.user_id);
            for (const auto& v : u.liked_concepts) check_vec(v, "user " + u.user_id);
        }
        if (concept_dim_ < 0) concept_dim_ = 0;
    }

    void index() {
        user_index_.clear();
        post_index_.clear();
        for (int i = 0; i < n_users(); ++i) user_index_[users_[i].user_id] = i;
        for (int i = 0; i < n_posts(); ++i) post_index_[posts_[i].post_id] = i;
        liked_by_user_.assign(users_.size(), {});
        for (const auto& [u, p] : interactions_) liked_by_user_[u].push_back(p);
        for (auto& v : liked_by_user_) std::sort(v.begin(), v.end());
    }

    std::vector<UserRecord> users_;
    std::vector<PostRecord> posts_;
    std::vector<std::pair<int, int>> interactions_;
    std::unordered_map<std::string, int> user_index_, post_index_;
    std::vector<std::vector<int>> liked_by_user_;
    int concept_dim_ = 0;
    int dropped_users_ = 0;
};

// ---------------------------------------------------------------------------
// Stats

struct StatsReport {
    long long n_users = 0;
    long long n_posts = 0;
    long long n_interactions = 0;
    double sparsity = 0.0;

    std::string to_text() const {
        std::ostringstream os;
        os << "item          quantity\n";
        os << "------------  --------\n";
        auto row = [&](const char* name, const std::string& v) {
            os << name;
            for (std::size_t i = std::string(name).size(); i < 14; ++i) os << ' ';
            os << v << "\n";
        };
        row("users", std::to_string(n_users));
        row("posts", std::to_string(n_posts));
        row("interactions", std::to_string(n_interactions));
        std::ostringstream sp;
        sp.precision(6);
        sp << std::fixed << sparsity * 100.0 << "%";
        row("sparsity", sp.str());
        return os.str();
    }

    Json to_json() const {
        Json j;
        j["users"] = n_users;
        j["posts"] = n_posts;
        j["interactions"] = n_interactions;
        j["sparsity"] = sparsity;
        return j;
    }
};

inline StatsReport compute_stats(long long users, long long posts, long long interactions) {
    StatsReport r;
    r.n_users = users;
    r.n_posts = posts;
    r.n_interactions = interactions;
    const double cells = static_cast<double>(users) * static_cast<double>(posts);
    r.sparsity = cells > 0.0 ? 1.0 - static_cast<double>(interactions) / cells : 0.0;
    return r;
}

inline StatsReport dataset_stats(const InteractionDataset& d) {
    return compute_stats(d.n_users(), d.n_posts(), static_cast<long long>(d.interactions().size()));
}

// ---------------------------------------------------------------------------
// Train/test split

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            fail("train_fraction must be strictly between 0 and 1, got ", train_fraction);
    }
};

// Per-user partition of the interactions. Both sides reference the parent
// dataset's indices; every user keeps at least one training interaction and,
// when it has two or more, at least one test interaction.
struct DatasetSplit {
    std::vector<std::pair<int, int>> train, test;
    std::vector<std::vector<int>> train_by_user, test_by_user;  // ascending post indices
    int users_without_test = 0;

    const std::vector<int>& train_posts(int user) const { return train_by_user.at(user); }
    const std::vector<int>& test_posts(int user) const { return test_by_user.at(user); }
};

inline DatasetSplit split_dataset(const InteractionDataset& d, const SplitSpec& spec) {
    spec.validate();
    Rng rng = substream(spec.seed, "split");
    DatasetSplit s;
    s.train_by_user.assign(d.n_users(), {});
    s.test_by_user.assign(d.n_users(), {});
    for (int u = 0; u < d.n_users(); ++u) {
        std::vector<int> posts = d.liked_posts(u);  // ascending, deterministic
        rng.shuffle(posts);
        const int n = static_cast<int>(posts.size());
        int n_test = 0;
        if (n >= 2) {
            n_test = static_cast<int>(std::lround((1.0 - spec.train_fraction) * n));
            n_test = std::clamp(n_test, 1, n - 1);
        } else {
            ++s.users_without_test;
        }
        const int n_train = n - n_test;
        std::vector<int> tr(posts.begin(), posts.begin() + n_train);
        std::vector<int> te(posts.begin() + n_train, posts.end());
        std::sort(tr.begin(), tr.end());
        std::sort(te.begin(), te.end());
        s.train_by_user[u] = std::move(tr);
        s.test_by_user[u] = std::move(te);
    }
    if (s.users_without_test > 0)
        log_warn(s.users_without_test, " user(s) have a single interaction and contribute no test rows");
    for (int u = 0; u < d.n_users(); ++u) {
        for (int p : s.train_by_user[u]) s.train.emplace_back(u, p);
        for (int p : s.test_by_user[u]) s.test.emplace_back(u, p);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Bundle I/O: users.jsonl + posts.jsonl + interactions.csv in one directory.

namespace detail {

inline Json require(const Json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end()) fail(where, ": missing field \"", field, "\"");
    return *it;
}

inline std::vector<std::string> string_list(const Json& j, const std::string& where) {
    if (!j.is_array()) fail(where, ": expected array of strings");
    std::vector<std::string> out;
    for (const auto& x : j) {
        if (!x.is_string()) fail(where, ": expected string, got ", x.type_name());
        out.push_back(x.get<std::string>());
    }
    return out;
}

inline std::vector<Vec> vec_list(const Json& j, const std::string& where) {
    if (!j.is_array()) fail(where, ": expected array of arrays");
    std::vector<Vec> out;
    for (const auto& x : j) out.push_back(vec_from_json(x));
    return out;
}

}  // namespace detail

inline UserRecord user_from_json(const Json& j, const std::string& where) {
    UserRecord u;
    u.user_id = detail::require(j, "user_id", where).get<std::string>();
    u.timeline_texts = detail::string_list(detail::require(j, "timeline_texts", where), where);
    u.timeline_concepts = detail::vec_list(detail::require(j, "timeline_concepts", where), where);
    u.liked_texts = detail::string_list(detail::require(j, "liked_texts", where), where);
    u.liked_concepts = detail::vec_list(detail::require(j, "liked_concepts", where), where);
    u.pers = vec_from_json(detail::require(j, "pers", where));
    if (auto it = j.find("mbti"); it != j.end() && !it->is_null())
        u.mbti = MbtiTraits::parse(it->get<std::string>());
    return u;
}

inline Json user_to_json(const UserRecord& u) {
    Json j;
    j["user_id"] = u.user_id;
    j["timeline_texts"] = u.timeline_texts;
    Json tc = Json::array();
    for (const auto& v : u.timeline_concepts) tc.push_back(vec_to_json(v));
    j["timeline_concepts"] = std::move(tc);
    j["liked_texts"] = u.liked_texts;
    Json lc = Json::array();
    for (const auto& v : u.liked_concepts) lc.push_back(vec_to_json(v));
    j["liked_concepts"] = std::move(lc);
    j["pers"] = vec_to_json(u.pers);
    if (u.mbti) j["mbti"] = u.mbti->to_string();
    return j;
}

inline PostRecord post_from_json(const Json& j, const std::string& where) {
    PostRecord p;
    p.post_id = detail::require(j, "post_id", where).get<std::string>();
    p.brand_id = detail::require(j, "brand_id", where).get<std::string>();
    p.text = detail::require(j, "text", where).get<std::string>();
    p.concepts = vec_from_json(detail::require(j, "concepts", where));
    return p;
}

inline Json post_to_json(const PostRecord& p) {
    Json j;
    j["post_id"] = p.post_id;
    j["brand_id"] = p.brand_id;
    j["text"] = p.text;
    j["concepts"] = vec_to_json(p.concepts);
    return j;
}

inline InteractionDataset load_dataset(const std::filesystem::path& dir,
                                       FilterPolicy policy = FilterPolicy::kDropSparseUsers) {
    namespace fs = std::filesystem;
    const fs::path users_path = dir / "users.jsonl";
    const fs::path posts_path = dir / "posts.jsonl";
    const fs::path inter_path = dir / "interactions.csv";
    for (const auto& p : {users_path, posts_path, inter_path})
        if (!fs::exists(p)) fail("missing file: ", p.string());

    auto parse_jsonl = [](const fs::path& path, auto&& convert) {
        std::ifstream in(path);
        if (!in) fail("cannot open: ", path.string());
        std::string line;
        std::size_t lineno = 0;
        using Out = decltype(convert(Json{}, std::string{}));
        std::vector<Out> out;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = path.filename().string() + " line " + std::to_string(lineno);
            Json j;
            try {
                j = Json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                fail(where, ": malformed JSON: ", e.what());
            }
            try {
                out.push_back(convert(j, where));
            } catch (const nlohmann::json::exception& e) {
                fail(where, ": ", e.what());
            }
        }
        return out;
    };

    auto users = parse_jsonl(users_path, [](const Json& j, const std::string& w) {
        return user_from_json(j, w);
    });
    auto posts = parse_jsonl(posts_path, [](const Json& j, const std::string& w) {
        return post_from_json(j, w);
    });

    std::vector<std::pair<std::string, std::string>> inter;
    {
        std::ifstream in(inter_path);
        if (!in) fail("cannot open: ", inter_path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (lineno == 1) {
                if (line != "user_id,post_id")
                    fail("interactions.csv line 1: expected header \"user_id,post_id\", got \"", line, "\"");
                continue;
            }
            const auto comma = line.find(',');
            if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
                fail("interactions.csv line ", lineno, ": expected exactly two comma-separated fields");
            inter.emplace_back(line.substr(0, comma), line.substr(comma + 1));
        }
    }

    try {
        return InteractionDataset::build(std::move(users), std::move(posts), inter, policy);
    } catch (const Error& e) {
        fail("loading ", dir.string(), ": ", e.what());
    }
}

inline void save_dataset(const InteractionDataset& d, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "users.jsonl");
        if (!out) fail("cannot open for writing: ", (dir / "users.jsonl").string());
        for (const auto& u : d.users()) out << user_to_json(u).dump() << "\n";
    }
    {
        std::ofstream out(dir / "posts.jsonl");
        if (!out) fail("cannot open for writing: ", (dir / "posts.jsonl").string());
        for (const auto& p : d.posts()) out << post_to_json(p).dump() << "\n";
    }
    {
        std::ofstream out(dir / "interactions.csv");
        if (!out) fail("cannot open for writing: ", (dir / "interactions.csv").string());
        out << "user_id,post_id\n";
        for (const auto& [u, p] : d.interactions())
            out << d.users()[u].user_id << "," << d.posts()[p].post_id << "\n";
    }
}

}  // namespace persic
