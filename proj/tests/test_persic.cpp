#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "persic/bpr.hpp"
#include "persic/metrics.hpp"
#include "persic/persic_model.hpp"
#include "test_util.hpp"

using namespace persic;

using testutil::all_train_split;
using testutil::grid_dataset;
using testutil::rmat;
using testutil::rvec;

namespace {

std::vector<double> snapshot_params(const std::vector<ParamRef>& refs) {
    std::vector<double> out;
    for (const auto& r : refs) out.insert(out.end(), r.value, r.value + r.size);
    return out;
}

}  // namespace

TEST(Ablation, NameRoundTripAndSourceFlags) {
    const std::vector<std::pair<Ablation, std::string>> table = {
        {Ablation::kOneHot, "onehot"},
        {Ablation::kPosts, "posts"},
        {Ablation::kLikes, "likes"},
        {Ablation::kPostsLikes, "posts_likes"},
        {Ablation::kPostsPers, "posts_pers"},
        {Ablation::kPostsLikesPers, "posts_likes_pers"},
    };
    for (const auto& [a, name] : table) {
        EXPECT_EQ(ablation_name(a), name);
        EXPECT_EQ(ablation_from_name(name), a);
    }
    EXPECT_THROW(ablation_from_name("bogus"), Error);

    EXPECT_FALSE(ablation_uses_posts(Ablation::kOneHot));
    EXPECT_FALSE(ablation_uses_likes(Ablation::kOneHot));
    EXPECT_FALSE(ablation_uses_pers(Ablation::kOneHot));
    EXPECT_TRUE(ablation_uses_posts(Ablation::kPostsPers));
    EXPECT_FALSE(ablation_uses_likes(Ablation::kPostsPers));
    EXPECT_TRUE(ablation_uses_pers(Ablation::kPostsLikesPers));
    EXPECT_TRUE(ablation_uses_likes(Ablation::kLikes));
    EXPECT_FALSE(ablation_uses_posts(Ablation::kLikes));
}

TEST(Ablation, InputAssemblyOrderAndDims) {
    UserFeatureBundle b;
    b.t_p = Vec::Constant(2, 1.0);
    b.i_p = Vec::Constant(3, 2.0);
    b.t_l = Vec::Constant(2, 3.0);
    b.i_l = Vec::Constant(3, 4.0);
    b.l_p = Vec::Constant(1, 5.0);
    b.l_l = Vec::Constant(1, 6.0);
    b.pers = Vec::Constant(kPersDim, 9.0);

    const Vec full = assemble_user_input(b, Ablation::kPostsLikesPers);
    ASSERT_EQ(full.size(), 12);
    Vec expected(12);
    expected << 1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 5, 6;
    EXPECT_EQ(full, expected);

    const Vec posts_only = assemble_user_input(b, Ablation::kPosts);
    Vec expected_posts(6);
    expected_posts << 1, 1, 2, 2, 2, 5;
    EXPECT_EQ(posts_only, expected_posts);

    const Vec likes_only = assemble_user_input(b, Ablation::kLikes);
    Vec expected_likes(6);
    expected_likes << 3, 3, 4, 4, 4, 6;
    EXPECT_EQ(likes_only, expected_likes);

    EXPECT_EQ(assemble_user_input(b, Ablation::kOneHot).size(), 0);

    // dim helper: per source = k + concept dim + category count
    EXPECT_EQ(user_input_dim(Ablation::kPostsLikesPers, 2, 3, 1), 12);
    EXPECT_EQ(user_input_dim(Ablation::kPosts, 2, 3, 1), 6);
    EXPECT_EQ(user_input_dim(Ablation::kLikes, 2, 3, 1), 6);
    EXPECT_EQ(user_input_dim(Ablation::kOneHot, 2, 3, 1), 0);
}

TEST(Init, RejectsBadDims) {
    EXPECT_THROW(PersicModel::init(Ablation::kPosts, 3, 2, 1, 12, 0), Error);
    EXPECT_THROW(PersicModel::init(Ablation::kPosts, 3, 2, 1, 5, 0), Error);
    EXPECT_THROW(PersicModel::init(Ablation::kPosts, 0, 2, 1, 16, 0), Error);
    EXPECT_THROW(PersicModel::init(Ablation::kPosts, 3, 0, 1, 16, 0), Error);
    EXPECT_THROW(PersicModel::init(Ablation::kOneHot, 0, 2, 0, 16, 0), Error);
    EXPECT_NO_THROW(PersicModel::init(Ablation::kPosts, 3, 2, 1, 13, 0));
}

TEST(Encode, ZeroInputGivesZeroLatent) {
    auto m = PersicModel::init(Ablation::kPosts, 3, 2, 1, 15, 7);
    UserFeatureBundle b;
    b.t_p = Vec::Zero(3);
    const Vec u = m.encode_user(0, b);
    ASSERT_EQ(u.size(), 15);
    EXPECT_EQ(u, Vec::Zero(15));

    PostFeatureBundle pb;
    Rng rng = substream(1, "test.zero");
    pb.t_b = rvec(rng, 1);
    pb.i_b = rvec(rng, 1);
    EXPECT_EQ(m.score(0, b, pb), 0.0);
}

TEST(Encode, InferenceIsDeterministic) {
    Rng rng = substream(2, "test.det");
    auto m = PersicModel::init(Ablation::kPostsLikesPers, 8, 4, 1, 16, 9);
    UserFeatureBundle b;
    b.t_p = rvec(rng, 2);
    b.i_p = rvec(rng, 1);
    b.t_l = rvec(rng, 2);
    b.i_l = rvec(rng, 1);
    b.l_p = rvec(rng, 1);
    b.l_l = rvec(rng, 1);
    b.pers = rvec(rng, kPersDim);
    PostFeatureBundle pb;
    pb.t_b = rvec(rng, 3);
    pb.i_b = rvec(rng, 1);
    const Vec u1 = m.encode_user(0, b);
    const Vec u2 = m.encode_user(0, b);
    const Vec p1 = m.encode_post(pb);
    const Vec p2 = m.encode_post(pb);
    EXPECT_EQ(u1, u2);
    EXPECT_EQ(p1, p2);
}

TEST(Encode, HandSetToyWeights) {
    auto m = PersicModel::init(Ablation::kPosts, 3, 2, 1, 15, 0);
    m.psi().w.setZero();
    m.psi().w(0, 0) = 1.0;
    m.psi().w(1, 1) = -1.0;
    m.psi().w(2, 2) = 2.0;
    m.psi().b << 0.5, 0.25, -1.0;

    UserFeatureBundle b;
    b.t_p = Vec(3);
    b.t_p << 1.0, 2.0, 3.0;
    const Vec u = m.encode_user(0, b);
    EXPECT_DOUBLE_EQ(u[0], 1.5);   // 1*1 + 0.5
    EXPECT_DOUBLE_EQ(u[1], 0.0);   // relu(-2 + 0.25)
    EXPECT_DOUBLE_EQ(u[2], 5.0);   // 2*3 - 1
    EXPECT_EQ(u.tail(12), Vec::Zero(12));

    m.gamma().w.setZero();
    m.gamma().b.setZero();
    m.gamma().w(0, 0) = 1.0;
    m.gamma().w(1, 1) = -1.0;
    m.gamma().b[0] = 0.5;
    m.gamma().b[1] = 2.0;
    PostFeatureBundle pb;
    pb.t_b = Vec::Constant(1, 2.0);
    pb.i_b = Vec::Constant(1, 3.0);
    const Vec p = m.encode_post(pb);
    ASSERT_EQ(p.size(), 15);
    EXPECT_DOUBLE_EQ(p[0], 2.5);  // 2 + 0.5
    EXPECT_DOUBLE_EQ(p[1], 0.0);  // relu(-3 + 2)
    EXPECT_EQ(p.tail(13), Vec::Zero(13));
}

TEST(Encode, PersTailCopiedOrZeroPadded) {
    Rng rng = substream(3, "test.pers");
    UserFeatureBundle b;
    b.t_p = rvec(rng, 2);
    b.i_p = rvec(rng, 1);
    b.l_p = rvec(rng, 1);
    b.pers = Vec::LinSpaced(kPersDim, 0.0, 1.1);

    auto with_pers = PersicModel::init(Ablation::kPostsPers, 4, 2, 1, 16, 5);
    EXPECT_EQ(with_pers.encode_user(0, b).tail(kPersDim), b.pers);

    auto without = PersicModel::init(Ablation::kPosts, 4, 2, 1, 16, 5);
    EXPECT_EQ(without.encode_user(0, b).tail(kPersDim), Vec::Zero(kPersDim));
}

TEST(Encode, OneHotReadsTableRow) {
    auto m = PersicModel::init(Ablation::kOneHot, 0, 2, 3, 13, 11);
    Rng rng = substream(4, "test.onehot");
    m.onehot_table() = rmat(rng, 3, 13);
    UserFeatureBundle empty;
    for (int u = 0; u < 3; ++u)
        EXPECT_EQ(m.encode_user(u, empty), Vec(m.onehot_table().row(u).transpose()));
    EXPECT_THROW(m.encode_user(3, empty), Error);
    EXPECT_THROW(m.encode_user(-1, empty), Error);
}

TEST(Encode, DimensionMismatchFails) {
    auto m = PersicModel::init(Ablation::kPostsPers, 3, 2, 1, 16, 1);
    UserFeatureBundle b;
    b.t_p = Vec::Zero(4);  // assembles to 4, psi expects 3
    b.pers = Vec::Zero(kPersDim);
    EXPECT_THROW(m.encode_user(0, b), Error);

    b.t_p = Vec::Zero(3);
    b.pers = Vec::Zero(3);  // pers must have 12 entries
    EXPECT_THROW(m.encode_user(0, b), Error);

    PostFeatureBundle pb;
    pb.t_b = Vec::Zero(2);
    pb.i_b = Vec::Zero(2);  // concat 4, gamma expects 2
    EXPECT_THROW(m.encode_post(pb), Error);
}

TEST(Encode, OutputLengthIsAlwaysDp) {
    Rng rng = substream(5, "test.dims");
    const int d_p = 17;
    UserFeatureBundle b;
    b.t_p = rvec(rng, 3);
    b.i_p = rvec(rng, 2);
    b.t_l = rvec(rng, 3);
    b.i_l = rvec(rng, 2);
    b.l_p = rvec(rng, 1);
    b.l_l = rvec(rng, 1);
    b.pers = rvec(rng, kPersDim);
    PostFeatureBundle pb;
    pb.t_b = rvec(rng, 3);
    pb.i_b = rvec(rng, 2);

    for (Ablation a : {Ablation::kOneHot, Ablation::kPosts, Ablation::kLikes,
                       Ablation::kPostsLikes, Ablation::kPostsPers, Ablation::kPostsLikesPers}) {
        const int user_in =
            a == Ablation::kOneHot ? 1 : static_cast<int>(assemble_user_input(b, a).size());
        auto m = PersicModel::init(a, user_in, 5, 2, d_p, 3);
        EXPECT_EQ(m.encode_user(0, b).size(), d_p) << ablation_name(a);
        EXPECT_EQ(m.encode_post(pb).size(), d_p) << ablation_name(a);
        EXPECT_EQ(m.d_u() + kPersDim, d_p);
    }
}

TEST(Score, DotProductExamplesAndRotationInvariance) {
    // u = e0, p = 2*e0 -> score 2
    auto m = PersicModel::init(Ablation::kOneHot, 0, 1, 1, 13, 2);
    m.onehot_table().setZero();
    m.onehot_table()(0, 0) = 1.0;
    m.gamma().w.setZero();
    m.gamma().b.setZero();
    m.gamma().b[0] = 2.0;
    UserFeatureBundle ub;
    PostFeatureBundle pb;
    pb.t_b = Vec::Constant(1, 0.7);
    EXPECT_DOUBLE_EQ(m.score(0, ub, pb), 2.0);

    // score is the dot of the two encodings, invariant under a shared rotation
    Rng rng = substream(6, "test.rot");
    auto r = PersicModel::init(Ablation::kPostsLikesPers, 6, 4, 1, 16, 8);
    UserFeatureBundle rb;
    rb.t_p = rvec(rng, 2);
    rb.i_p = rvec(rng, 1);
    rb.t_l = rvec(rng, 2);
    rb.i_l = rvec(rng, 1);
    rb.l_p = Vec(0);
    rb.l_l = Vec(0);
    rb.pers = rvec(rng, kPersDim);
    PostFeatureBundle rp;
    rp.t_b = rvec(rng, 3);
    rp.i_b = rvec(rng, 1);
    const Vec u = r.encode_user(0, rb);
    const Vec p = r.encode_post(rp);
    EXPECT_DOUBLE_EQ(r.score(0, rb, rp), u.dot(p));

    const Mat q = Eigen::HouseholderQR<Mat>(rmat(rng, 16, 16)).householderQ();
    EXPECT_NEAR((q * u).dot(q * p), u.dot(p), 1e-12 * (1.0 + std::abs(u.dot(p))));
}

TEST(SampleNegatives, ForcedOutcomeAndSkipMapping) {
    Rng rng = substream(7, "test.neg");
    for (int draw : sample_negatives(rng, {0}, 2, 20)) EXPECT_EQ(draw, 1);

    const std::vector<int> pos = {1, 3};
    for (int draw : sample_negatives(rng, pos, 5, 200)) {
        EXPECT_TRUE(draw == 0 || draw == 2 || draw == 4) << draw;
    }

    for (int draw : sample_negatives(rng, {0, 1, 2}, 4, 50)) EXPECT_EQ(draw, 3);
}

TEST(SampleNegatives, FailsWhenAllLiked) {
    Rng rng = substream(8, "test.neg2");
    EXPECT_THROW(sample_negatives(rng, {0, 1, 2}, 3, 1), Error);
}

TEST(SampleNegatives, DeterministicUnderFixedRng) {
    Rng a = substream(9, "test.neg3");
    Rng b = substream(9, "test.neg3");
    EXPECT_EQ(sample_negatives(a, {2, 5}, 50, 100), sample_negatives(b, {2, 5}, 50, 100));
}

TEST(SampleNegatives, UniformOverCandidatesChiSquare) {
    // 130 posts, 30 liked -> 100 candidates; df = 99, critical value 134.642
    // at significance 0.01.
    std::vector<int> positives;
    for (int p = 0; p < 120; p += 4) positives.push_back(p);
    ASSERT_EQ(positives.size(), 30u);
    std::unordered_set<int> liked(positives.begin(), positives.end());

    Rng rng = substream(10, "test.chi2");
    const int n = 100000;
    std::vector<int> counts(130, 0);
    for (int draw : sample_negatives(rng, positives, 130, n)) {
        ASSERT_GE(draw, 0);
        ASSERT_LT(draw, 130);
        ASSERT_FALSE(liked.count(draw)) << "sampled a liked post " << draw;
        counts[static_cast<std::size_t>(draw)]++;
    }
    const double expected = n / 100.0;
    double chi2 = 0.0;
    for (int p = 0; p < 130; ++p) {
        if (liked.count(p)) continue;
        const double d = counts[static_cast<std::size_t>(p)] - expected;
        chi2 += d * d / expected;
    }
    EXPECT_LT(chi2, 134.642);
}

TEST(Gradients, FiniteDifferenceAllAblations) {
    const int n_users = 5, n_posts = 7, d_p = 16, user_in = 6, post_in = 5;
    for (Ablation a : {Ablation::kPostsLikesPers, Ablation::kPosts, Ablation::kLikes,
                       Ablation::kOneHot}) {
        for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
            Rng rng = substream(seed, "test.fd");
            auto m = PersicModel::init(a, user_in, post_in, n_users, d_p, seed);
            const Mat user_inputs = rmat(rng, user_in, n_users);
            const Mat pers = rmat(rng, kPersDim, n_users);
            const Mat post_inputs = rmat(rng, post_in, n_posts);
            std::vector<Triple> triples;
            for (int t = 0; t < 12; ++t) {
                const int u = static_cast<int>(rng.uniform_index(n_users));
                const int pos = static_cast<int>(rng.uniform_index(n_posts));
                int neg = static_cast<int>(rng.uniform_index(n_posts));
                if (neg == pos) neg = (pos + 1) % n_posts;
                triples.push_back({u, pos, neg});
            }
            auto refs = m.param_refs();
            const double lambda = 1e-3;
            auto loss_fn = [&] {
                zero_grads(refs);
                return m.loss_and_grads(triples, user_inputs, pers, post_inputs, lambda, 0.0,
                                        nullptr);
            };
            loss_fn();
            const auto report = testutil::fd_check(refs, loss_fn);
            EXPECT_LT(report.max_rel_err, 1e-4)
                << ablation_name(a) << " seed " << seed << ": worst " << report.worst_param
                << " analytic " << report.worst_analytic << " fd " << report.worst_fd;
        }
    }
}

TEST(Gradients, RegularizerOnlyWhenPosEqualsNeg) {
    Rng rng = substream(11, "test.reg");
    auto m = PersicModel::init(Ablation::kPostsLikesPers, 4, 3, 2, 16, 13);
    const Mat user_inputs = rmat(rng, 4, 2);
    const Mat pers = rmat(rng, kPersDim, 2);
    const Mat post_inputs = rmat(rng, 3, 3);
    const std::vector<Triple> triples = {{0, 1, 1}, {1, 2, 2}};  // delta = 0 by construction

    auto refs = m.param_refs();
    const double lambda = 0.01;
    zero_grads(refs);
    const double loss =
        m.loss_and_grads(triples, user_inputs, pers, post_inputs, lambda, 0.0, nullptr);
    EXPECT_NEAR(loss, std::log(2.0) + lambda * param_sq_norm(refs), 1e-12);
    for (const auto& r : refs)
        for (std::ptrdiff_t i = 0; i < r.size; ++i)
            EXPECT_NEAR(r.grad[i], 2.0 * lambda * r.value[i], 1e-12) << r.name << "[" << i << "]";
}

TEST(Gradients, DropoutNeedsRngAndIsDeterministicGivenState) {
    Rng rng = substream(12, "test.drop");
    auto m = PersicModel::init(Ablation::kPostsLikes, 5, 4, 2, 15, 17);
    const Mat user_inputs = rmat(rng, 5, 2);
    const Mat pers = Mat::Zero(kPersDim, 2);
    const Mat post_inputs = rmat(rng, 4, 3);
    const std::vector<Triple> triples = {{0, 0, 1}, {1, 2, 0}};

    EXPECT_THROW(m.loss_and_grads(triples, user_inputs, pers, post_inputs, 0.0, 0.3, nullptr),
                 Error);
    EXPECT_THROW(m.loss_and_grads({}, user_inputs, pers, post_inputs, 0.0, 0.0, nullptr), Error);

    auto m2 = m;
    Rng ra = substream(99, "test.mask");
    Rng rb = substream(99, "test.mask");
    auto refs1 = m.param_refs();
    auto refs2 = m2.param_refs();
    zero_grads(refs1);
    zero_grads(refs2);
    const double l1 = m.loss_and_grads(triples, user_inputs, pers, post_inputs, 1e-4, 0.3, &ra);
    const double l2 = m2.loss_and_grads(triples, user_inputs, pers, post_inputs, 1e-4, 0.3, &rb);
    EXPECT_EQ(l1, l2);
    for (std::size_t k = 0; k < refs1.size(); ++k)
        for (std::ptrdiff_t i = 0; i < refs1[k].size; ++i)
            EXPECT_EQ(refs1[k].grad[i], refs2[k].grad[i]);
}

TEST(Objective, HandValues) {
    // user latent e0, post latent = x_j * e0 -> delta = x_pos - x_neg
    auto m = PersicModel::init(Ablation::kOneHot, 0, 1, 1, 13, 19);
    m.onehot_table().setZero();
    m.onehot_table()(0, 0) = 1.0;
    m.gamma().w.setZero();
    m.gamma().b.setZero();
    m.gamma().w(0, 0) = 1.0;
    const Mat user_inputs(0, 1);
    const Mat pers = Mat::Zero(kPersDim, 1);
    auto objective = [&](double x_pos, double x_neg) {
        Mat post_inputs(1, 2);
        post_inputs << x_pos, x_neg;
        auto refs = m.param_refs();
        zero_grads(refs);
        return -m.loss_and_grads({{0, 0, 1}}, user_inputs, pers, post_inputs, 0.0, 0.0, nullptr);
    };

    EXPECT_DOUBLE_EQ(objective(2.0, 2.0), std::log(0.5));
    EXPECT_NEAR(objective(2.0, 1.0), std::log(1.0 / (1.0 + std::exp(-1.0))), 1e-12);
    EXPECT_NEAR(objective(2.0, 1.0), -0.31326168751822286, 1e-12);
    const double saturated = objective(41.0, 1.0);  // delta = 40
    EXPECT_LT(saturated, 0.0);
    EXPECT_GT(saturated, -1e-15);
}

TEST(Train, SeparableToyReachesPerfectRankingAndImproves) {
    // two users with disjoint tastes over two post groups
    const auto data = grid_dataset(2, 4, {{0, 1}, {2, 3}});
    const auto split = all_train_split(data);

    FeatureStore feats;
    feats.users.resize(2);
    feats.posts.resize(4);
    for (int u = 0; u < 2; ++u) {
        feats.users[u].t_p = Vec::Zero(2);
        feats.users[u].t_p[u] = 1.0;
        feats.users[u].pers = Vec::Zero(kPersDim);
    }
    for (int p = 0; p < 4; ++p) {
        feats.posts[p].t_b = Vec::Zero(2);
        feats.posts[p].t_b[p / 2] = 1.0;
        feats.posts[p].i_b = Vec::Zero(1);
    }

    // wide fused head so no user starts with every ReLU unit dead
    auto m = PersicModel::init(Ablation::kPosts, 2, 3, 2, 24, 23);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 64;
    cfg.negatives_per_positive = 20;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.0;
    cfg.dropout_rate = 0.0;
    cfg.seed = 29;
    const auto result = train_persic(m, data, split, feats, cfg);
    ASSERT_EQ(result.objective_trace.size(), 30u);

    for (int u = 0; u < 2; ++u) {
        std::vector<std::pair<double, bool>> scored;
        for (int p = 0; p < 4; ++p)
            scored.emplace_back(m.score(u, feats.users[u], feats.posts[p]), p / 2 == u);
        const auto a = auc(scored);
        ASSERT_TRUE(a.has_value());
        EXPECT_DOUBLE_EQ(*a, 1.0) << "user " << u;
    }

    // epoch-mean objective is non-decreasing once Adam settles
    for (std::size_t e = 4; e < result.objective_trace.size(); ++e)
        EXPECT_GE(result.objective_trace[e], result.objective_trace[e - 1] - 1e-3)
            << "epoch " << e;
}

TEST(Train, ZeroLearningRateLeavesParamsAndTraceFlat) {
    // every user has exactly one unliked post, so negatives are forced and a
    // single 64-pair batch covers each epoch
    const auto data = grid_dataset(2, 3, {{0, 1}, {1, 2}});
    const auto split = all_train_split(data);

    FeatureStore feats;
    feats.users.resize(2);
    feats.posts.resize(3);
    Rng rng = substream(13, "test.flat");
    for (int u = 0; u < 2; ++u) {
        feats.users[u].t_p = rvec(rng, 2);
        feats.users[u].pers = Vec::Zero(kPersDim);
    }
    for (int p = 0; p < 3; ++p) {
        feats.posts[p].t_b = rvec(rng, 1);
        feats.posts[p].i_b = rvec(rng, 1);
    }

    auto m = PersicModel::init(Ablation::kPosts, 2, 2, 2, 14, 31);
    auto refs = m.param_refs();
    const auto before = snapshot_params(refs);

    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 64;
    cfg.negatives_per_positive = 3;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 1e-5;
    cfg.dropout_rate = 0.0;
    cfg.seed = 37;
    const auto result = train_persic(m, data, split, feats, cfg);

    EXPECT_EQ(snapshot_params(refs), before);
    ASSERT_EQ(result.objective_trace.size(), 5u);
    for (double v : result.objective_trace) EXPECT_NEAR(v, result.objective_trace[0], 1e-12);
}

TEST(Train, SameSeedIsBitIdenticalDifferentSeedIsNot) {
    const auto data = grid_dataset(3, 5, {{0, 1}, {2, 3}, {0, 4}});
    const auto split = all_train_split(data);

    FeatureStore feats;
    feats.users.resize(3);
    feats.posts.resize(5);
    Rng rng = substream(14, "test.seed");
    for (auto& u : feats.users) {
        u.t_p = rvec(rng, 2);
        u.i_p = rvec(rng, 1);
        u.l_p = rvec(rng, 1);
        u.pers = rvec(rng, kPersDim);
    }
    for (auto& p : feats.posts) {
        p.t_b = rvec(rng, 2);
        p.i_b = rvec(rng, 1);
    }

    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 3;
    cfg.negatives_per_positive = 4;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 1e-5;
    cfg.dropout_rate = 0.3;
    cfg.seed = 41;

    auto run = [&](std::uint64_t seed) {
        auto m = PersicModel::init(Ablation::kPostsPers, 4, 3, 3, 16, 43);
        TrainConfig c = cfg;
        c.seed = seed;
        const auto r = train_persic(m, data, split, feats, c);
        auto refs = m.param_refs();
        return std::make_pair(r.objective_trace, snapshot_params(refs));
    };

    const auto [trace_a, params_a] = run(41);
    const auto [trace_b, params_b] = run(41);
    const auto [trace_c, params_c] = run(42);
    EXPECT_EQ(trace_a, trace_b);
    EXPECT_EQ(params_a, params_b);
    EXPECT_NE(trace_a, trace_c);
}

TEST(Train, ZeroPersMatchesPostsLikesAblation) {
    const auto data = grid_dataset(3, 5, {{0, 1}, {2, 3}, {0, 4}});
    const auto split = all_train_split(data);

    FeatureStore feats;
    feats.users.resize(3);
    feats.posts.resize(5);
    Rng rng = substream(15, "test.pad");
    for (auto& u : feats.users) {
        u.t_p = rvec(rng, 2);
        u.i_p = rvec(rng, 1);
        u.t_l = rvec(rng, 2);
        u.i_l = rvec(rng, 1);
        u.l_p = rvec(rng, 1);
        u.l_l = rvec(rng, 1);
        u.pers = Vec::Zero(kPersDim);
    }
    for (auto& p : feats.posts) {
        p.t_b = rvec(rng, 2);
        p.i_b = rvec(rng, 1);
    }

    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 4;
    cfg.negatives_per_positive = 5;
    cfg.learning_rate = 0.02;
    cfg.weight_decay = 1e-5;
    cfg.dropout_rate = 0.3;
    cfg.seed = 47;

    auto with_pers = PersicModel::init(Ablation::kPostsLikesPers, 8, 3, 3, 16, 53);
    auto without = PersicModel::init(Ablation::kPostsLikes, 8, 3, 3, 16, 53);
    const auto ra = train_persic(with_pers, data, split, feats, cfg);
    const auto rb = train_persic(without, data, split, feats, cfg);

    EXPECT_EQ(ra.objective_trace, rb.objective_trace);
    for (int u = 0; u < 3; ++u)
        for (int p = 0; p < 5; ++p)
            EXPECT_EQ(with_pers.score(u, feats.users[u], feats.posts[p]),
                      without.score(u, feats.users[u], feats.posts[p]))
                << "u" << u << " p" << p;
}

TEST(RankPosts, TieBreakAndMonotoneInvariance) {
    // score(post) = t_b value, via an e0 user latent and a passthrough gamma
    auto m = PersicModel::init(Ablation::kOneHot, 0, 2, 1, 13, 59);
    m.onehot_table().setZero();
    m.onehot_table()(0, 0) = 1.0;
    m.gamma().w.setZero();
    m.gamma().b.setZero();
    m.gamma().w(0, 0) = 1.0;
    UserFeatureBundle ub;
    auto post = [](double x) {
        PostFeatureBundle pb;
        pb.t_b = Vec::Constant(1, x);
        pb.i_b = Vec::Zero(1);
        return pb;
    };

    EXPECT_EQ(rank_posts(m, 0, ub, {post(0.4)}), std::vector<int>({0}));

    const std::vector<PostFeatureBundle> cands = {post(0.2), post(0.9), post(0.9)};
    EXPECT_EQ(rank_posts(m, 0, ub, cands), std::vector<int>({1, 2, 0}));

    const std::vector<PostFeatureBundle> scaled = {post(0.2 * 3 + 1), post(0.9 * 3 + 1),
                                                   post(0.9 * 3 + 1)};
    EXPECT_EQ(rank_posts(m, 0, ub, scaled), rank_posts(m, 0, ub, cands));
}

TEST(Checkpoint, JsonRoundTripPreservesScores) {
    Rng rng = substream(16, "test.ckpt");
    UserFeatureBundle ub;
    ub.t_p = rvec(rng, 2);
    ub.i_p = rvec(rng, 1);
    ub.l_p = rvec(rng, 1);
    ub.pers = rvec(rng, kPersDim);
    PostFeatureBundle pb;
    pb.t_b = rvec(rng, 2);
    pb.i_b = rvec(rng, 1);

    auto m = PersicModel::init(Ablation::kPostsPers, 4, 3, 1, 16, 61);
    const auto restored = PersicModel::from_json(m.to_json());
    EXPECT_EQ(restored.ablation(), m.ablation());
    EXPECT_EQ(restored.d_p(), m.d_p());
    EXPECT_EQ(restored.score(0, ub, pb), m.score(0, ub, pb));

    auto oh = PersicModel::init(Ablation::kOneHot, 0, 3, 2, 16, 67);
    const auto oh2 = PersicModel::from_json(oh.to_json());
    EXPECT_EQ(oh2.score(1, ub, pb), oh.score(1, ub, pb));

    Json bad_kind = m.to_json();
    bad_kind["model_kind"] = "mf";
    EXPECT_THROW(PersicModel::from_json(bad_kind), Error);

    Json bad_version = m.to_json();
    bad_version["format_version"] = 2;
    EXPECT_THROW(PersicModel::from_json(bad_version), Error);

    Json bad_dims = m.to_json();
    bad_dims["d_p"] = 17;
    EXPECT_THROW(PersicModel::from_json(bad_dims), Error);
}

TEST(TrainConfig, DefaultsAndValidation) {
    const TrainConfig d;
    EXPECT_EQ(d.epochs, 30);
    EXPECT_EQ(d.batch_size, 64);
    EXPECT_EQ(d.negatives_per_positive, 20);
    EXPECT_DOUBLE_EQ(d.learning_rate, 1e-3);
    EXPECT_DOUBLE_EQ(d.weight_decay, 1e-5);
    EXPECT_DOUBLE_EQ(d.dropout_rate, 0.3);
    EXPECT_NO_THROW(d.validate());

    auto expect_invalid = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), Error);
    };
    expect_invalid([](TrainConfig& c) { c.epochs = 0; });
    expect_invalid([](TrainConfig& c) { c.batch_size = 0; });
    expect_invalid([](TrainConfig& c) { c.negatives_per_positive = 0; });
    expect_invalid([](TrainConfig& c) { c.learning_rate = -1.0; });
    expect_invalid([](TrainConfig& c) { c.weight_decay = -1e-9; });
    expect_invalid([](TrainConfig& c) { c.dropout_rate = 1.0; });

    TrainConfig ok;
    ok.learning_rate = 0.0;
    ok.dropout_rate = 0.0;
    EXPECT_NO_THROW(ok.validate());
}
