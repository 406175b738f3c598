#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "reference.hpp"
#include "sectrain/distill.hpp"
#include "sectrain/rlmath.hpp"
#include "sectrain/util/rng.hpp"

using namespace sectrain;
using namespace sectrain::rlmath;
using namespace sectrain::distill;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& x : p) s += (x = 0.05 + rng.uniform());
    for (auto& x : p) x /= s;
    return p;
}

GrpoResponse response(double adv, std::vector<double> ratios) {
    GrpoResponse r;
    r.advantage = adv;
    r.ratios = std::move(ratios);
    return r;
}

}  // namespace

TEST(Advantages, TwoPointExample) {
    const std::vector<double> r{1, 0, 1, 0};
    EXPECT_EQ(group_advantages(r), (std::vector<double>{1, -1, 1, -1}));
}

TEST(Advantages, DegenerateGroupsAreZero) {
    const std::vector<double> same{0.3, 0.3, 0.3};
    EXPECT_EQ(group_advantages(same), (std::vector<double>(3, 0.0)));
    const std::vector<double> one{0.7};
    EXPECT_EQ(group_advantages(one), (std::vector<double>{0.0}));
    EXPECT_THROW(group_advantages(std::vector<double>{}), std::invalid_argument);
}

TEST(Advantages, StandardizedOnRandomGroups) {
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> r(2 + rng.below(15));
        for (auto& x : r) x = rng.uniform(-3, 3);
        const auto a = group_advantages(r);
        const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
        double var = 0.0;
        for (double x : a) var += (x - mean) * (x - mean);
        EXPECT_LT(std::abs(mean), 1e-9);
        EXPECT_NEAR(std::sqrt(var / a.size()), 1.0, 1e-9);
    }
}

TEST(DifficultyMask, BandEdges) {
    EXPECT_EQ(difficulty_mask_rate(0.05), MaskDecision::drop_low);
    EXPECT_EQ(difficulty_mask_rate(0.099), MaskDecision::drop_low);
    EXPECT_EQ(difficulty_mask_rate(0.10), MaskDecision::keep);
    EXPECT_EQ(difficulty_mask_rate(0.50), MaskDecision::keep);
    EXPECT_EQ(difficulty_mask_rate(0.95), MaskDecision::keep);
    EXPECT_EQ(difficulty_mask_rate(0.951), MaskDecision::drop_high);
}

TEST(DifficultyMask, CountsOverGroupSize) {
    EXPECT_EQ(difficulty_mask(0, 8), MaskDecision::drop_low);
    EXPECT_EQ(difficulty_mask(8, 8), MaskDecision::drop_high);
    EXPECT_EQ(difficulty_mask(19, 20), MaskDecision::keep);
    EXPECT_EQ(difficulty_mask(1, 10), MaskDecision::keep);
    EXPECT_THROW(difficulty_mask(3, 2), std::invalid_argument);
    EXPECT_STREQ(to_string(MaskDecision::drop_high), "drop_high");
}

TEST(KlPenalty, HandValues) {
    const std::vector<double> pol{-1.0, -2.0}, same{-1.0, -2.0};
    for (double k : kl_penalty(pol, same)) EXPECT_EQ(k, 0.0);
    const std::vector<double> p1{-std::log(2.0)}, r1{0.0};
    EXPECT_NEAR(kl_penalty(p1, r1)[0], 2 - std::log(2.0) - 1, 1e-15);
    EXPECT_NEAR(kl_penalty(p1, r1)[0], 0.3069, 5e-5);
}

TEST(KlPenalty, NonnegativeAndMatchesDirectFormula) {
    Rng rng(2);
    std::vector<double> p(200), r(200);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform(-8, 0);
        r[i] = rng.uniform(-8, 0);
    }
    const auto k = kl_penalty(p, r);
    for (std::size_t i = 0; i < k.size(); ++i) {
        EXPECT_GE(k[i], 0.0);
        EXPECT_NEAR(k[i], std::exp(r[i] - p[i]) - (r[i] - p[i]) - 1, 1e-9 * (1 + k[i]));
    }
}

TEST(Grpo, UnitRatiosAndCenteredAdvantagesGiveZero) {
    const std::vector<GrpoResponse> g{response(1, {1, 1, 1}), response(-1, {1, 1}), response(0.5, {1}),
                                      response(-0.5, {1, 1, 1, 1})};
    const auto out = grpo_loss(g, GrpoConfig{});
    EXPECT_EQ(out.loss, 0.0);
    for (bool c : out.clipped) EXPECT_FALSE(c);
}

TEST(Grpo, SingleClippedResponse) {
    const std::vector<GrpoResponse> g{response(1, {1.5})};
    const auto out = grpo_loss(g, GrpoConfig{});
    EXPECT_DOUBLE_EQ(out.surrogate, 1.2);
    EXPECT_DOUBLE_EQ(out.loss, -1.2);
    EXPECT_TRUE(out.clipped[0]);
}

TEST(Grpo, IdenticalPolicyHasZeroKl) {
    auto r = response(1, {1, 1});
    r.policy_logprobs = r.ref_logprobs = {-0.3, -1.7};
    const std::vector<GrpoResponse> g{r};
    const auto out = grpo_loss(g, GrpoConfig{0.2, 0.5});
    EXPECT_EQ(out.kl, 0.0);
    EXPECT_EQ(out.loss, -1.0);
}

TEST(Grpo, KlIsSummedPerResponseAndAveragedOverGroup) {
    auto a = response(0, {1, 1});
    a.policy_logprobs = {-std::log(2.0), -std::log(2.0)};
    a.ref_logprobs = {0, 0};
    auto b = response(0, {1});
    b.policy_logprobs = b.ref_logprobs = {-1};
    const std::vector<GrpoResponse> g{a, b};
    const double per_token = 2 - std::log(2.0) - 1;
    const auto out = grpo_loss(g, GrpoConfig{0.2, 0.1});
    EXPECT_NEAR(out.kl, 2 * per_token / 2, 1e-15);
    EXPECT_NEAR(out.loss, 0.1 * per_token, 1e-15);
}

TEST(Grpo, GradientMatchesFiniteDifferences) {
    // d loss / d rho_t = -A / (|o_i| G) inside the trust region and 0 where the clip binds
    Rng rng(3);
    const double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GrpoResponse> g;
        for (std::size_t i = 0, n = 1 + rng.below(5); i < n; ++i) {
            std::vector<double> rho(1 + rng.below(6));
            for (auto& x : rho) x = rng.uniform(0.5, 1.5);
            g.push_back(response(rng.uniform(-2, 2), rho));
        }
        const std::size_t i = rng.below(g.size()), t = rng.below(g[i].ratios.size());
        const double rho = g[i].ratios[t], a = g[i].advantage;
        if (std::abs(rho - 0.8) < 1e-3 || std::abs(rho - 1.2) < 1e-3) continue;
        auto up = g, down = g;
        up[i].ratios[t] += h;
        down[i].ratios[t] -= h;
        const double fd = (grpo_loss(up, {}).loss - grpo_loss(down, {}).loss) / (2 * h);
        const bool binds = (a > 0 && rho > 1.2) || (a < 0 && rho < 0.8);
        const double expect = binds ? 0.0 : -a / (g[i].ratios.size() * g.size());
        EXPECT_NEAR(fd, expect, 1e-6) << "trial " << trial;
    }
}

TEST(Grpo, RejectsMalformedGroups) {
    EXPECT_THROW(grpo_loss(std::vector<GrpoResponse>{response(1, {})}, {}), std::invalid_argument);
    EXPECT_THROW(grpo_loss(std::vector<GrpoResponse>{response(1, {0.0})}, {}), std::invalid_argument);
    auto r = response(1, {1, 1});
    r.policy_logprobs = {-1};
    r.ref_logprobs = {-1};
    EXPECT_THROW(grpo_loss(std::vector<GrpoResponse>{r}, {}), std::invalid_argument);
    EXPECT_THROW(grpo_loss(std::vector<GrpoResponse>{response(1, {1})}, GrpoConfig{0.0}), std::invalid_argument);
}

TEST(DivergenceMask, HandExamples) {
    const std::vector<std::int64_t> c1{5, 7, 9}, r1{5, 7, 2};
    const auto m1 = branch_divergence_mask(c1, r1);
    EXPECT_EQ(m1.index, 2u);
    EXPECT_EQ(m1.chosen, (std::vector<bool>{false, false, true}));
    EXPECT_EQ(m1.rejected, (std::vector<bool>{false, false, true}));

    const auto same = branch_divergence_mask(c1, c1);
    EXPECT_FALSE(same.diverged);
    EXPECT_EQ(same.chosen, (std::vector<bool>(3, false)));

    const std::vector<std::int64_t> c3{5, 7}, r3{5, 7, 9, 9};
    const auto m3 = branch_divergence_mask(c3, r3);
    EXPECT_EQ(m3.index, 2u);
    EXPECT_EQ(m3.chosen, (std::vector<bool>{false, false}));
    EXPECT_EQ(m3.rejected, (std::vector<bool>{false, false, true, true}));
}

TEST(Pcgrad, HandExamples) {
    EXPECT_EQ(pcgrad({{1, 0}, {0, 1}}, 1), (std::vector<std::vector<double>>{{1, 0}, {0, 1}}));
    const auto out = pcgrad({{1, 0}, {-1, 1}}, 1);
    EXPECT_EQ(out[0], (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(out[1], (std::vector<double>{0, 1}));
    const auto anti = pcgrad({{1, 2}, {-1, -2}}, 1);
    EXPECT_EQ(anti[0], (std::vector<double>{0, 0}));
    EXPECT_THROW(pcgrad({{1, 0}}, 1), std::invalid_argument);
}

TEST(Pcgrad, ProjectedPairsNoLongerConflict) {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::vector<double>> g(2, std::vector<double>(8));
        for (auto& v : g) {
            for (auto& x : v) x = rng.normal();
        }
        const auto out = pcgrad(g, i);
        if (dot(g[0], g[1]) < 0) {
            EXPECT_GE(dot(out[0], g[1]), -1e-12);
            EXPECT_GE(dot(out[1], g[0]), -1e-12);
        } else {
            EXPECT_EQ(out, g);
        }
    }
}

TEST(Pcgrad, SeededOrderIsDeterministic) {
    Rng rng(5);
    std::vector<std::vector<double>> g(5, std::vector<double>(6));
    for (auto& v : g) {
        for (auto& x : v) x = rng.normal();
    }
    EXPECT_EQ(pcgrad(g, 9), pcgrad(g, 9));
}

TEST(Abkd, SelfDivergenceIsZero) {
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        const CategoricalDist p(random_simplex(rng, 2 + rng.below(30)));
        const AbkdParams ab{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
        EXPECT_NEAR(abkd_divergence(p, p, ab), 0.0, 1e-12);
    }
}

TEST(Abkd, UnitParametersGiveHalfSquaredDistance) {
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_simplex(rng, 10), q = random_simplex(rng, 10);
        double half = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) half += 0.5 * (p[k] - q[k]) * (p[k] - q[k]);
        EXPECT_NEAR(abkd_divergence(CategoricalDist(p), CategoricalDist(q), {1, 1}), half, 1e-12);
    }
}

TEST(Abkd, KlLimits) {
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_simplex(rng, 12), q = random_simplex(rng, 12);
        const CategoricalDist P(p), Q(q);
        EXPECT_NEAR(abkd_divergence(P, Q, {1, 1e-6}) / reference::kl(p, q), 1.0, 0.01);
        EXPECT_NEAR(abkd_divergence(P, Q, {1e-6, 1}) / reference::kl(q, p), 1.0, 0.01);
    }
}

TEST(Abkd, NonnegativeOnRandomPairs) {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const CategoricalDist p(random_simplex(rng, 8)), q(random_simplex(rng, 8));
        const AbkdParams ab{rng.uniform(0.05, 3.0), rng.uniform(0.05, 3.0)};
        EXPECT_GE(abkd_divergence(p, q, ab), -1e-12);
    }
}

TEST(Abkd, RejectsDegenerateParametersAndSupports) {
    const CategoricalDist p({0.5, 0.5}), q({0.25, 0.75}), r({1.0});
    EXPECT_THROW(abkd_divergence(p, q, {0, 1}), std::invalid_argument);
    EXPECT_THROW(abkd_divergence(p, q, {1, -1}), std::invalid_argument);
    EXPECT_THROW(abkd_divergence(p, r, {1, 1}), std::invalid_argument);
    EXPECT_THROW(CategoricalDist({0.5, 0.6}), std::invalid_argument);
    EXPECT_THROW(CategoricalDist({1.5, -0.5}), std::invalid_argument);
    EXPECT_THROW(abkd_divergence(p, CategoricalDist({1.0, 0.0}), {1, -0.5}), std::domain_error);
}

TEST(TopK, SupportIsAscendingWithLowIndexTies) {
    const CategoricalDist t({0.1, 0.3, 0.3, 0.2, 0.1});
    const auto m = topk_mask(t, 2);
    EXPECT_EQ(m.indices, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(m.teacher.probs(), (std::vector<double>{0.5, 0.5}));
    const auto m3 = topk_mask(t, 3);
    EXPECT_EQ(m3.indices, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(topk_mask(CategoricalDist({0.25, 0.25, 0.25, 0.25}), 2).indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_THROW(topk_mask(t, 0), std::invalid_argument);
}

TEST(TopK, FullSupportEqualsPlainDivergence) {
    Rng rng(10);
    const CategoricalDist p(random_simplex(rng, 6)), q(random_simplex(rng, 6));
    EXPECT_EQ(topk_abkd(p, q, 6, {0.5, 0.5}), abkd_divergence(p, q, {0.5, 0.5}));
    EXPECT_EQ(topk_abkd(p, q, 60, {0.5, 0.5}), abkd_divergence(p, q, {0.5, 0.5}));
}

TEST(TopK, RestrictedPairIsRenormalized) {
    const CategoricalDist p({0.5, 0.3, 0.2}), q({0.2, 0.2, 0.6});
    const auto m = topk_mask(p, 2);
    const auto qs = m.restrict(q);
    EXPECT_EQ(qs.probs(), (std::vector<double>{0.5, 0.5}));
    EXPECT_NEAR(m.teacher[0], 0.625, 1e-15);
    EXPECT_NEAR(topk_abkd(p, q, 2, {1, 1}), 0.5 * 2 * 0.125 * 0.125, 1e-15);
}
