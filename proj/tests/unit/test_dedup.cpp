#include <gtest/gtest.h>

#include <cmath>

#include "fixture.hpp"
#include "reference.hpp"
#include "sectrain/dedup.hpp"
#include "sectrain/util/rng.hpp"

using namespace sectrain;
using namespace sectrain::dedup;

namespace {

CorpusRecord rec(std::string id, std::string text) {
    CorpusRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    return r;
}

std::string words(std::size_t from, std::size_t to, const std::string& prefix = "w") {
    std::string s;
    for (std::size_t i = from; i < to; ++i) s += prefix + std::to_string(i) + " ";
    return s;
}

std::string random_text(Rng& rng, std::size_t n, std::size_t vocab) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += "t" + std::to_string(rng.below(vocab)) + " ";
    return s;
}

std::vector<double> gaussian(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<std::vector<double>> similarity_matrix(const std::vector<SparseFeatureVector>& v) {
    std::vector<std::vector<double>> s(v.size(), std::vector<double>(v.size(), 0.0));
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) s[i][j] = i == j ? 1.0 : cosine(v[i], v[j]);
    }
    return s;
}

}  // namespace

TEST(ExactDedup, KeepsFirstOccurrence) {
    const auto res = exact_dedup({rec("A", "x"), rec("B", "x"), rec("C", "y")});
    ASSERT_EQ(res.kept.size(), 2u);
    EXPECT_EQ(res.kept[0].id, "A");
    EXPECT_EQ(res.kept[1].id, "C");
    ASSERT_EQ(res.dropped.size(), 1u);
    EXPECT_EQ(res.dropped[0], (DropEntry{"B", "A", "exact_duplicate"}));
}

TEST(ExactDedup, DistinctCorpusDropsNothing) {
    EXPECT_TRUE(exact_dedup({rec("a", "1"), rec("b", "2"), rec("c", "3")}).dropped.empty());
}

TEST(ExactDedup, HundredRecordsWithTenPlantedDuplicates) {
    std::vector<CorpusRecord> rs;
    for (int i = 0; i < 90; ++i) rs.push_back(rec("r" + std::to_string(i), "document " + std::to_string(i)));
    for (int i = 0; i < 10; ++i) rs.push_back(rec("d" + std::to_string(i), "document " + std::to_string(i * 7)));
    const auto once = exact_dedup(rs);
    EXPECT_EQ(once.kept.size(), 90u);
    EXPECT_EQ(once.dropped.size(), 10u);
    const auto twice = exact_dedup(once.kept);
    EXPECT_EQ(twice.kept, once.kept);
    EXPECT_TRUE(twice.dropped.empty());
}

TEST(MinHash, ShortTextIsRejected) {
    EXPECT_THROW(minhash_signature("only four tokens here", 5, 128, 1), ShingleError);
    EXPECT_NO_THROW(minhash_signature("exactly five tokens right here", 5, 128, 1));
}

TEST(MinHash, DeterministicAndLengthH) {
    const std::string t = words(0, 40);
    const auto a = minhash_signature(t, 5, 128, 9);
    EXPECT_EQ(a.hashes.size(), 128u);
    EXPECT_EQ(a, minhash_signature(t, 5, 128, 9));
    EXPECT_NE(a, minhash_signature(t, 5, 128, 10));
    EXPECT_EQ(a.similarity(minhash_signature(t, 5, 128, 9)), 1.0);
}

TEST(MinHash, CaseAndSpacingDoNotMatter) {
    EXPECT_EQ(minhash_signature("Alpha BETA gamma delta epsilon", 5, 64, 1),
              minhash_signature("alpha  beta\tgamma\ndelta epsilon", 5, 64, 1));
}

TEST(MinHash, DisjointTextsEstimateZero) {
    const auto a = minhash_signature(words(0, 100, "a"), 5, 128, 1);
    const auto b = minhash_signature(words(0, 100, "b"), 5, 128, 1);
    EXPECT_EQ(a.similarity(b), 0.0);
}

TEST(MinHash, HalfOverlapEstimateWithinTenPoints) {
    const std::string a = words(0, 60), b = words(20, 80);
    ASSERT_DOUBLE_EQ(reference::jaccard(reference::shingles(a, 1), reference::shingles(b, 1)), 0.5);
    const double est = minhash_signature(a, 1, 128, 1).similarity(minhash_signature(b, 1, 128, 1));
    EXPECT_NEAR(est, 0.5, 0.10);
}

TEST(MinHash, EstimatorIsUnbiasedAcrossSeeds) {
    const std::string a = words(0, 60), b = words(20, 80);
    double sum = 0.0;
    int outside = 0;
    const int seeds = 1000;
    for (int s = 1; s <= seeds; ++s) {
        const double est = minhash_signature(a, 1, 128, s).similarity(minhash_signature(b, 1, 128, s));
        sum += est;
        outside += std::abs(est - 0.5) > 0.10;
    }
    // binomial(128, 0.5) / 128: sd 0.044, so about 2.5% of seeds fall outside +-0.10
    EXPECT_NEAR(sum / seeds, 0.5, 0.005);
    EXPECT_LT(outside, 50);
}

TEST(MinHash, MeanErrorAgainstExactJaccard) {
    Rng rng(11);
    double total = 0.0;
    const int pairs = 60;
    for (int p = 0; p < pairs; ++p) {
        const std::string a = random_text(rng, 80, 60);
        std::string b;
        const auto tokens = reference::ascii_tokens(a);
        const double keep = rng.uniform();
        for (const auto& t : tokens) b += (rng.uniform() < keep ? t : "z" + std::to_string(rng.below(90))) + " ";
        const double exact = reference::jaccard(reference::shingles(a, 3), reference::shingles(b, 3));
        const double est = minhash_signature(a, 3, 128, 5).similarity(minhash_signature(b, 3, 128, 5));
        total += std::abs(est - exact);
    }
    EXPECT_LE(total / pairs, 0.08);
}

TEST(Lsh, BandShapeMustCoverSignature) {
    const std::vector<MinHashSignature> sigs{minhash_signature(words(0, 10), 5, 128, 1)};
    EXPECT_THROW(lsh_near_duplicates(sigs, 16, 4, 0.8), std::invalid_argument);
    EXPECT_NO_THROW(lsh_near_duplicates(sigs, 16, 8, 0.8));
}

TEST(Lsh, IdenticalSignaturesFormOneCluster) {
    const auto s = minhash_signature(words(0, 30), 5, 128, 1);
    const std::vector<MinHashSignature> sigs{s, s};
    const auto res = lsh_near_duplicates(sigs, 16, 8, 0.8);
    ASSERT_EQ(res.clusters.size(), 1u);
    EXPECT_EQ(res.clusters[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(res.droppable, (std::vector<std::size_t>{1}));
}

TEST(Lsh, RandomTextsProduceNoClusters) {
    Rng rng(21);
    std::vector<MinHashSignature> sigs;
    for (int i = 0; i < 200; ++i) sigs.push_back(minhash_signature(random_text(rng, 120, 400), 5, 128, 3));
    const auto res = lsh_near_duplicates(sigs, 16, 8, 0.8);
    EXPECT_TRUE(res.clusters.empty());
    EXPECT_TRUE(res.droppable.empty());
}

TEST(Lsh, PlantedTripleIsOneClusterWithTwoDrops) {
    Rng rng(4);
    const std::string base = random_text(rng, 200, 5000);
    auto tokens = reference::ascii_tokens(base);
    const auto variant = [&](std::size_t at, const std::string& w) {
        auto t = tokens;
        t[at] = w;
        std::string s;
        for (const auto& x : t) s += x + " ";
        return s;
    };
    std::vector<std::string> texts{base, random_text(rng, 200, 5000), variant(60, "alpha"), variant(140, "omega")};
    for (std::size_t i = 0; i < texts.size(); ++i) {
        for (std::size_t j = i + 1; j < texts.size(); ++j) {
            const double jac = reference::jaccard(reference::shingles(texts[i], 5), reference::shingles(texts[j], 5));
            const bool planted = i != 1 && j != 1;
            EXPECT_EQ(jac >= 0.9, planted) << i << "," << j << " " << jac;
        }
    }
    std::vector<MinHashSignature> sigs;
    for (const auto& t : texts) sigs.push_back(minhash_signature(t, 5, 128, 8));
    const auto res = lsh_near_duplicates(sigs, 16, 8, 0.8);
    ASSERT_EQ(res.clusters.size(), 1u);
    EXPECT_EQ(res.clusters[0].members, (std::vector<std::size_t>{0, 2, 3}));
    EXPECT_EQ(res.clusters[0].keeper, 0u);
    EXPECT_EQ(res.droppable, (std::vector<std::size_t>{2, 3}));
}

TEST(SparseEncoder, RespectsSparsityAndOrdering) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto e = gaussian(rng, 24);
        const auto v = encode_sparse_features(e, 4096, 16, 77);
        EXPECT_LE(v.nnz(), 16u);
        EXPECT_EQ(v.dim, 4096u);
        for (std::size_t i = 1; i < v.indices.size(); ++i) EXPECT_LT(v.indices[i - 1], v.indices[i]);
        for (std::size_t i = 0; i < v.indices.size(); ++i) {
            EXPECT_LT(v.indices[i], 4096u);
            EXPECT_GT(v.values[i], 0.0);
        }
    }
}

TEST(SparseEncoder, IdenticalInputsGiveIdenticalCodes) {
    Rng rng(2);
    const auto e = gaussian(rng, 16);
    EXPECT_EQ(encode_sparse_features(e, 1024, 8, 5), encode_sparse_features(e, 1024, 8, 5));
}

TEST(SparseEncoder, ZeroEmbeddingHasEmptySupport) {
    const std::vector<double> z(16, 0.0);
    const auto v = encode_sparse_features(z, 1024, 8, 5);
    for (double x : v.values) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(squared_norm(v), 0.0);
}

TEST(SparseEncoder, ScaledCopiesHaveUnitCosine) {
    Rng rng(3);
    const auto e = gaussian(rng, 32);
    auto scaled = e;
    for (auto& x : scaled) x *= 3.5;
    const auto a = encode_sparse_features(e, 65536, 64, 9), b = encode_sparse_features(scaled, 65536, 64, 9);
    EXPECT_EQ(a.indices, b.indices);
    EXPECT_NEAR(cosine(a, b), 1.0, 1e-12);
}

TEST(SparseEncoder, DimensionMismatchThrows) {
    const RandomProjectionEncoder enc(8, 256, 4, 1);
    const std::vector<double> wrong(7, 1.0);
    EXPECT_THROW(enc.encode(wrong), std::invalid_argument);
}

TEST(NeighborhoodGraph, EdgesAboveTauWithoutSelfLoops) {
    Rng rng(6);
    std::vector<SparseFeatureVector> v;
    const auto base = gaussian(rng, 16);
    for (int i = 0; i < 30; ++i) {
        auto e = base;
        for (auto& x : e) x += rng.normal() * (i % 3 ? 0.9 : 0.05);
        v.push_back(encode_sparse_features(e, 2048, 32, 1));
    }
    const auto g = build_neighborhood_graph(v, 0.6);
    EXPECT_FALSE(g.edges.empty());
    for (const auto& e : g.edges) {
        EXPECT_LT(e.a, e.b);
        EXPECT_GE(e.weight, 0.6);
    }
    EXPECT_THROW(build_neighborhood_graph(v, 1.0), std::invalid_argument);
    EXPECT_THROW(build_neighborhood_graph(v, 0.0), std::invalid_argument);
}

TEST(FeatureDedup, TwinPlusOrthogonal) {
    const SparseFeatureVector x{{1, 5}, {1.0, 2.0}, 16}, y{{2, 9}, {1.0, 1.0}, 16};
    const std::vector<SparseFeatureVector> v{x, x, y};
    const auto res = feature_dedup(v, 0.9);
    ASSERT_EQ(res.retained.size(), 2u);
    EXPECT_EQ(res.retained, (std::vector<std::size_t>{0, 2}));
}

TEST(FeatureDedup, SparseGraphKeepsEverything) {
    const std::vector<SparseFeatureVector> v{{{0}, {1.0}, 8}, {{1}, {1.0}, 8}, {{0, 1}, {1.0, 1.0}, 8}};
    const auto res = feature_dedup(v, 0.9);
    EXPECT_EQ(res.retained.size(), 3u);
    EXPECT_EQ(res.edges, 0u);
}

TEST(FeatureDedup, FivePlantedPlusThreeDistinctLeavesFour) {
    Rng rng(12);
    const auto base = gaussian(rng, 32);
    std::vector<SparseFeatureVector> v;
    for (int i = 0; i < 5; ++i) {
        auto e = base;
        for (auto& x : e) x += 0.01 * rng.normal();
        v.push_back(encode_sparse_features(e, 4096, 64, 2));
    }
    for (int i = 0; i < 3; ++i) v.push_back(encode_sparse_features(gaussian(rng, 32), 4096, 64, 2));
    const auto sim = similarity_matrix(v);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) EXPECT_GE(sim[i][j], 0.9);
    }
    const auto res = feature_dedup(v, 0.9);
    EXPECT_EQ(res.retained.size(), 4u);
    EXPECT_EQ(res.retained, reference::greedy_prune(sim, 0.9));
}

TEST(FeatureDedup, MatchesBruteForceOnSmallInstances) {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        const std::size_t centers = 1 + rng.below(4);
        std::vector<std::vector<double>> c;
        for (std::size_t k = 0; k < centers; ++k) c.push_back(gaussian(rng, 12));
        std::vector<SparseFeatureVector> v;
        for (std::size_t i = 0; i < n; ++i) {
            auto e = c[rng.below(centers)];
            const double spread = rng.uniform(0.0, 0.6);
            for (auto& x : e) x += spread * rng.normal();
            v.push_back(encode_sparse_features(e, 512, 24, trial));
        }
        const double tau = rng.uniform(0.5, 0.95);
        EXPECT_EQ(feature_dedup(v, tau).retained, reference::greedy_prune(similarity_matrix(v), tau))
            << "trial " << trial;
    }
}

TEST(FeatureDedup, SurvivorsAreBelowTau) {
    Rng rng(14);
    std::vector<SparseFeatureVector> v;
    std::vector<std::vector<double>> centers;
    for (int k = 0; k < 10; ++k) centers.push_back(gaussian(rng, 16));
    for (int i = 0; i < 150; ++i) {
        auto e = centers[rng.below(10)];
        for (auto& x : e) x += 0.3 * rng.normal();
        v.push_back(encode_sparse_features(e, 1024, 32, 4));
    }
    const auto res = feature_dedup(v, 0.8);
    EXPECT_LT(res.retained.size(), v.size());
    for (std::size_t i = 0; i < res.retained.size(); ++i) {
        for (std::size_t j = i + 1; j < res.retained.size(); ++j) {
            EXPECT_LT(cosine(v[res.retained[i]], v[res.retained[j]]), 0.8);
        }
    }
    EXPECT_EQ(res.retained.size() + res.removed.size(), v.size());
}

TEST(FixtureCorpus, PlantedExactDuplicatesAreFound) {
    const auto corpus = fixture::generate(fixture::Spec{});
    std::vector<CorpusRecord> rs;
    for (const auto& j : corpus.records) {
        auto r = record_from_json(j);
        r.text = normalize_text(r.text);
        rs.push_back(r);
    }
    ASSERT_EQ(rs.size(), 100u);
    EXPECT_EQ(exact_dedup(rs).dropped.size(), corpus.spec.exact_dups);
}
