#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "vggsvm/binary_io.hpp"
#include "vggsvm/error.hpp"
#include "vggsvm/svm.hpp"

using namespace vggsvm;
using vggsvm::dataset::LabeledFeatureSet;

namespace {

LabeledFeatureSet make_set(std::vector<std::vector<double>> rows, std::vector<std::int8_t> labels)
{
    oracle::SvmProblem p{std::move(rows), std::move(labels)};
    return oracle::to_feature_set(p);
}

LabeledFeatureSet two_points() { return make_set({{1, 0}, {-1, 0}}, {1, -1}); }

LabeledFeatureSet xor_points() { return make_set({{1, 1}, {-1, -1}, {1, -1}, {-1, 1}}, {1, 1, -1, -1}); }

svm::SvmTrainConfig hard()
{
    svm::SvmTrainConfig c;
    c.margin = svm::MarginMode::Hard;
    return c;
}

}  // namespace

TEST(Kernel, ExamplesFromClosedForm)
{
    const std::vector<double> x{1, 2}, z{3, 4};
    EXPECT_DOUBLE_EQ(svm::kernel_eval(svm::KernelSpec::linear(), x, z), 11.0);
    EXPECT_DOUBLE_EQ(svm::kernel_eval(svm::KernelSpec::rbf(0.3), x, x), 1.0);
    const std::vector<double> o{0, 0}, one{1, 1};
    EXPECT_NEAR(svm::kernel_eval(svm::KernelSpec::rbf(0.5), o, one), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(svm::kernel_eval(svm::KernelSpec::rbf(0.5), o, one), 0.367879, 1e-6);
}

TEST(Kernel, DimensionMismatchThrows)
{
    const std::vector<double> a{1, 2}, b{1, 2, 3};
    EXPECT_THROW((void)svm::kernel_eval(svm::KernelSpec::linear(), a, b), PreconditionError);
}

TEST(Kernel, InvalidGammaRejected)
{
    EXPECT_THROW(svm::KernelSpec::rbf(0.0).validate(), PreconditionError);
    EXPECT_THROW(svm::KernelSpec::rbf(-1.0).validate(), PreconditionError);
    EXPECT_THROW(svm::KernelSpec::rbf(NAN).validate(), PreconditionError);
    EXPECT_NO_THROW(svm::KernelSpec::linear().validate());
}

TEST(Kernel, ParseNames)
{
    EXPECT_EQ(svm::parse_kernel("RBF"), svm::KernelKind::Rbf);
    EXPECT_EQ(svm::parse_kernel("linear"), svm::KernelKind::Linear);
    EXPECT_THROW((void)svm::parse_kernel("poly"), PreconditionError);
    EXPECT_EQ(svm::parse_margin("hard"), svm::MarginMode::Hard);
    EXPECT_THROW((void)svm::parse_margin("medium"), PreconditionError);
}

TEST(Gram, SingleRow)
{
    const Tensor X({1, 3}, std::vector<double>{1, 2, 3});
    const auto K = svm::gram_matrix(svm::KernelSpec::rbf(2.0), X);
    ASSERT_EQ(K.shape(), (Tensor::Shape{1, 1}));
    EXPECT_EQ(K[0], 1.0);
}

TEST(Gram, RbfIsPositiveSemidefinite)
{
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep)
    {
        const auto X = oracle::random_tensor(rng, {5, 3});
        const auto K = svm::gram_matrix(svm::KernelSpec::rbf(0.7), X);
        Eigen::MatrixXd M = Eigen::Map<const Eigen::Matrix<double, 5, 5, Eigen::RowMajor>>(K.data().data());
        EXPECT_TRUE(M.isApprox(M.transpose(), 0.0));
        for (int i = 0; i < 5; ++i) EXPECT_EQ(M(i, i), 1.0);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff(), -1e-8);
    }
}

TEST(Gram, DuplicateRowsGiveIdenticalRows)
{
    const Tensor X({3, 2}, std::vector<double>{0.5, 1, 0.5, 1, -2, 3});
    const auto K = svm::gram_matrix(svm::KernelSpec::rbf(1.0), X);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(K[0 * 3 + j], K[1 * 3 + j]);
}

TEST(Gram, NonFiniteInputRejected)
{
    const Tensor X({2, 2}, std::vector<double>{0, INFINITY, 1, 1});
    EXPECT_THROW((void)svm::gram_matrix(svm::KernelSpec::linear(), X), PreconditionError);
}

TEST(Train, TwoPointAnalyticSolution)
{
    const auto r = svm::train(two_points(), svm::KernelSpec::linear(), hard());
    ASSERT_TRUE(r.converged);
    ASSERT_EQ(r.alphas.size(), 2u);
    EXPECT_NEAR(r.alphas[0], 0.5, 1e-6);
    EXPECT_NEAR(r.alphas[1], 0.5, 1e-6);
    EXPECT_NEAR(r.model.bias, 0.0, 1e-6);
    const std::vector<double> p{2, 0}, zero{0, 0};
    EXPECT_NEAR(svm::decision_function(r.model, p), 2.0, 1e-6);
    EXPECT_NEAR(svm::decision_function(r.model, zero), 0.0, 1e-9);
    const Tensor probe({1, 2}, std::vector<double>{5, 0});
    EXPECT_EQ(svm::predict(r.model, probe)[0], 1);
}

TEST(Train, XorNeedsTheRbfKernel)
{
    const auto data = xor_points();
    const auto rbf = svm::train(data, svm::KernelSpec::rbf(1.0), hard());
    EXPECT_TRUE(rbf.converged);
    EXPECT_EQ(rbf.model.size(), 4u);
    EXPECT_EQ(svm::predict(rbf.model, data.vectors), data.labels);

    const auto lin = svm::train(data, svm::KernelSpec::linear(), hard());
    const auto pred = svm::predict(lin.model, data.vectors);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 4; ++i) correct += pred[i] == data.labels[i];
    EXPECT_LE(correct, 3u);
}

TEST(Train, TinyCCollapsesTheBox)
{
    std::mt19937_64 rng(5);
    const auto p = oracle::random_problem(rng, 20, 3, 0.0, 0.2);
    svm::SvmTrainConfig cfg;
    cfg.C = 1e-12;
    const auto r = svm::train(oracle::to_feature_set(p), svm::KernelSpec::rbf(0.5), cfg);
    for (double a : r.alphas) EXPECT_LE(a, 1e-12);
    const auto f = svm::decision_values(r.model, oracle::to_feature_set(p).vectors);
    for (double v : f) EXPECT_NEAR(v, r.model.bias, 1e-9);
    EXPECT_TRUE(std::any_of(r.warnings.begin(), r.warnings.end(),
                            [](const std::string& w) { return w.find("degenerate margin") != std::string::npos; }));
}

TEST(Train, RejectsSingleClassAndTinyInputs)
{
    EXPECT_THROW((void)svm::train(make_set({{1}, {2}}, {1, 1}), svm::KernelSpec::linear(), {}), PreconditionError);
    EXPECT_THROW((void)svm::train(make_set({{1}}, {1}), svm::KernelSpec::linear(), {}), PreconditionError);
    auto bad = make_set({{1}, {NAN}}, {1, -1});
    EXPECT_THROW((void)svm::train(bad, svm::KernelSpec::linear(), {}), PreconditionError);
}

TEST(Train, IterationCapIsReported)
{
    std::mt19937_64 rng(9);
    const auto p = oracle::random_problem(rng, 30, 3, 0.0, 0.2);
    svm::SvmTrainConfig cfg;
    cfg.C = 1.0;
    cfg.max_iterations = 3;
    const auto r = svm::train(oracle::to_feature_set(p), svm::KernelSpec::rbf(0.5), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3u);
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_NE(r.warnings.front().find("iteration limit (3)"), std::string::npos);
}

TEST(Train, HardModeIgnoresC)
{
    svm::SvmTrainConfig cfg = hard();
    cfg.C = 0.001;
    EXPECT_EQ(cfg.effective_c(), svm::kHardMarginC);
    const auto r = svm::train(two_points(), svm::KernelSpec::linear(), cfg);
    EXPECT_EQ(r.model.train_C, svm::kHardMarginC);
}

class SvmRandom : public ::testing::TestWithParam<int>
{
};

// Feasibility, KKT at the default tolerance and agreement with the dense oracle.
TEST_P(SvmRandom, MatchesOracleAndSatisfiesKkt)
{
    std::mt19937_64 rng(1000 + GetParam());
    const double Cs[] = {0.001, 1.0, 1e6};
    const bool rbf = GetParam() % 2;
    const double C = Cs[GetParam() % 3];
    const std::size_t n = 4 + GetParam() % 27;
    const std::size_t d = 1 + GetParam() % 5;
    const auto p = oracle::random_problem(rng, n, d, 0.3, C > 1e3 ? 0.0 : 0.1);
    const double gamma = rbf ? 1.0 / static_cast<double>(d) : 0.0;
    const auto data = oracle::to_feature_set(p);

    svm::SvmTrainConfig cfg;
    cfg.C = C;
    cfg.seed = GetParam();
    const auto kernel = rbf ? svm::KernelSpec::rbf(gamma) : svm::KernelSpec::linear();
    const auto r = svm::train(data, kernel, cfg);
    ASSERT_TRUE(r.converged);

    Eigen::VectorXd y(n), a(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        y(i) = p.y[i];
        a(i) = r.alphas[i];
        EXPECT_GE(r.alphas[i], 0.0);
        EXPECT_LE(r.alphas[i], C);
    }
    EXPECT_LE(std::abs(a.dot(y)), 1e-6);
    const auto K = oracle::kernel_matrix(rbf, gamma, p.X);
    EXPECT_LE(oracle::kkt_violation(K, y, a, r.model.bias, C, 0.0), 1e-3);

    cfg.kkt_tolerance = 1e-8;
    const auto tight = svm::train(data, kernel, cfg);
    const auto o = oracle::solve_dual(K, y, C);
    EXPECT_NEAR(tight.dual_objective, o.objective, 1e-5);
    EXPECT_NEAR(svm::dual_objective(kernel, data, tight.alphas), tight.dual_objective, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Seeds, SvmRandom, ::testing::Range(0, 30));

TEST(Train, ObjectiveNeverDecreasesAcrossUpdates)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep)
    {
        const auto p = oracle::random_problem(rng, 25, 3, 0.0, 0.15);
        svm::SvmTrainConfig cfg;
        cfg.C = rep % 2 ? 1.0 : 10.0;
        cfg.record_objective = true;
        const auto r = svm::train(oracle::to_feature_set(p), svm::KernelSpec::rbf(0.4), cfg);
        ASSERT_EQ(r.objective_trace.size(), r.updates);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            EXPECT_GE(r.objective_trace[k], r.objective_trace[k - 1] - 1e-12 * (1.0 + std::abs(r.objective_trace[k])));
    }
}

TEST(Train, PruningLeavesDecisionsUnchanged)
{
    std::mt19937_64 rng(21);
    const auto p = oracle::random_problem(rng, 30, 4, 0.2, 0.1);
    const auto data = oracle::to_feature_set(p);
    svm::SvmTrainConfig cfg;
    cfg.C = 1.0;
    const auto kernel = svm::KernelSpec::rbf(0.3);
    const auto r = svm::train(data, kernel, cfg);
    ASSERT_LT(r.model.size(), data.size());
    for (double a : r.model.alphas) EXPECT_GT(a, 0.0);

    const auto probes = oracle::random_tensor(rng, {100, 4}, -3, 3);
    for (std::size_t k = 0; k < 100; ++k)
    {
        // Full expansion over every training point, zero multipliers included.
        double full = r.model.bias;
        for (std::size_t i = 0; i < data.size(); ++i)
            full += r.alphas[i] * data.labels[i] *
                    oracle::kernel(true, 0.3, std::vector<double>(data.vectors.row(i).begin(), data.vectors.row(i).end()),
                                   std::vector<double>(probes.row(k).begin(), probes.row(k).end()));
        EXPECT_NEAR(svm::decision_function(r.model, probes.row(k)), full, 1e-12);
    }
}

TEST(Predict, PositiveRescalingKeepsOrderAndLabels)
{
    std::mt19937_64 rng(8);
    const auto p = oracle::random_problem(rng, 20, 2, 0.2, 0.1);
    svm::SvmTrainConfig cfg;
    cfg.C = 1.0;
    const auto r = svm::train(oracle::to_feature_set(p), svm::KernelSpec::rbf(1.0), cfg);
    auto scaled = r.model;
    for (auto& a : scaled.alphas) a *= 3.7;
    scaled.bias *= 3.7;
    const auto probes = oracle::random_tensor(rng, {50, 2}, -2, 2);
    const auto f = svm::decision_values(r.model, probes);
    const auto g = svm::decision_values(scaled, probes);
    std::vector<std::size_t> oa(50), ob(50);
    for (std::size_t i = 0; i < 50; ++i) oa[i] = ob[i] = i;
    std::stable_sort(oa.begin(), oa.end(), [&](auto i, auto j) { return f[i] < f[j]; });
    std::stable_sort(ob.begin(), ob.end(), [&](auto i, auto j) { return g[i] < g[j]; });
    EXPECT_EQ(oa, ob);
    EXPECT_EQ(svm::predict(r.model, probes), svm::predict(scaled, probes));
}

TEST(Predict, ZeroDecisionIsPositive)
{
    svm::SvmModel m;
    m.kernel = svm::KernelSpec::linear();
    m.support_vectors = Tensor({1, 2}, std::vector<double>{1, 0});
    m.alphas = {1.0};
    m.sv_labels = {1};
    const Tensor X({1, 2}, std::vector<double>{0, 5});
    EXPECT_EQ(svm::decision_values(m, X)[0], 0.0);
    EXPECT_EQ(svm::predict(m, X)[0], 1);
    const Tensor wrong({1, 3});
    EXPECT_THROW((void)svm::predict(m, wrong), PreconditionError);
}

TEST(Predict, FreeSupportVectorsSitOnTheMargin)
{
    std::mt19937_64 rng(14);
    const auto p = oracle::random_problem(rng, 30, 2, 0.0, 0.1);
    const auto data = oracle::to_feature_set(p);
    svm::SvmTrainConfig cfg;
    cfg.C = 1.0;
    const auto r = svm::train(data, svm::KernelSpec::rbf(0.5), cfg);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        if (!(r.alphas[i] > 0.0 && r.alphas[i] < cfg.C)) continue;
        const double f = svm::decision_function(r.model, data.vectors.row(i));
        EXPECT_LT(std::abs(f - data.labels[i]), cfg.kkt_tolerance * 2.0);
        ++checked;
    }
    EXPECT_GT(checked, 0u);
}

TEST(Hinge, Examples)
{
    svm::SvmModel m;
    m.kernel = svm::KernelSpec::linear();
    m.support_vectors = Tensor({1, 1}, std::vector<double>{1});
    m.alphas = {1.0};
    m.sv_labels = {1};
    // f(x) = x
    EXPECT_DOUBLE_EQ(svm::hinge_loss(m, make_set({{0}}, {1})), 1.0);
    EXPECT_DOUBLE_EQ(svm::hinge_loss(m, make_set({{2}, {0.5}}, {1, 1})), 0.25);
    EXPECT_DOUBLE_EQ(svm::hinge_loss(m, make_set({{3}, {-1}}, {1, -1})), 0.0);
}

TEST(Hinge, SeparableLinearHardTrainsToZeroLoss)
{
    std::mt19937_64 rng(2);
    const auto p = oracle::random_problem(rng, 30, 3, 0.5, 0.0);
    const auto data = oracle::to_feature_set(p);
    const auto r = svm::train(data, svm::KernelSpec::linear(), hard());
    EXPECT_LT(svm::hinge_loss(r.model, data), 1e-3);
}

TEST(Standardizer, ZeroMeanUnitVariance)
{
    std::mt19937_64 rng(4);
    auto X = oracle::random_tensor(rng, {50, 3}, 2, 9);
    for (std::size_t i = 0; i < 50; ++i) X[i * 3 + 2] = 4.0;  // constant column
    const auto s = svm::Standardizer::fit(X);
    const auto Z = s.apply(X);
    for (std::size_t j = 0; j < 3; ++j)
    {
        double mean = 0, var = 0;
        for (std::size_t i = 0; i < 50; ++i) mean += Z[i * 3 + j] / 50;
        for (std::size_t i = 0; i < 50; ++i) var += (Z[i * 3 + j] - mean) * (Z[i * 3 + j] - mean) / 50;
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(var, j == 2 ? 0.0 : 1.0, 1e-12);
    }
}

TEST(ModelFile, RoundTripIsExact)
{
    const auto r = svm::train(xor_points(), svm::KernelSpec::rbf(1.0), hard());
    const auto bytes = svm::encode_model(r.model);
    EXPECT_EQ(bytes.size(), 4 + 4 + 1 + 8 * 3 + 8 * 2 + 4 * (1 + 8 + 16));
    const auto back = svm::decode_model(bytes);
    EXPECT_EQ(back.alphas, r.model.alphas);
    EXPECT_EQ(back.sv_labels, r.model.sv_labels);
    EXPECT_EQ(back.support_vectors, r.model.support_vectors);
    EXPECT_EQ(back.bias, r.model.bias);
    EXPECT_EQ(back.kernel, r.model.kernel);
    EXPECT_EQ(back.train_C, r.model.train_C);
    EXPECT_EQ(svm::encode_model(back), bytes);
}

TEST(ModelFile, Errors)
{
    const auto r = svm::train(two_points(), svm::KernelSpec::linear(), hard());
    auto bytes = svm::encode_model(r.model);
    auto bad = bytes;
    bad[0] = 'X';
    try
    {
        (void)svm::decode_model(bad);
        FAIL();
    }
    catch (const FormatError& e)
    {
        EXPECT_EQ(e.kind(), FormatError::Kind::BadMagic);
    }
    bad = bytes;
    bad[4] = 9;
    try
    {
        (void)svm::decode_model(bad);
        FAIL();
    }
    catch (const FormatError& e)
    {
        EXPECT_EQ(e.kind(), FormatError::Kind::UnsupportedVersion);
    }
    bad.assign(bytes.begin(), bytes.end() - 3);
    try
    {
        (void)svm::decode_model(bad);
        FAIL();
    }
    catch (const FormatError& e)
    {
        EXPECT_EQ(e.kind(), FormatError::Kind::Truncated);
    }
}

TEST(ModelFile, SaveLoad)
{
    const auto dir = std::filesystem::temp_directory_path() / "vggsvm_svm_model_test";
    std::filesystem::create_directories(dir);
    const auto r = svm::train(xor_points(), svm::KernelSpec::rbf(1.0), hard());
    svm::save_model(dir / "m.hsvm", r.model);
    const auto back = svm::load_model(dir / "m.hsvm");
    EXPECT_EQ(svm::encode_model(back), svm::encode_model(r.model));
    std::filesystem::remove_all(dir);
}
