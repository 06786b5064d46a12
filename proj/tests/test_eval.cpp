#include "test_util.hpp"

using namespace hire;
using namespace hire_test;

namespace
{

DataBundle small_bundle(std::uint64_t seed)
{
  SynthConfig c;
  c.n_users = 40;
  c.n_items = 35;
  c.latent_dim = 3;
  c.user_layers = {8, 3};
  c.item_layers = {7};
  c.density = 0.3;
  return DataBundle::from_synth(synth_dataset(c, seed), "small");
}

HyperParams quick_hyper()
{
  HyperParams h;
  h.latent_dim = 3;
  h.max_iters = 20;
  h.lambda = 0.5;
  return h;
}

RatingMatrix two_ratings()
{
  return RatingMatrix(IdIndex::range(2), IdIndex::range(1), {{0, 0, 1.0}, {1, 0, 5.0}}, 1.0, 5.0);
}

} // namespace

TEST(Rmse, ConstantPredictor)
{
  EXPECT_DOUBLE_EQ(rmse(std::vector<double>{3.0, 3.0}, two_ratings()), 2.0);
  EXPECT_DOUBLE_EQ(rmse(std::vector<double>{1.0, 5.0}, two_ratings()), 0.0);
}

TEST(Rmse, EmptyAndMisalignedInputs)
{
  const RatingMatrix empty(IdIndex::range(2), IdIndex::range(1), {}, 1.0, 5.0);
  EXPECT_THROW(rmse(std::vector<double>{}, empty), DataError);
  EXPECT_THROW(rmse(std::vector<double>{1.0}, two_ratings()), ShapeError);
}

TEST(Rmse, PermutationInvariant)
{
  Rng rng(1);
  std::vector<Rating> e;
  std::vector<double> by_user;
  for (Index i = 0; i < 30; ++i) {
    e.push_back({i, 0, 1.0 + 4.0 * rng.uniform()});
    by_user.push_back(1.0 + 4.0 * rng.uniform());
  }
  const auto aligned = [&](const RatingMatrix &r) {
    std::vector<double> out;
    for (const Rating &x : r.entries())
      out.push_back(by_user[std::size_t(x.user)]);
    return out;
  };
  const RatingMatrix a(IdIndex::range(30), IdIndex::range(1), e, 1.0, 5.0);
  std::reverse(e.begin(), e.end());
  const RatingMatrix b(IdIndex::range(30), IdIndex::range(1), e, 1.0, 5.0);
  EXPECT_NEAR(rmse(aligned(a), a), rmse(aligned(b), b), 1e-14);
}

TEST(Rmse, ClampingNeverHurts)
{
  const auto b = small_bundle(2);
  auto [train_set, test_set] = split_ratings(b.ratings, SplitSpec{0.8, 3});
  const HyperParams h = quick_hyper();
  const Problem p = base_problem(b, h).with_ratings(train_set);
  HireModel m = init_model(p, h, 4);
  train(m, p, h);
  EXPECT_LE(rmse(m, test_set, true), rmse(m, test_set, false));
}

TEST(Variants, SetExactlyOneWeightToZero)
{
  HyperParams h;
  h.alpha = 1;
  h.beta = 2;
  h.gamma = 3;
  h.theta = 4;
  EXPECT_EQ(apply_variant(h, Variant::no_user_flat).gamma, 0.0);
  EXPECT_EQ(apply_variant(h, Variant::no_user_flat).theta, 4.0);
  EXPECT_EQ(apply_variant(h, Variant::no_item_flat).theta, 0.0);
  EXPECT_EQ(apply_variant(h, Variant::no_user_struct).alpha, 0.0);
  EXPECT_EQ(apply_variant(h, Variant::no_item_struct).beta, 0.0);
  EXPECT_EQ(apply_variant(h, Variant::no_item_struct).alpha, 1.0);
  EXPECT_STREQ(variant_name(Variant::no_item_struct), "SV");
  EXPECT_THROW(set_hyper(h, "delta", 1.0), ConfigError);
}

TEST(Experiment, SplitsAndRepeats)
{
  const auto b = small_bundle(5);
  ExperimentOptions opt;
  opt.fractions = {0.5, 0.7, 0.9};
  opt.repeats = 2;
  opt.seed = 7;
  const auto res = run_experiment(b, opt, quick_hyper());
  ASSERT_EQ(res.size(), 3u);
  for (const auto &r : res) {
    ASSERT_EQ(r.rmse.size(), 2u);
    EXPECT_NE(r.partition_hashes[0], r.partition_hashes[1]);
    EXPECT_GT(r.stddev, 0.0);
    EXPECT_NEAR(r.mean, (r.rmse[0] + r.rmse[1]) / 2, 1e-14);
    EXPECT_NEAR(r.stddev, std::abs(r.rmse[0] - r.rmse[1]) / std::sqrt(2.0), 1e-12);
  }
  opt.repeats = 1;
  const auto one = run_experiment(b, opt, quick_hyper());
  EXPECT_EQ(one[0].stddev, 0.0);
  // repeat 0 uses the same split whatever the repeat count
  EXPECT_EQ(one[1].partition_hashes[0], res[1].partition_hashes[0]);
  EXPECT_EQ(one[1].rmse[0], res[1].rmse[0]);
}

TEST(Experiment, DeterministicAndThreadIndependent)
{
  const auto b = small_bundle(6);
  ExperimentOptions opt;
  opt.repeats = 3;
  opt.seed = 11;
  const auto a = run_experiment(b, opt, quick_hyper());
  const auto c = run_experiment(b, opt, quick_hyper());
  opt.threads = 3;
  const auto t = run_experiment(b, opt, quick_hyper());
  EXPECT_EQ(a[0].rmse, c[0].rmse);
  EXPECT_EQ(a[0].rmse, t[0].rmse);
  EXPECT_EQ(a[0].partition_hashes, t[0].partition_hashes);
}

TEST(Experiment, InvalidOptions)
{
  const auto b = small_bundle(7);
  ExperimentOptions opt;
  opt.repeats = 0;
  EXPECT_THROW(run_experiment(b, opt, quick_hyper()), ConfigError);
  opt.repeats = 1;
  opt.fractions = {1.0};
  EXPECT_THROW(run_experiment(b, opt, quick_hyper()), ConfigError);
}

TEST(Ablation, SameSplitsForEveryVariant)
{
  const auto b = small_bundle(8);
  ExperimentOptions opt;
  opt.repeats = 2;
  opt.seed = 3;
  HyperParams h = quick_hyper();
  h.alpha = h.beta = h.gamma = h.theta = 0.5;
  const auto res = ablation_suite(b, opt, h);
  ASSERT_EQ(res.size(), 5u);
  const std::vector<std::string> names{"full", "FU", "FV", "SU", "SV"};
  for (std::size_t k = 0; k < res.size(); ++k) {
    EXPECT_EQ(res[k].variant, names[k]);
    EXPECT_EQ(res[k].partition_hashes, res[0].partition_hashes);
  }
  EXPECT_EQ(res[1].hyper.gamma, 0.0);
  EXPECT_EQ(res[4].hyper.beta, 0.0);
}

TEST(Sweep, ZeroValueEqualsAblation)
{
  const auto b = small_bundle(9);
  ExperimentOptions opt;
  opt.seed = 4;
  HyperParams h = quick_hyper();
  h.gamma = 0.8;
  const auto sweep = sensitivity_sweep(b, "gamma", {0.0, 0.8}, h, opt);
  ASSERT_EQ(sweep.size(), 2u);
  const auto fu = run_experiment(b, opt, apply_variant(h, Variant::no_user_flat));
  const auto full = run_experiment(b, opt, h);
  EXPECT_EQ(sweep[0].result.rmse, fu[0].rmse);
  EXPECT_EQ(sweep[1].result.rmse, full[0].rmse);
  EXPECT_EQ(sweep[0].result.variant, "gamma=0");
}

TEST(Sweep, SingleValueAndValidation)
{
  const auto b = small_bundle(10);
  ExperimentOptions opt;
  opt.fractions = {0.6, 0.8};
  const auto one = sensitivity_sweep(b, "theta", {0.1}, quick_hyper(), opt);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].result.split, 0.6);
  EXPECT_THROW(sensitivity_sweep(b, "theta", {}, quick_hyper(), opt), ConfigError);
  EXPECT_THROW(sensitivity_sweep(b, "theta", {-1.0}, quick_hyper(), opt), ConfigError);
  EXPECT_THROW(sensitivity_sweep(b, "lambda", {1.0}, quick_hyper(), opt), ConfigError);
}

TEST(GridSearch, PicksTheBestCvPoint)
{
  const auto b = small_bundle(11);
  HyperParams h = quick_hyper();
  const auto g = grid_search(b, {{"lambda", {0.1, 1.0}}, {"gamma", {0.0, 0.5}}}, h, 3, 5);
  ASSERT_EQ(g.points.size(), 4u);
  double best = 1e300;
  for (const auto &p : g.points)
    best = std::min(best, p.cv_rmse);
  EXPECT_EQ(g.best_cv_rmse, best);
  for (const auto &p : g.points)
    if (p.cv_rmse == best) {
      EXPECT_EQ(g.best.lambda, p.setting[0].second);
      EXPECT_EQ(g.best.gamma, p.setting[1].second);
    }
  EXPECT_THROW(grid_search(b, {{"lambda", {}}}, h, 3, 5), ConfigError);
  EXPECT_THROW(grid_search(b, {{"lambda", {1.0}}}, h, 1, 5), ConfigError);
}

TEST(Gradcheck, AllBlocksPassOnRandomInstances)
{
  HyperParams h;
  h.lambda = 0.3;
  h.alpha = 0.7;
  h.beta = 0.5;
  h.gamma = 0.4;
  h.theta = 0.6;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto rep = gradcheck(GradcheckConfig{}, h, seed, 1e-5);
    EXPECT_TRUE(rep.all_passed()) << "seed " << seed << " max error " << rep.max_error();
    EXPECT_EQ(rep.entries.size(), 8u); // U1..U3, V3..V1, Su, Sv
  }
}

TEST(Gradcheck, FlagsASignFlippedBlock)
{
  HyperParams h;
  const GradientFn broken = [](const HireModel &m, const Problem &p, const HyperParams &hh, const Block &b) {
    Matrix g = block_gradient(m, p, hh, b);
    if (b.kind == Block::Kind::user_factor && b.index == 2)
      g = -g;
    return g;
  };
  const auto rep = gradcheck(GradcheckConfig{}, h, 1, 1e-5, 1e-4, broken);
  EXPECT_FALSE(rep.all_passed());
  for (const auto &e : rep.entries)
    EXPECT_EQ(e.passed, e.block != "U2") << e.block;
}

TEST(Gradcheck, StableAcrossStepSizes)
{
  HyperParams h;
  const auto a = gradcheck(GradcheckConfig{}, h, 2, 1e-5);
  const auto b = gradcheck(GradcheckConfig{}, h, 2, 1e-6);
  EXPECT_TRUE(a.all_passed());
  EXPECT_TRUE(b.all_passed());
  // both steps sit far below the pass threshold
  EXPECT_LT(a.max_error(), 1e-6);
  EXPECT_LT(b.max_error(), 1e-6);
}
