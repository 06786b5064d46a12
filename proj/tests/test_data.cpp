#include "test_util.hpp"

using namespace hire;
using namespace hire_test;

namespace
{

RatingSchema tab_schema()
{
  RatingSchema s;
  s.delimiter = '\t';
  s.has_header = false;
  return s;
}

} // namespace

TEST(IdIndex, NumericIdsSortNumerically)
{
  IdIndex ix({"10", "2", "1"});
  EXPECT_EQ(ix.ids(), (std::vector<std::string>{"1", "2", "10"}));
  EXPECT_EQ(*ix.find("10"), 2);
  EXPECT_FALSE(ix.find("3"));
  IdIndex words({"b", "a", "10"});
  EXPECT_EQ(words.ids(), (std::vector<std::string>{"10", "a", "b"}));
  EXPECT_THROW(IdIndex({"a", "a"}), DataError);
}

TEST(RatingMatrix, RejectsInvalidEntries)
{
  const auto u = IdIndex::range(2), i = IdIndex::range(2);
  EXPECT_THROW(RatingMatrix(u, i, {{0, 0, 3}, {0, 0, 4}}, 1, 5), DataError);
  EXPECT_THROW(RatingMatrix(u, i, {{0, 0, 6}}, 1, 5), DataError);
  EXPECT_THROW(RatingMatrix(u, i, {{0, 0, 0}}, 0, 5), DataError);
  EXPECT_THROW(RatingMatrix(u, i, {{2, 0, 3}}, 1, 5), DataError);
}

TEST(RatingMatrix, MaskMatchesStoredEntries)
{
  RatingMatrix r(IdIndex::range(3), IdIndex::range(2), {{2, 1, 4}, {0, 0, 1}}, 1, 5);
  const Matrix m = r.mask_dense();
  Matrix expect = Matrix::Zero(3, 2);
  expect(0, 0) = 1;
  expect(2, 1) = 1;
  EXPECT_EQ(m, expect);
  EXPECT_EQ(r.entries().front().user, 0); // sorted
}

TEST(LoadRatings, TabSeparatedWithTimestamp)
{
  const auto dir = scratch_dir("r");
  write_text(dir + "/u.data", "196\t242\t3\t881250949\n186\t302\t3\t891717742\n22\t377\t1\t878887116\n196\t302\t5\t1\n");
  const RatingMatrix r = load_ratings(dir + "/u.data", tab_schema());
  EXPECT_EQ(r.size(), 4u);
  EXPECT_EQ(r.n_users(), 3);
  EXPECT_EQ(r.n_items(), 3);
  EXPECT_EQ(r.users().ids(), (std::vector<std::string>{"22", "186", "196"}));
  EXPECT_EQ(r.items().ids(), (std::vector<std::string>{"242", "302", "377"}));
}

TEST(LoadRatings, EmptyFileGivesEmptyMatrix)
{
  const auto dir = scratch_dir("e");
  write_text(dir + "/empty.csv", "");
  const RatingMatrix r = load_ratings(dir + "/empty.csv", tab_schema());
  EXPECT_EQ(r.size(), 0u);
  EXPECT_EQ(r.n_users(), 0);
  EXPECT_EQ(r.n_items(), 0);
}

TEST(LoadRatings, MalformedRowReportsLine)
{
  const auto dir = scratch_dir("m");
  write_text(dir + "/r.csv", "user,item,rating\n1,2,3\n1,5\n");
  try {
    load_ratings(dir + "/r.csv", RatingSchema::canonical());
    FAIL();
  }
  catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("r.csv:3"), std::string::npos) << e.what();
  }
}

TEST(LoadRatings, OutOfRangeAndDuplicate)
{
  const auto dir = scratch_dir("o");
  write_text(dir + "/a.csv", "user,item,rating\n1,2,3\n1,3,7\n");
  EXPECT_THROW(load_ratings(dir + "/a.csv", RatingSchema::canonical()), DataError);
  write_text(dir + "/b.csv", "user,item,rating\n1,2,3\n1,2,4\n");
  try {
    load_ratings(dir + "/b.csv", RatingSchema::canonical());
    FAIL();
  }
  catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  write_text(dir + "/c.csv", "user,item,rating\n1,2,abc\n");
  EXPECT_THROW(load_ratings(dir + "/c.csv", RatingSchema::canonical()), DataError);
  EXPECT_THROW(load_ratings(dir + "/missing.csv", RatingSchema::canonical()), DataError);
}

TEST(LoadRatings, RoundTripIsExact)
{
  const auto d = synth_dataset(SynthConfig{}, 5);
  const auto dir = scratch_dir("rt");
  write_ratings(dir + "/r.csv", d.ratings);
  // skewed activity leaves some entities unrated, so reload against the saved indices
  const RatingMatrix back = load_ratings(dir + "/r.csv", RatingSchema::canonical(), &d.ratings.users(), &d.ratings.items());
  EXPECT_TRUE(back == d.ratings);
}

TEST(LoadRatings, FixedIndexRejectsUnknownIds)
{
  const auto dir = scratch_dir("fx");
  write_text(dir + "/r.csv", "user,item,rating\n1,2,3\n9,2,3\n");
  const IdIndex users({"1", "2"}), items({"2"});
  EXPECT_THROW(load_ratings(dir + "/r.csv", RatingSchema::canonical(), &users, &items), DataError);
}

TEST(Features, OneHotGender)
{
  const auto dir = scratch_dir("g");
  write_text(dir + "/u.csv", "id,gender\n1,M\n2,F\n3,M\n");
  FeatureFileSchema s;
  s.attributes = {AttributeEncoder::categorical("gender")};
  const auto f = load_flat_features(dir + "/u.csv", s, IdIndex({"1", "2", "3"}));
  ASSERT_EQ(f.dim(), 2);
  EXPECT_EQ(f.feature_names, (std::vector<std::string>{"gender=F", "gender=M"}));
  Matrix expect(2, 3);
  expect << 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(f.values, expect);
}

TEST(Features, AgeMinMaxScaled)
{
  const auto dir = scratch_dir("a");
  write_text(dir + "/u.csv", "id,age\n1,50\n2,0\n");
  FeatureFileSchema s;
  s.attributes = {AttributeEncoder::numeric("age", 0.0, 100.0)};
  const auto f = load_flat_features(dir + "/u.csv", s, IdIndex({"1", "2"}));
  EXPECT_DOUBLE_EQ(f.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(f.values(0, 1), 0.0);
}

TEST(Features, MissingProfileGivesZeroColumn)
{
  const auto dir = scratch_dir("z");
  write_text(dir + "/u.csv", "id,age,gender\n1,20,M\n3,,F\n");
  FeatureFileSchema s;
  s.attributes = {AttributeEncoder::numeric("age", 0.0, 100.0), AttributeEncoder::categorical("gender", {"F", "M"})};
  const auto f = load_flat_features(dir + "/u.csv", s, IdIndex({"1", "2", "3"}));
  EXPECT_TRUE(f.values.col(1).isZero(0.0));
  EXPECT_EQ(f.values(0, 2), 0.0); // missing age slot
  EXPECT_EQ(f.values(1, 2), 1.0);

  // a zero column is a fully corrupted input: the denoised output stays zero
  const MdaMap w = solve_marginalized(f.values, 0.3, 1e-6);
  EXPECT_TRUE(robust_features(w, f.values).col(1).isZero(0.0));
}

TEST(Features, ErrorsNameTheProblem)
{
  const auto dir = scratch_dir("err");
  FeatureFileSchema s;
  s.attributes = {AttributeEncoder::categorical("gender", {"F", "M"})};
  write_text(dir + "/a.csv", "id,gender\n1,X\n");
  try {
    load_flat_features(dir + "/a.csv", s, IdIndex({"1"}));
    FAIL();
  }
  catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("gender"), std::string::npos);
  }
  write_text(dir + "/b.csv", "id,gender\n7,M\n");
  EXPECT_THROW(load_flat_features(dir + "/b.csv", s, IdIndex({"1"})), DataError);
  s.ignore_unknown_ids = true;
  EXPECT_NO_THROW(load_flat_features(dir + "/b.csv", s, IdIndex({"1"})));
  FeatureFileSchema n;
  n.attributes = {AttributeEncoder::numeric("age", 0.0, 10.0)};
  write_text(dir + "/c.csv", "id,age\n1,11\n");
  EXPECT_THROW(load_flat_features(dir + "/c.csv", n, IdIndex({"1"})), DataError);
}

TEST(Features, EncodedRoundTrip)
{
  const auto d = synth_dataset(SynthConfig{}, 2);
  const auto dir = scratch_dir("enc");
  write_encoded_features(dir + "/f.csv", d.user_features, d.ratings.users());
  const auto back = read_encoded_features(dir + "/f.csv", d.ratings.users());
  EXPECT_EQ(back.values, d.user_features.values);
  EXPECT_EQ(back.feature_names, d.user_features.feature_names);
}

TEST(Hierarchy, TwoLeavesUnderOneParent)
{
  const auto dir = scratch_dir("h");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,p\n0,b,p\n");
  const Hierarchy h = load_hierarchy(dir + "/h.csv");
  ASSERT_EQ(h.n_layers(), 2);
  ASSERT_EQ(h.links().size(), 1u);
  EXPECT_EQ(h.links()[0], Matrix::Ones(2, 1));
}

TEST(Hierarchy, SingleLayerHasNoLinks)
{
  const auto dir = scratch_dir("s");
  write_text(dir + "/h.csv", "layer,child,parent\n");
  const IdIndex ents({"a", "b", "c"});
  const Hierarchy h = load_hierarchy(dir + "/h.csv", &ents);
  EXPECT_EQ(h.n_layers(), 1);
  EXPECT_TRUE(h.links().empty());
  EXPECT_EQ(h.entity_count(), 3);
}

TEST(Hierarchy, PathGraph)
{
  const auto dir = scratch_dir("p");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,b\n1,b,c\n");
  const Hierarchy h = load_hierarchy(dir + "/h.csv");
  ASSERT_EQ(h.links().size(), 2u);
  EXPECT_EQ(h.links()[0], Matrix::Ones(1, 1));
  EXPECT_EQ(h.links()[1], Matrix::Ones(1, 1));
  EXPECT_EQ(h.layer_sizes(), (std::vector<Index>{1, 1, 1}));
}

TEST(Hierarchy, CycleIsAnError)
{
  const auto dir = scratch_dir("c");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,b\n1,b,c\n1,c,b\n");
  try {
    load_hierarchy(dir + "/h.csv");
    FAIL();
  }
  catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos) << e.what();
  }
}

TEST(Hierarchy, OrphanIsListed)
{
  const auto dir = scratch_dir("o");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,g\n");
  const IdIndex ents({"a", "lonely"});
  try {
    load_hierarchy(dir + "/h.csv", &ents);
    FAIL();
  }
  catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("'lonely'"), std::string::npos) << e.what();
  }
  // an upper-layer orphan
  write_text(dir + "/h2.csv", "layer,child,parent\n0,a,g1\n0,b,g2\n1,g1,top\n");
  EXPECT_THROW(load_hierarchy(dir + "/h2.csv"), DataError);
}

TEST(Hierarchy, MultiParentAllowed)
{
  const auto dir = scratch_dir("mp");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,x\n0,a,y\n0,b,y\n");
  const Hierarchy h = load_hierarchy(dir + "/h.csv");
  Matrix t(2, 2);
  t << 1, 1, 0, 1;
  EXPECT_EQ(h.links()[0], t);
}

TEST(Hierarchy, NodeInTwoLayersIsAnError)
{
  const auto dir = scratch_dir("tl");
  write_text(dir + "/h.csv", "layer,child,parent\n0,a,b\n0,b,c\n");
  EXPECT_THROW(load_hierarchy(dir + "/h.csv"), DataError);
}

TEST(Hierarchy, ConstructorRejectsOrphans)
{
  Matrix t(2, 1);
  t << 1, 0;
  EXPECT_THROW(Hierarchy({t}), DataError);
}

TEST(Hierarchy, WriteReadRoundTrip)
{
  const auto d = synth_dataset(SynthConfig{}, 3);
  const auto dir = scratch_dir("wr");
  write_hierarchy(dir + "/h.csv", d.user_hierarchy, &d.ratings.users());
  const Hierarchy back = load_hierarchy(dir + "/h.csv", &d.ratings.users());
  EXPECT_EQ(back.layer_sizes(), d.user_hierarchy.layer_sizes());
  for (std::size_t k = 0; k < back.links().size(); ++k)
    EXPECT_EQ(back.links()[k], d.user_hierarchy.links()[k]);
}

TEST(Split, SizesAndDeterminism)
{
  std::vector<Rating> e;
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j)
      e.push_back({i, j, 1.0 + double((i + j) % 5)});
  const RatingMatrix r(IdIndex::range(10), IdIndex::range(10), e, 1, 5);
  const auto [tr, te] = split_ratings(r, {0.8, 17});
  EXPECT_EQ(tr.size(), 80u);
  EXPECT_EQ(te.size(), 20u);
  const auto [tr2, te2] = split_ratings(r, {0.8, 17});
  EXPECT_TRUE(tr == tr2);
  EXPECT_TRUE(te == te2);
  EXPECT_EQ(tr.n_users(), 10);

  // disjoint, union is everything
  std::set<std::pair<Index, Index>> all;
  for (const auto &x : tr.entries())
    all.insert({x.user, x.item});
  for (const auto &x : te.entries())
    EXPECT_TRUE(all.insert({x.user, x.item}).second);
  EXPECT_EQ(all.size(), 100u);

  const auto [tr3, te3] = split_ratings(r, {0.8, 18});
  EXPECT_EQ(tr3.size(), 80u);
  EXPECT_NE(partition_hash(tr), partition_hash(tr3));
  EXPECT_EQ(partition_hash(tr), partition_hash(tr2));

  EXPECT_THROW(split_ratings(r, {0.0, 1}), ConfigError);
  EXPECT_THROW(split_ratings(r, {1.0, 1}), ConfigError);
}

TEST(Synth, NoiseFreeIsExactRank)
{
  SynthConfig c;
  c.n_users = c.n_items = 20;
  c.latent_dim = 2;
  c.user_layers = {4};
  c.item_layers = {4};
  c.noise = 0;
  const auto d = synth_dataset(c, 1);
  Eigen::JacobiSVD<Matrix> svd(d.planted.dense_ratings);
  const auto s = svd.singularValues();
  EXPECT_GT(s(1), 1e-3);
  EXPECT_LT(s(2), 1e-8 * s(0));
}

TEST(Synth, ZeroFlatSignalIsUninformative)
{
  // correlation between a feature and the planted latent coordinate, averaged over seeds
  double with_signal = 0, without = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (double signal : {1.0, 0.0}) {
      SynthConfig c;
      c.flat_signal = signal;
      const auto d = synth_dataset(c, seed);
      const Matrix &x = d.user_features.values;
      const Matrix &u = d.planted.users;
      double best = 0;
      for (Index f = 0; f < x.rows(); ++f)
        for (Index k = 1; k < u.cols(); ++k) {
          const Vector a = x.row(f).transpose().array() - x.row(f).mean();
          const Vector b = u.col(k).array() - u.col(k).mean();
          best = std::max(best, std::abs(a.dot(b)) / (a.norm() * b.norm()));
        }
      (signal > 0 ? with_signal : without) += best / 20;
    }
  }
  EXPECT_GT(with_signal, 0.5);
  EXPECT_LT(without, 0.3);
}

TEST(Synth, SiblingsAreMoreSimilar)
{
  SynthConfig c;
  c.item_layers = {2};
  const auto d = synth_dataset(c, 4);
  const Matrix &v = d.planted.items; // d x m
  const Matrix &t = d.item_hierarchy.links()[0];
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (Index a = 0; a < v.cols(); ++a)
    for (Index b = a + 1; b < v.cols(); ++b) {
      // cosine of the centered part (coordinate 0 is the constant offset)
      const Vector x = v.col(a).tail(v.rows() - 1), y = v.col(b).tail(v.rows() - 1);
      const double cs = x.dot(y) / (x.norm() * y.norm());
      if (t.row(a) == t.row(b)) {
        within += cs;
        ++nw;
      }
      else {
        across += cs;
        ++na;
      }
    }
  EXPECT_GT(within / nw, across / na);
}

TEST(Synth, InconsistentLayersRejected)
{
  SynthConfig c;
  c.user_layers = {5, 10};
  EXPECT_THROW(synth_dataset(c, 1), ConfigError);
  c.user_layers = {c.n_users + 1};
  EXPECT_THROW(synth_dataset(c, 1), ConfigError);
}

TEST(Synth, Deterministic)
{
  const auto a = synth_dataset(SynthConfig{}, 9), b = synth_dataset(SynthConfig{}, 9);
  EXPECT_TRUE(a.ratings == b.ratings);
  EXPECT_EQ(a.user_features.values, b.user_features.values);
  EXPECT_TRUE(a.train == b.train);
}

TEST(Bundle, WriteReadRoundTrip)
{
  const auto d = synth_dataset(SynthConfig{}, 6);
  const auto b = DataBundle::from_synth(d);
  const auto dir = scratch_dir("b");
  write_bundle(dir, b);
  const DataBundle back = read_bundle(dir);
  EXPECT_TRUE(back.ratings == b.ratings);
  EXPECT_EQ(back.user_features.values, b.user_features.values);
  EXPECT_EQ(back.item_hierarchy.layer_sizes(), b.item_hierarchy.layer_sizes());
  const auto rep = KeyValues::load(dir + "/report.txt");
  EXPECT_EQ(rep.get("users"), std::to_string(b.ratings.n_users()));
  EXPECT_EQ(rep.get("user_hierarchy_depth"), "3");
  EXPECT_THROW(read_bundle(dir + "/nope"), DataError);
}

TEST(Bundle, RewriteIsByteIdentical)
{
  const auto b = DataBundle::from_synth(synth_dataset(SynthConfig{}, 6));
  const auto d1 = scratch_dir("1"), d2 = scratch_dir("2");
  write_bundle(d1, b);
  write_bundle(d2, read_bundle(d1));
  for (const char *f : {"ratings.csv", "user_features.csv", "item_features.csv", "user_hierarchy.csv",
                        "item_hierarchy.csv", "users.txt", "items.txt", "report.txt"})
    EXPECT_EQ(read_text(d1 + "/" + f), read_text(d2 + "/" + f)) << f;
}
