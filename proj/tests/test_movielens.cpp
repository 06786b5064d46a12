#include "movielens.hpp"
#include "test_util.hpp"

using namespace hire;
using namespace hire_test;

namespace
{

std::string tiny_raw()
{
  const std::string dir = scratch_dir("raw");
  write_text(dir + "/u.data", "1\t10\t5\t881250949\n2\t10\t3\t891717742\n2\t20\t4\t878887116\n3\t30\t1\t880606923\n");
  write_text(dir + "/u.user", "1|24|M|technician|85711\n2|53|F|other|94043\n3|23|M|writer|32067\n");
  const std::string flags_action_comedy = "0|1|0|0|0|1|0|0|0|0|0|0|0|0|0|0|0|0|0";
  const std::string flags_none = "0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0";
  const std::string flags_drama = "0|0|0|0|0|0|0|0|1|0|0|0|0|0|0|0|0|0|0";
  write_text(dir + "/u.item", "10|A (1995)|01-Jan-1995||url|" + flags_action_comedy + "\n" + "20|B|||url|" +
                                  flags_none + "\n" + "30|C (1977)|01-Jan-1977||url|" + flags_drama + "\n");
  return dir;
}

} // namespace

TEST(MovieLens, ConvertsRawFilesToABundle)
{
  const auto b = hire_ml::load(tiny_raw(), scratch_dir("work"));
  EXPECT_EQ(b.ratings.size(), 4u);
  EXPECT_EQ(b.ratings.n_users(), 3);
  EXPECT_EQ(b.ratings.n_items(), 3);
  // age + gender one-hot; year only
  EXPECT_EQ(b.user_features.dim(), 3);
  EXPECT_EQ(b.item_features.dim(), 1);
  // user -> occupation -> sector
  EXPECT_EQ(b.user_hierarchy.layer_sizes(), (std::vector<Index>{3, 3, 3}));
  // item -> genre {Action, Comedy, unknown, Drama} -> group {action, light, unknown, serious}
  EXPECT_EQ(b.item_hierarchy.layer_sizes(), (std::vector<Index>{3, 4, 4}));
  const Index a = *b.ratings.items().find("10");
  EXPECT_EQ(b.item_hierarchy.links()[0].row(a).sum(), 2.0); // two genres, two parents
  const Index undated = *b.ratings.items().find("20");
  EXPECT_EQ(b.item_features.values(0, undated), 0.0);
  EXPECT_EQ(b.item_features.values.row(0).maxCoeff(), 1.0);
}

TEST(MovieLens, UnknownOccupationIsADataError)
{
  const std::string dir = tiny_raw();
  write_text(dir + "/u.user", "1|24|M|astronaut|85711\n2|53|F|other|94043\n3|23|M|writer|32067\n");
  EXPECT_THROW(hire_ml::load(dir, scratch_dir("work2")), DataError);
}
