#include "test_util.hpp"

using namespace hire;
using namespace hire_test;

namespace
{

Hierarchy from_link(const Matrix &t) { return Hierarchy({t}); }

} // namespace

TEST(Normalize, TwoChildrenOneParent)
{
  const auto q = normalize_item_links(from_link(Matrix::Ones(2, 1)));
  ASSERT_EQ(q.depth(), 1u);
  Matrix expect(2, 1);
  expect << 0.5, 0.5;
  EXPECT_EQ(q.matrices[0], expect);
  const auto p = normalize_user_links(from_link(Matrix::Ones(2, 1)));
  EXPECT_EQ(p.matrices[0], expect.transpose());
}

TEST(Normalize, SingleChildAndThreeChildren)
{
  Matrix t = Matrix::Zero(4, 2);
  t(0, 0) = 1;
  t(1, 1) = t(2, 1) = t(3, 1) = 1;
  const auto q = normalize_item_links(from_link(t));
  EXPECT_EQ(q.matrices[0](0, 0), 1.0);
  for (Index i = 1; i < 4; ++i)
    EXPECT_DOUBLE_EQ(q.matrices[0](i, 1), 1.0 / 3.0);
  const auto p = normalize_user_links(from_link(t));
  Matrix expect(2, 4);
  expect << 1, 0, 0, 0, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3;
  EXPECT_LT((p.matrices[0] - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Normalize, IdentityHierarchy)
{
  const auto p = normalize_user_links(from_link(Matrix::Identity(3, 3)));
  EXPECT_EQ(p.matrices[0], Matrix::Identity(3, 3));
}

TEST(Normalize, ChildlessParentIsAnError)
{
  Matrix t = Matrix::Zero(2, 2);
  t(0, 0) = t(1, 0) = 1;
  EXPECT_THROW(normalize_item_links(from_link(t)), DataError);
  EXPECT_THROW(normalize_user_links(from_link(t)), DataError);
}

TEST(Normalize, StochasticityOnRandomMultiParentHierarchies)
{
  Rng r(3);
  for (int t = 0; t < 10; ++t) {
    Matrix link = Matrix::Zero(20, 5);
    for (Index i = 0; i < 20; ++i) {
      link(i, Index(r.below(5))) = 1;
      if (r.uniform() < 0.3)
        link(i, Index(r.below(5))) = 1;
    }
    for (Index j = 0; j < 5; ++j)
      link(j, j) = 1; // no childless parent
    const Hierarchy h(std::vector<Matrix>{link});
    const auto q = normalize_item_links(h).matrices[0];
    const auto p = normalize_user_links(h).matrices[0];
    EXPECT_LT((q.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(q.minCoeff(), 0.0);
    EXPECT_TRUE(((q.array() > 0) == (link.array() > 0)).all());
  }
}

TEST(StructureLoss, ItemExactAggregationIsZero)
{
  // q = 2: V^1 is m_1 x m (2 x 2 here, parent layer of size 1 below the latent layer)
  const Hierarchy h(std::vector<Matrix>{Matrix::Ones(2, 1)});
  const auto q = normalize_item_links(h);
  // reps: R_0 (d x 2) children, R_1 (d x 1) parent
  Matrix r0(2, 2);
  r0 << 1, 3, 2, 4;
  Matrix r1 = r0 * q.matrices[0];
  EXPECT_LT(item_structure_loss_from_reps({r0, r1}, q), 1e-20);
}

TEST(StructureLoss, ItemHandComputedExample)
{
  const Hierarchy h(std::vector<Matrix>{Matrix::Ones(2, 1)});
  const auto q = normalize_item_links(h);
  const Matrix children = Matrix::Identity(2, 2);
  const Matrix parent = Matrix::Zero(2, 1);
  EXPECT_DOUBLE_EQ(item_structure_loss_from_reps({children, parent}, q), 0.5);
  // the user mirror, transposed
  const auto p = normalize_user_links(h);
  EXPECT_DOUBLE_EQ(user_structure_loss_from_reps({children, parent.transpose()}, p), 0.5);
}

TEST(StructureLoss, DepthOneIsZero)
{
  Rng r(1);
  const AggregationChain empty{Side::item, {}};
  EXPECT_EQ(item_structure_loss({r.gaussian(3, 5, 1)}, empty), 0.0);
  EXPECT_EQ(user_structure_loss({r.gaussian(5, 3, 1)}, AggregationChain{Side::user, {}}), 0.0);
}

TEST(StructureLoss, ChainWithExactParentMeans)
{
  // one-hot memberships as factors: every child copies its parent, so each
  // parent is exactly the mean of its children
  Rng r(2);
  std::vector<Index> parents1 = {0, 0, 1, 1, 1, 2}, parents2 = {0, 0, 1};
  const Hierarchy h = Hierarchy::from_parents(6, {parents1, parents2}, {3, 2});
  const auto p = normalize_user_links(h);
  const Matrix c1 = h.links()[0], c2 = h.links()[1];
  const Matrix l2 = r.gaussian(2, 4, 1);
  const std::vector<Matrix> factors = {c1, c2, l2};
  EXPECT_LT(user_structure_loss(factors, p), 1e-20);

  const auto q = normalize_item_links(h);
  const std::vector<Matrix> vf = {c1.transpose(), c2.transpose(), l2.transpose()};
  EXPECT_LT(item_structure_loss(vf, q), 1e-20);
}

TEST(StructureLoss, GrowingPerturbationIncreasesLoss)
{
  Rng r(4);
  const Hierarchy h = Hierarchy::from_parents(6, {{0, 0, 1, 1, 1, 2}}, {3});
  const auto q = normalize_item_links(h);
  const Matrix r0 = r.gaussian(3, 6, 1);
  const Matrix exact = r0 * q.matrices[0];
  const Matrix dir = r.gaussian(3, 1, 1);
  double prev = -1;
  for (double eps : {0.0, 0.1, 0.5, 1.0, 3.0}) {
    Matrix r1 = exact;
    r1.col(1) += eps * dir;
    const double l = item_structure_loss_from_reps({r0, r1}, q);
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(StructureLoss, SiblingPermutationInvariant)
{
  Rng r(5);
  const Hierarchy h = Hierarchy::from_parents(4, {{0, 0, 1, 1}}, {2});
  const auto q = normalize_item_links(h);
  const Matrix r0 = r.gaussian(3, 4, 1), r1 = r.gaussian(3, 2, 1);
  Matrix swapped = r0;
  swapped.col(0).swap(swapped.col(1));
  EXPECT_NEAR(item_structure_loss_from_reps({r0, r1}, q), item_structure_loss_from_reps({swapped, r1}, q), 1e-12);
}

TEST(StructureLoss, ShapeMismatchNamesLayer)
{
  const Hierarchy h = Hierarchy::from_parents(4, {{0, 0, 1, 1}}, {2});
  const auto q = normalize_item_links(h);
  Rng r(6);
  try {
    item_structure_loss_from_reps({r.gaussian(3, 5, 1), r.gaussian(3, 2, 1)}, q);
    FAIL();
  }
  catch (const ShapeError &e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(LayerReps, ComposeCorrectly)
{
  Rng r(7);
  const Matrix u1 = r.gaussian(5, 3, 1), u2 = r.gaussian(3, 2, 1), u3 = r.gaussian(2, 4, 1);
  const auto l = user_layer_reps({u1, u2, u3});
  EXPECT_LT((l[0] - u1 * u2 * u3).norm(), 1e-12);
  EXPECT_LT((l[1] - u2 * u3).norm(), 1e-12);
  EXPECT_EQ(l[2], u3);
  const Matrix v1 = r.gaussian(3, 5, 1), v2 = r.gaussian(2, 3, 1), v3 = r.gaussian(4, 2, 1);
  const auto rv = item_layer_reps({v1, v2, v3});
  EXPECT_LT((rv[0] - v3 * v2 * v1).norm(), 1e-12);
  EXPECT_LT((rv[1] - v3 * v2).norm(), 1e-12);
}
