#ifndef HIRE_HIERARCHY_HPP
#define HIRE_HIERARCHY_HPP

#include "hire/data.hpp"

namespace hire
{

enum class Side
{
  user,
  item
};

inline const char *side_name(Side s) { return s == Side::user ? "user" : "item"; }

/// Mean-aggregation matrices for one side.
///
/// Item side: Q[k] is m_k × m_{k+1} (0-based k), column-stochastic; column j
/// is uniform over parent j's children. Layer-(k+1) representations are
/// compared against layer-k representations times Q[k].
///
/// User side: P[k] is n_{k+1} × n_k, row-stochastic; row j is uniform over
/// parent j's children. It is the transposed, normalized membership matrix,
/// so P[k] times layer-k representations gives the mean over children.
struct AggregationChain
{
  Side side = Side::item;
  std::vector<Matrix> matrices;

  Index depth() const { return static_cast<Index>(matrices.size()); }
};

namespace detail
{

inline Matrix column_normalized(const Matrix &t, std::size_t link)
{
  Matrix q = t;
  for (Index j = 0; j < q.cols(); ++j) {
    const double s = q.col(j).sum();
    if (s == 0.0)
      throw DataError("parent " + std::to_string(j) + " in layer " + std::to_string(link + 1) + " has no children");
    q.col(j) /= s;
  }
  return q;
}

} // namespace detail

inline AggregationChain normalize_item_links(const Hierarchy &h)
{
  AggregationChain c{Side::item, {}};
  for (std::size_t k = 0; k < h.links().size(); ++k)
    c.matrices.push_back(detail::column_normalized(h.links()[k], k));
  return c;
}

inline AggregationChain normalize_user_links(const Hierarchy &h)
{
  AggregationChain c{Side::user, {}};
  for (std::size_t k = 0; k < h.links().size(); ++k)
    c.matrices.push_back(detail::column_normalized(h.links()[k], k).transpose());
  return c;
}

inline AggregationChain normalize_links(const Hierarchy &h, Side side)
{
  return side == Side::user ? normalize_user_links(h) : normalize_item_links(h);
}

/// Item-side layer representations R_k = V^q ⋯ V^{k+1} (d × m_k), k = 0..q-1,
/// given factors ordered V^1..V^q.
inline std::vector<Matrix> item_layer_reps(const std::vector<Matrix> &factors)
{
  const std::size_t q = factors.size();
  std::vector<Matrix> reps(q);
  if (q == 0)
    return reps;
  reps[q - 1] = factors[q - 1];
  for (std::size_t k = q - 1; k-- > 0;)
    reps[k] = reps[k + 1] * factors[k];
  return reps;
}

/// User-side layer representations L_k = U^{k+1} ⋯ U^p (n_k × d), k = 0..p-1,
/// given factors ordered U^1..U^p.
inline std::vector<Matrix> user_layer_reps(const std::vector<Matrix> &factors)
{
  const std::size_t p = factors.size();
  std::vector<Matrix> reps(p);
  if (p == 0)
    return reps;
  reps[p - 1] = factors[p - 1];
  for (std::size_t k = p - 1; k-- > 0;)
    reps[k] = factors[k] * reps[k + 1];
  return reps;
}

namespace detail
{

inline void check_chain(const std::vector<Matrix> &reps, const AggregationChain &agg, bool item)
{
  if (reps.size() < 2)
    return;
  if (agg.matrices.size() != reps.size() - 1)
    throw ShapeError(std::string(item ? "item" : "user") + " aggregation has " + std::to_string(agg.matrices.size()) +
                     " levels, factor chain needs " + std::to_string(reps.size() - 1));
  for (std::size_t k = 0; k + 1 < reps.size(); ++k) {
    const Matrix &a = agg.matrices[k];
    const bool ok = item ? (a.rows() == reps[k].cols() && a.cols() == reps[k + 1].cols())
                         : (a.rows() == reps[k + 1].rows() && a.cols() == reps[k].rows());
    if (!ok)
      throw ShapeError(std::string(item ? "item" : "user") + " structure: layer " + std::to_string(k + 1) +
                       " aggregation is " + shape_str(a) + ", incompatible with factor chain");
  }
}

} // namespace detail

/// Sum over levels of ||R_{k+1} - R_k Q[k]||_F^2, from layer representations.
inline double item_structure_loss_from_reps(const std::vector<Matrix> &reps, const AggregationChain &agg)
{
  detail::check_chain(reps, agg, true);
  double loss = 0.0;
  for (std::size_t k = 0; k + 1 < reps.size(); ++k)
    loss += (reps[k + 1] - reps[k] * agg.matrices[k]).squaredNorm();
  return loss;
}

/// Sum over levels of ||L_{k+1} - P[k] L_k||_F^2, from layer representations.
inline double user_structure_loss_from_reps(const std::vector<Matrix> &reps, const AggregationChain &agg)
{
  detail::check_chain(reps, agg, false);
  double loss = 0.0;
  for (std::size_t k = 0; k + 1 < reps.size(); ++k)
    loss += (reps[k + 1] - agg.matrices[k] * reps[k]).squaredNorm();
  return loss;
}

/// f^v for an item factor chain ordered V^1..V^q.
inline double item_structure_loss(const std::vector<Matrix> &factors, const AggregationChain &agg)
{
  return item_structure_loss_from_reps(item_layer_reps(factors), agg);
}

/// f^u for a user factor chain ordered U^1..U^p.
inline double user_structure_loss(const std::vector<Matrix> &factors, const AggregationChain &agg)
{
  return user_structure_loss_from_reps(user_layer_reps(factors), agg);
}

} // namespace hire

#endif // HIRE_HIERARCHY_HPP
