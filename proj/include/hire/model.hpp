#ifndef HIRE_MODEL_HPP
#define HIRE_MODEL_HPP

#include "hire/hierarchy.hpp"
#include "hire/mda.hpp"

#include <Eigen/Sparse>

#include <chrono>
#include <functional>
#include <optional>

namespace hire
{

/// Objective weights and optimizer settings.
struct HyperParams
{
  Index latent_dim = 10;
  double lambda = 0.1; // ridge on every chain factor
  double alpha = 0.1;  // user hierarchy
  double beta = 0.1;   // item hierarchy
  double gamma = 0.1;  // user flat features
  double theta = 0.1;  // item flat features
  double corruption_prob = 0.3;
  std::optional<double> mda_ridge; // default: default_mda_ridge()

  // Backtracking line search, one per parameter block and iteration.
  double initial_step = 1.0;
  double step_growth = 2.0; // next trial step = growth * last accepted step
  double backtrack = 0.5;   // Armijo shrink factor
  double armijo = 1e-4;     // sufficient-decrease constant
  int max_backtracks = 80;

  Index max_iters = 200;
  double tolerance = 1e-6; // stop when relative objective decrease drops below this
  bool update_mda_maps = false;

  void validate() const
  {
    if (latent_dim < 1)
      throw ConfigError("latent_dim must be >= 1");
    const std::pair<const char *, double> weights[] = {
        {"lambda", lambda}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"theta", theta}};
    for (const auto &[name, v] : weights)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + " must be a finite nonnegative weight");
    if (!(corruption_prob >= 0.0 && corruption_prob < 1.0))
      throw ConfigError("corruption_prob must lie in [0, 1)");
    if (mda_ridge && !(*mda_ridge >= 0.0))
      throw ConfigError("mda_ridge must be nonnegative");
    if (!(initial_step > 0.0) || !(step_growth >= 1.0) || !(backtrack > 0.0 && backtrack < 1.0) ||
        !(armijo > 0.0 && armijo < 1.0) || max_backtracks < 1)
      throw ConfigError("invalid line-search settings");
    if (max_iters < 1)
      throw ConfigError("max_iters must be >= 1");
    if (!(tolerance >= 0.0))
      throw ConfigError("tolerance must be nonnegative");
  }
};

/// Everything the objective needs that does not change during training.
struct Problem
{
  Index n_users = 0;
  Index n_items = 0;
  double r_min = 1.0;
  double r_max = 5.0;
  std::vector<Rating> entries;
  // CSR pattern of the rated entries (row = user), in entry order.
  Eigen::SparseMatrix<double, Eigen::RowMajor> pattern;

  Matrix user_features; // X, d_x × n
  Matrix item_features; // Y, d_y × m
  MarginalStats user_stats;
  MarginalStats item_stats;

  std::vector<Index> user_layers; // n_0 = n, n_1, ...
  std::vector<Index> item_layers; // m_0 = m, m_1, ...
  AggregationChain user_agg;      // P
  AggregationChain item_agg;      // Q
  std::vector<Matrix> item_agg_t; // Qᵀ, the item chain seen in user orientation

  static Problem build(const RatingMatrix &train, const FlatFeatures &user_features, const FlatFeatures &item_features,
                       const Hierarchy &user_hierarchy, const Hierarchy &item_hierarchy, double corruption_prob)
  {
    Problem p;
    p.n_users = train.n_users();
    p.n_items = train.n_items();
    p.r_min = train.r_min();
    p.r_max = train.r_max();
    p.entries = train.entries();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(p.entries.size());
    for (const Rating &e : p.entries)
      t.emplace_back(e.user, e.item, e.value);
    p.pattern.resize(p.n_users, p.n_items);
    p.pattern.setFromTriplets(t.begin(), t.end());
    p.pattern.makeCompressed();

    if (user_features.count() != p.n_users)
      throw ShapeError("user features cover " + std::to_string(user_features.count()) + " users, ratings have " +
                       std::to_string(p.n_users));
    if (item_features.count() != p.n_items)
      throw ShapeError("item features cover " + std::to_string(item_features.count()) + " items, ratings have " +
                       std::to_string(p.n_items));
    p.user_features = user_features.values;
    p.item_features = item_features.values;
    p.user_stats = marginal_stats(p.user_features, corruption_prob);
    p.item_stats = marginal_stats(p.item_features, corruption_prob);

    if (user_hierarchy.entity_count() != p.n_users)
      throw ShapeError("user hierarchy layer 0 has " + std::to_string(user_hierarchy.entity_count()) + " nodes, ratings have " +
                       std::to_string(p.n_users) + " users");
    if (item_hierarchy.entity_count() != p.n_items)
      throw ShapeError("item hierarchy layer 0 has " + std::to_string(item_hierarchy.entity_count()) + " nodes, ratings have " +
                       std::to_string(p.n_items) + " items");
    p.user_layers = user_hierarchy.layer_sizes();
    p.item_layers = item_hierarchy.layer_sizes();
    p.user_agg = normalize_user_links(user_hierarchy);
    p.item_agg = normalize_item_links(item_hierarchy);
    for (const Matrix &q : p.item_agg.matrices)
      p.item_agg_t.push_back(q.transpose());
    return p;
  }

  /// Same side information, different rating set (same index spaces).
  Problem with_ratings(const RatingMatrix &train) const
  {
    if (train.n_users() != n_users || train.n_items() != n_items)
      throw ShapeError("rating matrix index spaces differ from the problem's");
    Problem p = *this;
    p.entries = train.entries();
    std::vector<Eigen::Triplet<double>> t;
    for (const Rating &e : p.entries)
      t.emplace_back(e.user, e.item, e.value);
    p.pattern.setZero();
    p.pattern.resize(n_users, n_items);
    p.pattern.setFromTriplets(t.begin(), t.end());
    p.pattern.makeCompressed();
    return p;
  }
};

/// Factor chains U = U^1⋯U^p and V = V^q⋯V^1, projections and MDA maps.
struct HireModel
{
  std::vector<Matrix> user_factors; // U^1 (n × n_1) .. U^p (n_{p-1} × d)
  std::vector<Matrix> item_factors; // V^1 (m_1 × m) .. V^q (d × m_{q-1})
  Matrix user_projection;           // S^u, d_x × d
  Matrix item_projection;           // S^v, d_y × d
  MdaMap user_map;                  // W^u
  MdaMap item_map;                  // W^v
  Index latent_dim = 0;

  Index user_depth() const { return static_cast<Index>(user_factors.size()); }
  Index item_depth() const { return static_cast<Index>(item_factors.size()); }

  /// U, n × d
  Matrix composed_users() const
  {
    Matrix u = user_factors.back();
    for (std::size_t k = user_factors.size() - 1; k-- > 0;)
      u = user_factors[k] * u;
    return u;
  }

  /// V, d × m
  Matrix composed_items() const
  {
    Matrix v = item_factors.back();
    for (std::size_t k = item_factors.size() - 1; k-- > 0;)
      v = v * item_factors[k];
    return v;
  }
};

struct ModelDims
{
  std::vector<Index> user_layers; // n_0 = n, ...
  std::vector<Index> item_layers; // m_0 = m, ...
  Index user_feature_dim = 0;
  Index item_feature_dim = 0;
  Index latent_dim = 1;
  std::size_t rated = 0;

  static ModelDims of(const Problem &p, Index latent_dim)
  {
    return ModelDims{p.user_layers, p.item_layers, p.user_features.rows(), p.item_features.rows(), latent_dim,
                     p.entries.size()};
  }
};

namespace detail
{

// Std dev per factor so that a product of `shapes` (left to right) has entry
// std ≈ 1/sqrt(d): each factor gets (1/sqrt(d))^(1/depth), and every factor
// but the last is further divided by sqrt of the dimension it is contracted over.
inline std::vector<Matrix> init_chain(const std::vector<std::pair<Index, Index>> &shapes, Index d, Rng &rng)
{
  const double base = std::pow(1.0 / std::sqrt(static_cast<double>(d)), 1.0 / static_cast<double>(shapes.size()));
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto [r, c] = shapes[k];
    const double sd = (k + 1 < shapes.size()) ? base / std::sqrt(static_cast<double>(c)) : base;
    out.push_back(rng.gaussian(r, c, sd));
  }
  return out;
}

} // namespace detail

/// Random model with shapes taken from `dims`; W^u, W^v fitted by the
/// marginalized closed form on the given features.
inline HireModel init_model(const ModelDims &dims, const Matrix &user_features, const Matrix &item_features,
                            const HyperParams &hyper, std::uint64_t seed)
{
  hyper.validate();
  if (dims.latent_dim != hyper.latent_dim)
    throw ShapeError("dims latent_dim disagrees with hyperparameters");
  if (dims.user_layers.empty() || dims.item_layers.empty())
    throw ShapeError("layer size lists must start with the entity count");
  if (user_features.rows() != dims.user_feature_dim || user_features.cols() != dims.user_layers[0])
    throw ShapeError("user features are " + shape_str(user_features) + ", dims expect " +
                     std::to_string(dims.user_feature_dim) + "x" + std::to_string(dims.user_layers[0]));
  if (item_features.rows() != dims.item_feature_dim || item_features.cols() != dims.item_layers[0])
    throw ShapeError("item features are " + shape_str(item_features) + ", dims expect " +
                     std::to_string(dims.item_feature_dim) + "x" + std::to_string(dims.item_layers[0]));
  const Index d = hyper.latent_dim;
  HireModel m;
  m.latent_dim = d;

  // user chain left to right: U^1 .. U^p
  std::vector<std::pair<Index, Index>> ushapes;
  for (std::size_t k = 0; k < dims.user_layers.size(); ++k)
    ushapes.emplace_back(dims.user_layers[k], k + 1 < dims.user_layers.size() ? dims.user_layers[k + 1] : d);
  Rng urng(derive_seed(seed, 1));
  m.user_factors = detail::init_chain(ushapes, d, urng);

  // item chain left to right: V^q .. V^1, stored V^1 .. V^q
  const std::size_t q = dims.item_layers.size();
  std::vector<std::pair<Index, Index>> vshapes;
  for (std::size_t i = q; i-- > 0;)
    vshapes.emplace_back(i + 1 < q ? dims.item_layers[i + 1] : d, dims.item_layers[i]);
  Rng vrng(derive_seed(seed, 2));
  auto left_to_right = detail::init_chain(vshapes, d, vrng);
  m.item_factors.assign(left_to_right.rbegin(), left_to_right.rend());

  Rng srng(derive_seed(seed, 3));
  m.user_projection = srng.gaussian(dims.user_feature_dim, d, 0.01);
  m.item_projection = srng.gaussian(dims.item_feature_dim, d, 0.01);

  const double p = hyper.corruption_prob;
  m.user_map = solve_marginalized(user_features, p, hyper.mda_ridge.value_or(default_mda_ridge(user_features, p)));
  m.item_map = solve_marginalized(item_features, p, hyper.mda_ridge.value_or(default_mda_ridge(item_features, p)));
  return m;
}

inline HireModel init_model(const Problem &problem, const HyperParams &hyper, std::uint64_t seed)
{
  return init_model(ModelDims::of(problem, hyper.latent_dim), problem.user_features, problem.item_features, hyper,
                    seed);
}

/// Per-term values of the joint objective. Weights are already applied.
struct ObjectiveBreakdown
{
  double total = 0.0;
  double term_rating = 0.0;
  double term_ridge = 0.0;
  double term_user_struct = 0.0;
  double term_item_struct = 0.0;
  double term_user_flat_align = 0.0;
  double term_user_flat_recon = 0.0;
  double term_item_flat_align = 0.0;
  double term_item_flat_recon = 0.0;

  double sum_of_terms() const
  {
    return term_rating + term_ridge + term_user_struct + term_item_struct + term_user_flat_align +
           term_user_flat_recon + term_item_flat_align + term_item_flat_recon;
  }

  static std::vector<std::string> names()
  {
    return {"total",           "rating",          "ridge",           "user_struct",    "item_struct",
            "user_flat_align", "user_flat_recon", "item_flat_align", "item_flat_recon"};
  }

  std::vector<double> values() const
  {
    return {total,
            term_rating,
            term_ridge,
            term_user_struct,
            term_item_struct,
            term_user_flat_align,
            term_user_flat_recon,
            term_item_flat_align,
            term_item_flat_recon};
  }
};

namespace detail
{

inline void check_model(const HireModel &m, const Problem &p)
{
  const Index d = m.latent_dim;
  if (m.user_factors.size() != p.user_layers.size())
    throw ShapeError("user chain has " + std::to_string(m.user_factors.size()) + " factors, hierarchy has " +
                     std::to_string(p.user_layers.size()) + " layers");
  if (m.item_factors.size() != p.item_layers.size())
    throw ShapeError("item chain has " + std::to_string(m.item_factors.size()) + " factors, hierarchy has " +
                     std::to_string(p.item_layers.size()) + " layers");
  for (std::size_t k = 0; k < p.user_layers.size(); ++k)
    require_shape(m.user_factors[k], p.user_layers[k], k + 1 < p.user_layers.size() ? p.user_layers[k + 1] : d,
                  "U^" + std::to_string(k + 1));
  for (std::size_t k = 0; k < p.item_layers.size(); ++k)
    require_shape(m.item_factors[k], k + 1 < p.item_layers.size() ? p.item_layers[k + 1] : d, p.item_layers[k],
                  "V^" + std::to_string(k + 1));
  require_shape(m.user_projection, p.user_features.rows(), d, "S^u");
  require_shape(m.item_projection, p.item_features.rows(), d, "S^v");
  require_shape(m.user_map.matrix, p.user_features.rows(), p.user_features.rows(), "W^u");
  require_shape(m.item_map.matrix, p.item_features.rows(), p.item_features.rows(), "W^v");
}

/// Residuals r̂ - r on the rated pattern (row-major, user × item).
inline Eigen::SparseMatrix<double, Eigen::RowMajor> residuals(const Problem &p, const Matrix &u, const Matrix &v)
{
  Eigen::SparseMatrix<double, Eigen::RowMajor> e = p.pattern;
  for (Index i = 0; i < e.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(e, i); it; ++it)
      it.valueRef() = u.row(i).dot(v.col(it.col())) - it.value();
  return e;
}

inline void check_finite(double v, const char *term)
{
  if (!std::isfinite(v))
    throw TrainError(std::string("objective term '") + term + "' is not finite");
}

} // namespace detail

/// Joint objective:
///   Σ_rated (R - UV)²  + λ Σ ||factor||²
///   + α f^u + β f^v
///   + γ (||S^u Uᵀ - W^u X||² + E||X - W^u X̃||²/2n)
///   + θ (||S^v V - W^v Y||² + E||Y - W^v Ỹ||²/2m)
/// Terms with a zero weight are skipped entirely (never evaluated).
inline ObjectiveBreakdown objective(const HireModel &model, const Problem &p, const HyperParams &hyper)
{
  detail::check_model(model, p);
  ObjectiveBreakdown b;
  const auto ureps = user_layer_reps(model.user_factors);
  const auto vreps = item_layer_reps(model.item_factors);
  const Matrix &u = ureps.front();
  const Matrix &v = vreps.front();

  for (Index i = 0; i < p.pattern.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(p.pattern, i); it; ++it) {
      const double r = it.value() - u.row(i).dot(v.col(it.col()));
      b.term_rating += r * r;
    }
  detail::check_finite(b.term_rating, "rating");

  if (hyper.lambda > 0.0) {
    double s = 0.0;
    for (const Matrix &f : model.user_factors)
      s += f.squaredNorm();
    for (const Matrix &f : model.item_factors)
      s += f.squaredNorm();
    b.term_ridge = hyper.lambda * s;
    detail::check_finite(b.term_ridge, "ridge");
  }
  if (hyper.alpha > 0.0) {
    b.term_user_struct = hyper.alpha * user_structure_loss_from_reps(ureps, p.user_agg);
    detail::check_finite(b.term_user_struct, "user_struct");
  }
  if (hyper.beta > 0.0) {
    b.term_item_struct = hyper.beta * item_structure_loss_from_reps(vreps, p.item_agg);
    detail::check_finite(b.term_item_struct, "item_struct");
  }
  if (hyper.gamma > 0.0 && p.user_features.rows() > 0) {
    b.term_user_flat_align =
        hyper.gamma * (model.user_projection * u.transpose() - model.user_map.matrix * p.user_features).squaredNorm();
    b.term_user_flat_recon = hyper.gamma * expected_reconstruction_loss(model.user_map.matrix, p.user_stats);
    detail::check_finite(b.term_user_flat_align, "user_flat_align");
    detail::check_finite(b.term_user_flat_recon, "user_flat_recon");
  }
  if (hyper.theta > 0.0 && p.item_features.rows() > 0) {
    b.term_item_flat_align =
        hyper.theta * (model.item_projection * v - model.item_map.matrix * p.item_features).squaredNorm();
    b.term_item_flat_recon = hyper.theta * expected_reconstruction_loss(model.item_map.matrix, p.item_stats);
    detail::check_finite(b.term_item_flat_align, "item_flat_align");
    detail::check_finite(b.term_item_flat_recon, "item_flat_recon");
  }
  b.total = b.sum_of_terms();
  return b;
}

// ---------------------------------------------------------------------------
// Chain contexts and factor gradients.
//
// Both sides are handled in "user orientation": a chain F^1..F^depth whose
// product F^1⋯F^depth is (entities × d), aggregation matrices P^k mapping
// layer k-1 representations to layer k, and an opposite factor O (d × others)
// so that predictions are (F^1⋯F^depth) O. The user side is exactly that;
// the item side is its transpose: F^i = (V^i)ᵀ, P^k = (Q^k)ᵀ, O = Uᵀ.

/// Helper products for chain index i (1-based), in user orientation.
/// std::nullopt stands for an identity matrix.
struct ChainContext
{
  Index index = 1;
  std::optional<Matrix> A; // F^1 ⋯ F^{i-1}
  Matrix H;                // F^{i+1} ⋯ F^depth O
  std::optional<Matrix> D; // F^{i+1} ⋯ F^depth
  // For k = 1..i-1 (stored at k-1):
  std::vector<std::optional<Matrix>> G; // F^{k+1} ⋯ F^{i-1}
  std::vector<Matrix> B;                // P^k F^k G_k

  static Matrix dense(const std::optional<Matrix> &m, Index n) { return m ? *m : Matrix::Identity(n, n); }
};

namespace detail
{

struct OrientedSide
{
  std::vector<Matrix> factors;             // F^1..F^depth
  const std::vector<Matrix> *aggregation;  // P^1..P^{depth-1}
  Matrix opposite;                         // O
  Matrix composed;                         // F^1⋯F^depth
  const Matrix *projection;                // S
  const Matrix *features;                  // X
  const Matrix *map;                       // W
  double structure_weight = 0.0;
  double flat_weight = 0.0;
};

inline OrientedSide orient(const HireModel &m, const Problem &p, const HyperParams &h, Side side)
{
  OrientedSide o;
  if (side == Side::user) {
    o.factors = m.user_factors;
    o.aggregation = &p.user_agg.matrices;
    o.opposite = m.composed_items();
    o.projection = &m.user_projection;
    o.features = &p.user_features;
    o.map = &m.user_map.matrix;
    o.structure_weight = h.alpha;
    o.flat_weight = p.user_features.rows() > 0 ? h.gamma : 0.0;
  }
  else {
    for (const Matrix &f : m.item_factors)
      o.factors.push_back(f.transpose());
    o.aggregation = &p.item_agg_t;
    o.opposite = m.composed_users().transpose();
    o.projection = &m.item_projection;
    o.features = &p.item_features;
    o.map = &m.item_map.matrix;
    o.structure_weight = h.beta;
    o.flat_weight = p.item_features.rows() > 0 ? h.theta : 0.0;
  }
  o.composed = o.factors.back();
  for (std::size_t k = o.factors.size() - 1; k-- > 0;)
    o.composed = o.factors[k] * o.composed;
  return o;
}

inline ChainContext context_of(const OrientedSide &o, Index i)
{
  const Index depth = static_cast<Index>(o.factors.size());
  if (i < 1 || i > depth)
    throw ShapeError("chain index " + std::to_string(i) + " outside 1.." + std::to_string(depth));
  const auto F = [&](Index k) -> const Matrix & { return o.factors[static_cast<std::size_t>(k - 1)]; };
  ChainContext c;
  c.index = i;
  if (i > 1) {
    Matrix a = F(1);
    for (Index k = 2; k < i; ++k)
      a = a * F(k);
    c.A = std::move(a);
  }
  if (i < depth) {
    Matrix d = F(depth);
    for (Index k = depth - 1; k > i; --k)
      d = F(k) * d;
    c.H = d * o.opposite;
    c.D = std::move(d);
  }
  else {
    c.H = o.opposite;
  }
  for (Index k = 1; k <= i - 1; ++k) {
    std::optional<Matrix> g;
    if (k != i - 1) {
      Matrix gk = F(k + 1);
      for (Index j = k + 2; j <= i - 1; ++j)
        gk = gk * F(j);
      g = std::move(gk);
    }
    const Matrix &pk = (*o.aggregation)[static_cast<std::size_t>(k - 1)];
    Matrix bk = g ? Matrix(pk * (F(k) * *g)) : Matrix(pk * F(k));
    c.G.push_back(std::move(g));
    c.B.push_back(std::move(bk));
  }
  return c;
}

// Gradient of the full objective w.r.t. F^i, in user orientation.
//   2 Aᵀ[M ⊙ (A F H - R)] Hᵀ + 2λ F
//   + 2ω Σ_k (G_k - B_k)ᵀ(G_k - B_k) F D Dᵀ + 2ω P^{iᵀ}(P^i F D - D) Dᵀ   (i < depth)
//   + 2φ Aᵀ(A F D Sᵀ - Xᵀ Wᵀ) S Dᵀ
// `resid` is M ⊙ (prediction - R) oriented entities × others.
template <class Sparse>
Matrix factor_gradient(const OrientedSide &o, const Sparse &resid, Index i, const HyperParams &h)
{
  const ChainContext c = context_of(o, i);
  const Matrix &f = o.factors[static_cast<std::size_t>(i - 1)];
  const Index depth = static_cast<Index>(o.factors.size());
  const Index d = o.composed.cols();
  const auto left_At = [&](const Matrix &x) -> Matrix { return c.A ? Matrix(c.A->transpose() * x) : x; };
  const auto right_Dt = [&](const Matrix &x) -> Matrix { return c.D ? Matrix(x * c.D->transpose()) : x; };

  Matrix eh = resid * c.H.transpose();
  Matrix g = 2.0 * left_At(eh);
  if (h.lambda > 0.0)
    g += 2.0 * h.lambda * f;

  if (o.structure_weight > 0.0) {
    const Matrix dd = c.D ? Matrix(*c.D * c.D->transpose()) : Matrix::Identity(d, d);
    const Matrix fdd = f * dd;
    for (std::size_t k = 0; k < c.B.size(); ++k) {
      const Matrix gb = ChainContext::dense(c.G[k], c.B[k].cols()) - c.B[k];
      g += 2.0 * o.structure_weight * (gb.transpose() * (gb * fdd));
    }
    if (i < depth) {
      const Matrix &pi = (*o.aggregation)[static_cast<std::size_t>(i - 1)];
      g += 2.0 * o.structure_weight * (pi.transpose() * ((pi * fdd) - right_Dt(*c.D)));
    }
  }

  if (o.flat_weight > 0.0) {
    const Matrix &s = *o.projection;
    const Matrix inner = o.composed * s.transpose() - o.features->transpose() * o.map->transpose();
    g += 2.0 * o.flat_weight * right_Dt(left_At(inner * s));
  }
  return g;
}

} // namespace detail

/// A^i, H^i, D^i, G_i^k, B_i^k for chain index i (1-based) on one side.
/// Item contexts are for the transposed chain (V^i)ᵀ, see OrientedSide.
inline ChainContext chain_context(const HireModel &model, const Problem &p, Side side, Index i)
{
  HyperParams h;
  return detail::context_of(detail::orient(model, p, h, side), i);
}

/// Gradient of the objective with respect to U^i (1-based).
inline Matrix grad_user_factor(const HireModel &model, const Problem &p, const HyperParams &h, Index i)
{
  detail::check_model(model, p);
  const auto o = detail::orient(model, p, h, Side::user);
  const auto resid = detail::residuals(p, o.composed, o.opposite);
  return detail::factor_gradient(o, resid, i, h);
}

/// Gradient of the objective with respect to V^i (1-based).
inline Matrix grad_item_factor(const HireModel &model, const Problem &p, const HyperParams &h, Index i)
{
  detail::check_model(model, p);
  const auto o = detail::orient(model, p, h, Side::item);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> resid_t =
      Eigen::SparseMatrix<double, Eigen::RowMajor>(detail::residuals(p, o.opposite.transpose(), o.composed.transpose()).transpose());
  return detail::factor_gradient(o, resid_t, i, h).transpose();
}

/// 2γ(S^u Uᵀ - W^u X) U for users, 2θ(S^v V - W^v Y) Vᵀ for items.
inline Matrix grad_projection(const HireModel &model, const Problem &p, const HyperParams &h, Side side)
{
  detail::check_model(model, p);
  if (side == Side::user) {
    if (!(h.gamma > 0.0) || p.user_features.rows() == 0)
      return Matrix::Zero(model.user_projection.rows(), model.user_projection.cols());
    const Matrix u = model.composed_users();
    return 2.0 * h.gamma * (model.user_projection * u.transpose() - model.user_map.matrix * p.user_features) * u;
  }
  if (!(h.theta > 0.0) || p.item_features.rows() == 0)
    return Matrix::Zero(model.item_projection.rows(), model.item_projection.cols());
  const Matrix v = model.composed_items();
  return 2.0 * h.theta * (model.item_projection * v - model.item_map.matrix * p.item_features) * v.transpose();
}

/// Gradient w.r.t. the MDA map; only used when maps are trained jointly.
inline Matrix grad_mda_map(const HireModel &model, const Problem &p, const HyperParams &h, Side side)
{
  detail::check_model(model, p);
  if (side == Side::user) {
    if (!(h.gamma > 0.0) || p.user_features.rows() == 0)
      return Matrix::Zero(model.user_map.matrix.rows(), model.user_map.matrix.cols());
    const Matrix u = model.composed_users();
    const Matrix e = model.user_projection * u.transpose() - model.user_map.matrix * p.user_features;
    return h.gamma * (-2.0 * e * p.user_features.transpose() +
                      expected_reconstruction_grad(model.user_map.matrix, p.user_stats));
  }
  if (!(h.theta > 0.0) || p.item_features.rows() == 0)
    return Matrix::Zero(model.item_map.matrix.rows(), model.item_map.matrix.cols());
  const Matrix v = model.composed_items();
  const Matrix e = model.item_projection * v - model.item_map.matrix * p.item_features;
  return h.theta *
         (-2.0 * e * p.item_features.transpose() + expected_reconstruction_grad(model.item_map.matrix, p.item_stats));
}

// ---------------------------------------------------------------------------
// Parameter blocks

struct Block
{
  enum class Kind
  {
    user_factor,
    item_factor,
    user_projection,
    item_projection,
    user_map,
    item_map
  };
  Kind kind;
  Index index = 0; // 1-based chain index for factor blocks

  std::string name() const
  {
    switch (kind) {
    case Kind::user_factor:
      return "U" + std::to_string(index);
    case Kind::item_factor:
      return "V" + std::to_string(index);
    case Kind::user_projection:
      return "Su";
    case Kind::item_projection:
      return "Sv";
    case Kind::user_map:
      return "Wu";
    case Kind::item_map:
      return "Wv";
    }
    return "?";
  }
};

/// Update order: U^1..U^p, V^q..V^1, S^u, S^v (then W^u, W^v when trained jointly).
inline std::vector<Block> parameter_blocks(const HireModel &m, bool include_maps)
{
  std::vector<Block> b;
  for (Index i = 1; i <= m.user_depth(); ++i)
    b.push_back({Block::Kind::user_factor, i});
  for (Index i = m.item_depth(); i >= 1; --i)
    b.push_back({Block::Kind::item_factor, i});
  b.push_back({Block::Kind::user_projection, 0});
  b.push_back({Block::Kind::item_projection, 0});
  if (include_maps) {
    b.push_back({Block::Kind::user_map, 0});
    b.push_back({Block::Kind::item_map, 0});
  }
  return b;
}

inline Matrix &block_ref(HireModel &m, const Block &b)
{
  switch (b.kind) {
  case Block::Kind::user_factor:
    return m.user_factors.at(static_cast<std::size_t>(b.index - 1));
  case Block::Kind::item_factor:
    return m.item_factors.at(static_cast<std::size_t>(b.index - 1));
  case Block::Kind::user_projection:
    return m.user_projection;
  case Block::Kind::item_projection:
    return m.item_projection;
  case Block::Kind::user_map:
    return m.user_map.matrix;
  case Block::Kind::item_map:
    return m.item_map.matrix;
  }
  throw ShapeError("unknown block");
}

inline const Matrix &block_ref(const HireModel &m, const Block &b)
{
  return block_ref(const_cast<HireModel &>(m), b);
}

inline Matrix block_gradient(const HireModel &m, const Problem &p, const HyperParams &h, const Block &b)
{
  switch (b.kind) {
  case Block::Kind::user_factor:
    return grad_user_factor(m, p, h, b.index);
  case Block::Kind::item_factor:
    return grad_item_factor(m, p, h, b.index);
  case Block::Kind::user_projection:
    return grad_projection(m, p, h, Side::user);
  case Block::Kind::item_projection:
    return grad_projection(m, p, h, Side::item);
  case Block::Kind::user_map:
    return grad_mda_map(m, p, h, Side::user);
  case Block::Kind::item_map:
    return grad_mda_map(m, p, h, Side::item);
  }
  throw ShapeError("unknown block");
}

// ---------------------------------------------------------------------------
// Training

struct IterationRecord
{
  Index iteration = 0;
  ObjectiveBreakdown objective;
  double train_rmse = 0.0;
};

struct TrainReport
{
  std::vector<IterationRecord> history; // iteration 0 is the initial model
  Index iterations = 0;
  bool converged = false;
  double last_relative_decrease = 0.0;
  double seconds = 0.0;
};

namespace detail
{

inline double train_rmse_of(const ObjectiveBreakdown &b, std::size_t rated)
{
  return rated == 0 ? 0.0 : std::sqrt(b.term_rating / static_cast<double>(rated));
}

} // namespace detail

/// Full-batch block gradient descent with per-block backtracking (Armijo)
/// line search. W^u, W^v stay at their closed form unless
/// hyper.update_mda_maps is set.
///
/// Throws TrainError when a block with a non-negligible gradient finds no
/// decreasing step after max_backtracks halvings, or when a parameter
/// becomes non-finite.
inline TrainReport train(HireModel &model, const Problem &p, const HyperParams &h,
                         const std::function<void(const IterationRecord &)> &on_iteration = {})
{
  h.validate();
  if (h.latent_dim != model.latent_dim)
    throw ShapeError("model has latent_dim " + std::to_string(model.latent_dim) + ", hyperparameters say " +
                     std::to_string(h.latent_dim));
  const auto start = std::chrono::steady_clock::now();
  const auto blocks = parameter_blocks(model, h.update_mda_maps);
  std::vector<double> steps(blocks.size(), h.initial_step);

  TrainReport report;
  ObjectiveBreakdown current = objective(model, p, h);
  report.history.push_back({0, current, detail::train_rmse_of(current, p.entries.size())});
  if (on_iteration)
    on_iteration(report.history.back());

  for (Index iter = 1; iter <= h.max_iters; ++iter) {
    const double before = current.total;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const Block &blk = blocks[bi];
      const Matrix g = block_gradient(model, p, h, blk);
      const double gg = g.squaredNorm();
      if (gg == 0.0)
        continue;
      if (!std::isfinite(gg))
        throw TrainError("iteration " + std::to_string(iter) + ": non-finite gradient for block " + blk.name());
      Matrix &x = block_ref(model, blk);
      const Matrix x0 = x;
      double t = steps[bi] * h.step_growth;
      bool accepted = false;
      ObjectiveBreakdown trial;
      for (int ls = 0; ls < h.max_backtracks; ++ls, t *= h.backtrack) {
        x = x0 - t * g;
        try {
          trial = objective(model, p, h);
        }
        catch (const TrainError &) {
          continue; // overshoot into non-finite territory; shrink
        }
        if (trial.total <= current.total - h.armijo * t * gg) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        x = x0;
        // a stationary block (gradient at rounding level) is not an error
        const double scale = std::max(1.0, std::abs(current.total));
        if (std::sqrt(gg) > 1e-7 * scale)
          throw TrainError("iteration " + std::to_string(iter) + ": no decreasing step for block " + blk.name() +
                           " after " + std::to_string(h.max_backtracks) + " backtracks (|grad| = " +
                           fmt_double(std::sqrt(gg)) + ")");
        continue;
      }
      if (!x.allFinite())
        throw TrainError("iteration " + std::to_string(iter) + ": non-finite parameter in block " + blk.name());
      steps[bi] = t;
      current = trial;
    }
    report.iterations = iter;
    report.history.push_back({iter, current, detail::train_rmse_of(current, p.entries.size())});
    if (on_iteration)
      on_iteration(report.history.back());
    const double rel = (before - current.total) / std::max(std::abs(before), std::numeric_limits<double>::min());
    report.last_relative_decrease = rel;
    if (rel < h.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Prediction

struct ClampRange
{
  double lo;
  double hi;
};

inline double predict(const HireModel &model, Index user, Index item, std::optional<ClampRange> clamp = std::nullopt)
{
  const Matrix u = model.composed_users();
  const Matrix v = model.composed_items();
  if (user < 0 || user >= u.rows() || item < 0 || item >= v.cols())
    throw ShapeError("prediction index (" + std::to_string(user) + ", " + std::to_string(item) + ") out of range " +
                     std::to_string(u.rows()) + "x" + std::to_string(v.cols()));
  const double r = u.row(user).dot(v.col(item));
  return clamp ? std::clamp(r, clamp->lo, clamp->hi) : r;
}

/// Dense n × m prediction matrix.
inline Matrix predict_all(const HireModel &model, std::optional<ClampRange> clamp = std::nullopt)
{
  Matrix r = model.composed_users() * model.composed_items();
  if (clamp)
    r = r.cwiseMax(clamp->lo).cwiseMin(clamp->hi);
  return r;
}

/// Predictions for a list of (user, item) pairs, without forming the dense matrix.
inline std::vector<double> predict_entries(const HireModel &model, const std::vector<Rating> &entries,
                                           std::optional<ClampRange> clamp = std::nullopt)
{
  const Matrix u = model.composed_users();
  const Matrix v = model.composed_items();
  std::vector<double> out;
  out.reserve(entries.size());
  for (const Rating &e : entries) {
    if (e.user < 0 || e.user >= u.rows() || e.item < 0 || e.item >= v.cols())
      throw ShapeError("prediction index out of range");
    const double r = u.row(e.user).dot(v.col(e.item));
    out.push_back(clamp ? std::clamp(r, clamp->lo, clamp->hi) : r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost model

/// Per-iteration operation counts.
///
/// `user_terms[i-1]` / `item_terms[i-1]` instantiate the per-factor
/// update cost  n n_1 n_{i-1} + (2 n_i n_{i+1} + m m_1) d + n_{i-1}² (n_i + Σ_{k<i} n_k)
/// (and its item mirror) with the layer sizes in `dims`. Layer indices past
/// the top of a hierarchy take the latent size d for n_i and 1 for n_{i+1}.
/// `d_linear` collects the terms proportional to d. `implementation` is the
/// sparse-aware count for this code: |rated|·d for the masked fit plus the
/// dense chain products.
struct CostReport
{
  std::vector<double> user_terms;
  std::vector<double> item_terms;
  double closed_form_total = 0.0;
  double d_linear = 0.0;
  double implementation = 0.0;
  std::string symbolic;
};

inline CostReport flops_estimate(const ModelDims &dims)
{
  CostReport c;
  const double d = static_cast<double>(dims.latent_dim);
  const auto side = [&](const std::vector<Index> &layers, const std::vector<Index> &other, std::vector<double> &out) {
    const std::size_t depth = layers.size();
    const auto size = [&](std::size_t k) -> double {
      return k < depth ? static_cast<double>(layers[k]) : (k == depth ? d : 1.0);
    };
    const double n = size(0);
    const double n1 = size(1);
    const double m = static_cast<double>(other[0]);
    const double m1 = other.size() > 1 ? static_cast<double>(other[1]) : d;
    for (std::size_t i = 1; i <= depth; ++i) {
      double prefix = 0.0;
      for (std::size_t k = 1; k < i; ++k)
        prefix += size(k);
      const double lin = (2.0 * size(i) * size(i + 1) + m * m1) * d;
      const double t = n * n1 * size(i - 1) + lin + size(i - 1) * size(i - 1) * (size(i) + prefix);
      out.push_back(t);
      c.closed_form_total += t;
      c.d_linear += lin;
    }
  };
  side(dims.user_layers, dims.item_layers, c.user_terms);
  side(dims.item_layers, dims.user_layers, c.item_terms);

  const double n = static_cast<double>(dims.user_layers[0]);
  const double m = static_cast<double>(dims.item_layers[0]);
  double chain = 0.0;
  for (std::size_t k = 0; k < dims.user_layers.size(); ++k)
    chain += static_cast<double>(dims.user_layers[k]) *
             (k + 1 < dims.user_layers.size() ? static_cast<double>(dims.user_layers[k + 1]) : d) * d;
  for (std::size_t k = 0; k < dims.item_layers.size(); ++k)
    chain += static_cast<double>(dims.item_layers[k]) *
             (k + 1 < dims.item_layers.size() ? static_cast<double>(dims.item_layers[k + 1]) : d) * d;
  c.implementation = static_cast<double>(dims.rated) * d + (n + m) * d * d + chain;
  if (dims.user_layers.size() == 1 && dims.item_layers.size() == 1)
    c.symbolic = "O(|R|*d + (n+m)*d^2)";
  else
    c.symbolic = "O(|R|*d + (n+m)*d^2 + sum_i n_{i-1} n_i d + sum_i m_{i-1} m_i d + structure products)";
  return c;
}

} // namespace hire

#endif // HIRE_MODEL_HPP
