#ifndef HIRE_SYNTH_HPP
#define HIRE_SYNTH_HPP

#include "hire/data.hpp"

namespace hire
{

/// Generator settings for planted-structure datasets.
struct SynthConfig
{
  Index n_users = 300;
  Index n_items = 300;
  Index latent_dim = 4;
  // Sizes of the layers above the entities, bottom to top. Must be
  // nonincreasing and no larger than the entity count.
  std::vector<Index> user_layers = {30, 6};
  std::vector<Index> item_layers = {30, 6};

  double density = 0.05;      // mean probability that an entry is observed
  double activity_skew = 1.5; // lognormal sigma of per-user and per-item activity; 0 = uniform
  double noise = 0.3;         // rating noise std
  double hier_signal = 0.9;   // share of a node's latent variance inherited from its parent, in [0, 1]
  double flat_signal = 1.0;   // scale of the latent image in the flat features; 0 = uninformative
  double flat_noise = 0.5;    // feature noise std
  double feature_missing = 0; // probability a feature entry is zeroed
  Index user_feature_dim = 6;
  Index item_feature_dim = 6;
  double offset = 3.0;       // ratings center; carried by the first latent coordinate
  double factor_scale = 1.0; // std of the centered part of a planted rating
  double r_min = 1.0;
  double r_max = 5.0;
  double train_fraction = 0.8;

  void validate() const
  {
    if (n_users < 1 || n_items < 1 || latent_dim < 1)
      throw ConfigError("synth: n_users, n_items and latent_dim must be >= 1");
    const auto check_layers = [](const std::vector<Index> &layers, Index entities, const char *side) {
      Index below = entities;
      for (std::size_t k = 0; k < layers.size(); ++k) {
        if (layers[k] < 1 || layers[k] > below)
          throw ConfigError(std::string("synth: inconsistent ") + side + " layer sizes: layer " +
                            std::to_string(k + 1) + " has " + std::to_string(layers[k]) + " nodes above " +
                            std::to_string(below));
        below = layers[k];
      }
    };
    check_layers(user_layers, n_users, "user");
    check_layers(item_layers, n_items, "item");
    if (!(density > 0.0 && density <= 1.0))
      throw ConfigError("synth: density must lie in (0, 1]");
    if (!(hier_signal >= 0.0 && hier_signal <= 1.0))
      throw ConfigError("synth: hier_signal must lie in [0, 1]");
    if (!(activity_skew >= 0.0))
      throw ConfigError("synth: activity_skew must be nonnegative");
    if (!(noise >= 0.0) || !(flat_signal >= 0.0) || !(flat_noise >= 0.0) || !(factor_scale >= 0.0) || !(offset >= 0.0))
      throw ConfigError("synth: noise levels, scales and offset must be nonnegative");
    if (!(feature_missing >= 0.0 && feature_missing < 1.0))
      throw ConfigError("synth: feature_missing must lie in [0, 1)");
    if (!(r_min > 0.0 && r_min <= r_max))
      throw ConfigError("synth: need 0 < r_min <= r_max");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("synth: train_fraction must lie in (0, 1)");
  }
};

struct PlantedFactors
{
  Matrix users;                      // n × d
  Matrix items;                      // d × m
  std::vector<Matrix> user_layer_reps; // per layer, n_k × d (layer 0 = users)
  std::vector<Matrix> item_layer_reps; // per layer, d × m_k (layer 0 = items)
  Matrix dense_ratings;              // users * items, before noise and clipping
};

struct SynthDataset
{
  RatingMatrix ratings;
  RatingMatrix train;
  RatingMatrix test;
  FlatFeatures user_features;
  FlatFeatures item_features;
  Hierarchy user_hierarchy;
  Hierarchy item_hierarchy;
  PlantedFactors planted;
};

namespace detail
{

// Every parent gets at least one child; the remaining children pick parents uniformly.
inline std::vector<Index> assign_parents(Index children, Index parents, Rng &rng)
{
  std::vector<Index> order(static_cast<std::size_t>(children));
  for (Index i = 0; i < children; ++i)
    order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<Index> parent(static_cast<std::size_t>(children));
  for (std::size_t k = 0; k < order.size(); ++k)
    parent[static_cast<std::size_t>(order[k])] =
        k < static_cast<std::size_t>(parents) ? static_cast<Index>(k) : static_cast<Index>(rng.below(std::uint64_t(parents)));
  return parent;
}

// Top-down latent generation: child = sqrt(h) parent + sqrt(1-h) noise. Returns
// per-layer latent rows (layer 0 first) and the parent assignments.
inline std::pair<std::vector<Matrix>, std::vector<std::vector<Index>>>
plant_tree(Index entities, const std::vector<Index> &layers, Index d, double h, Rng &rng)
{
  std::vector<Index> sizes{entities};
  sizes.insert(sizes.end(), layers.begin(), layers.end());
  std::vector<std::vector<Index>> parents;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    parents.push_back(assign_parents(sizes[k], sizes[k + 1], rng));
  std::vector<Matrix> reps(sizes.size());
  reps.back() = rng.gaussian(sizes.back(), d, 1.0);
  const double inherit = std::sqrt(h), own = std::sqrt(1.0 - h);
  for (std::size_t k = sizes.size() - 1; k-- > 0;) {
    Matrix z = rng.gaussian(sizes[k], d, 1.0);
    for (Index i = 0; i < sizes[k]; ++i)
      z.row(i) = inherit * reps[k + 1].row(parents[k][std::size_t(i)]) + own * z.row(i);
    reps[k] = std::move(z);
  }
  return {std::move(reps), std::move(parents)};
}

} // namespace detail

/// Planted-structure dataset: ratings are dot products of planted user and
/// item factors plus noise; flat features are noisy linear images of the
/// planted factors; hierarchies are the trees the factors were grown from.
inline SynthDataset synth_dataset(const SynthConfig &cfg, std::uint64_t seed)
{
  cfg.validate();
  const Index n = cfg.n_users, m = cfg.n_items, d = cfg.latent_dim;
  Rng tree_rng(derive_seed(seed, 11));
  auto [ureps, uparents] = detail::plant_tree(n, cfg.user_layers, d, cfg.hier_signal, tree_rng);
  auto [vreps, vparents] = detail::plant_tree(m, cfg.item_layers, d, cfg.hier_signal, tree_rng);

  // coordinate 0 is the constant sqrt(offset) on both sides, so u·v = offset +
  // s² Σ_{k>0} z_k w_k; s makes the centered part have std factor_scale.
  for (auto *reps : {&ureps, &vreps})
    for (Matrix &r : *reps)
      r.col(0).setZero();
  const double s = d > 1 ? std::sqrt(cfg.factor_scale / std::sqrt(static_cast<double>(d - 1))) : 0.0;
  Vector mu = Vector::Zero(d);
  mu(0) = std::sqrt(cfg.offset);

  SynthDataset out;
  PlantedFactors &pf = out.planted;
  for (const Matrix &r : ureps)
    pf.user_layer_reps.push_back((s * r).rowwise() + mu.transpose());
  for (const Matrix &r : vreps)
    pf.item_layer_reps.push_back(((s * r).rowwise() + mu.transpose()).transpose());
  pf.users = pf.user_layer_reps.front();
  pf.items = pf.item_layer_reps.front();
  pf.dense_ratings = pf.users * pf.items;

  Rng obs_rng(derive_seed(seed, 12));
  const auto activity = [&](Index count) {
    Vector a(count);
    const double sk = cfg.activity_skew;
    for (Index i = 0; i < count; ++i)
      a(i) = std::exp(sk * obs_rng.normal() - 0.5 * sk * sk);
    return a;
  };
  const Vector ua = activity(n), va = activity(m);
  std::vector<Rating> entries;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      const bool observed = obs_rng.uniform() < cfg.density * ua(i) * va(j);
      const double eps = obs_rng.normal();
      if (!observed)
        continue;
      const double r = std::clamp(pf.dense_ratings(i, j) + cfg.noise * eps, cfg.r_min, cfg.r_max);
      entries.push_back({i, j, r});
    }
  out.ratings = RatingMatrix(IdIndex::range(n), IdIndex::range(m), std::move(entries), cfg.r_min, cfg.r_max);

  Rng feat_rng(derive_seed(seed, 13));
  const auto features = [&](const Matrix &latent_rows, Index dim, const char *prefix) {
    const Matrix b = feat_rng.gaussian(dim, d, 1.0 / std::sqrt(static_cast<double>(d)));
    Matrix x = cfg.flat_signal * b * latent_rows.transpose() +
               feat_rng.gaussian(dim, latent_rows.rows(), cfg.flat_noise);
    if (cfg.feature_missing > 0.0)
      for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i)
          if (feat_rng.uniform() < cfg.feature_missing)
            x(i, j) = 0.0;
    FlatFeatures f;
    f.values = std::move(x);
    for (Index k = 0; k < dim; ++k) {
      f.feature_names.push_back(std::string(prefix) + std::to_string(k));
      f.encoders.push_back(AttributeEncoder::numeric(f.feature_names.back()));
    }
    return f;
  };
  out.user_features = features(s * ureps.front(), cfg.user_feature_dim, "uf");
  out.item_features = features(s * vreps.front(), cfg.item_feature_dim, "if");

  out.user_hierarchy = Hierarchy::from_parents(n, uparents, cfg.user_layers);
  out.item_hierarchy = Hierarchy::from_parents(m, vparents, cfg.item_layers);

  auto [train, test] = split_ratings(out.ratings, SplitSpec{cfg.train_fraction, derive_seed(seed, 14)});
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

} // namespace hire

#endif // HIRE_SYNTH_HPP
