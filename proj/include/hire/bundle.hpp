#ifndef HIRE_BUNDLE_HPP
#define HIRE_BUNDLE_HPP

#include "hire/data.hpp"
#include "hire/io.hpp"
#include "hire/synth.hpp"

namespace hire
{

/// Ratings plus all side information, sharing one pair of index spaces.
struct DataBundle
{
  std::string name = "dataset";
  RatingMatrix ratings;
  FlatFeatures user_features;
  FlatFeatures item_features;
  Hierarchy user_hierarchy;
  Hierarchy item_hierarchy;

  void validate() const
  {
    if (user_features.count() != ratings.n_users())
      throw DataError("user features cover " + std::to_string(user_features.count()) + " users, ratings have " +
                      std::to_string(ratings.n_users()));
    if (item_features.count() != ratings.n_items())
      throw DataError("item features cover " + std::to_string(item_features.count()) + " items, ratings have " +
                      std::to_string(ratings.n_items()));
    if (!user_features.values.allFinite() || !item_features.values.allFinite())
      throw DataError("flat features contain non-finite values");
    if (user_hierarchy.entity_count() != ratings.n_users())
      throw DataError("user hierarchy covers " + std::to_string(user_hierarchy.entity_count()) + " users, ratings have " +
                      std::to_string(ratings.n_users()));
    if (item_hierarchy.entity_count() != ratings.n_items())
      throw DataError("item hierarchy covers " + std::to_string(item_hierarchy.entity_count()) + " items, ratings have " +
                      std::to_string(ratings.n_items()));
  }

  static DataBundle from_synth(const SynthDataset &s, std::string name = "synthetic")
  {
    DataBundle b;
    b.name = std::move(name);
    b.ratings = s.ratings;
    b.user_features = s.user_features;
    b.item_features = s.item_features;
    b.user_hierarchy = s.user_hierarchy;
    b.item_hierarchy = s.item_hierarchy;
    return b;
  }
};

namespace detail
{

inline std::string layer_list(const Hierarchy &h)
{
  std::string s;
  for (std::size_t k = 0; k < h.layer_sizes().size(); ++k)
    s += (k ? "," : "") + std::to_string(h.layer_sizes()[k]);
  return s;
}

} // namespace detail

/// Entity counts, sparsity and hierarchy depth.
inline KeyValues validation_report(const DataBundle &b)
{
  KeyValues r;
  r.set("name", b.name);
  r.set("users", static_cast<long long>(b.ratings.n_users()));
  r.set("items", static_cast<long long>(b.ratings.n_items()));
  r.set("ratings", static_cast<long long>(b.ratings.size()));
  const double cells = static_cast<double>(b.ratings.n_users()) * static_cast<double>(b.ratings.n_items());
  r.set("density", cells > 0 ? static_cast<double>(b.ratings.size()) / cells : 0.0);
  r.set("sparsity", cells > 0 ? 1.0 - static_cast<double>(b.ratings.size()) / cells : 1.0);
  r.set("rating_min", b.ratings.r_min());
  r.set("rating_max", b.ratings.r_max());
  r.set("user_feature_dim", static_cast<long long>(b.user_features.dim()));
  r.set("item_feature_dim", static_cast<long long>(b.item_features.dim()));
  r.set("user_hierarchy_depth", static_cast<long long>(b.user_hierarchy.n_layers()));
  r.set("item_hierarchy_depth", static_cast<long long>(b.item_hierarchy.n_layers()));
  r.set("user_hierarchy_layers", detail::layer_list(b.user_hierarchy));
  r.set("item_hierarchy_layers", detail::layer_list(b.item_hierarchy));
  Index zero_user = 0, zero_item = 0;
  for (Index j = 0; j < b.user_features.count(); ++j)
    zero_user += (b.user_features.dim() > 0 && b.user_features.values.col(j).isZero(0.0)) ? 1 : 0;
  for (Index j = 0; j < b.item_features.count(); ++j)
    zero_item += (b.item_features.dim() > 0 && b.item_features.values.col(j).isZero(0.0)) ? 1 : 0;
  r.set("users_without_features", static_cast<long long>(zero_user));
  r.set("items_without_features", static_cast<long long>(zero_item));
  return r;
}

/// Canonical on-disk layout:
///   bundle.txt, users.txt, items.txt, ratings.csv,
///   user_features.csv, item_features.csv, user_hierarchy.csv, item_hierarchy.csv
inline void write_bundle(const std::string &dir, const DataBundle &b)
{
  b.validate();
  ensure_dir(dir);
  KeyValues meta;
  meta.set("name", b.name);
  meta.set("rating_min", b.ratings.r_min());
  meta.set("rating_max", b.ratings.r_max());
  meta.save(dir + "/bundle.txt");
  write_ids(dir + "/users.txt", b.ratings.users());
  write_ids(dir + "/items.txt", b.ratings.items());
  write_ratings(dir + "/ratings.csv", b.ratings);
  write_encoded_features(dir + "/user_features.csv", b.user_features, b.ratings.users());
  write_encoded_features(dir + "/item_features.csv", b.item_features, b.ratings.items());
  write_hierarchy(dir + "/user_hierarchy.csv", b.user_hierarchy, &b.ratings.users());
  write_hierarchy(dir + "/item_hierarchy.csv", b.item_hierarchy, &b.ratings.items());
  validation_report(b).save(dir + "/report.txt");
}

inline DataBundle read_bundle(const std::string &dir)
{
  if (!std::filesystem::is_directory(dir))
    throw DataError("bundle directory " + dir + " does not exist; run `prepare` or `synth` first");
  const KeyValues meta = KeyValues::load(dir + "/bundle.txt");
  DataBundle b;
  b.name = meta.get_or("name", "dataset");
  const IdIndex users = read_ids(dir + "/users.txt");
  const IdIndex items = read_ids(dir + "/items.txt");
  b.ratings = load_ratings(dir + "/ratings.csv",
                           RatingSchema::canonical(meta.get_double("rating_min"), meta.get_double("rating_max")),
                           &users, &items);
  b.user_features = read_encoded_features(dir + "/user_features.csv", users);
  b.item_features = read_encoded_features(dir + "/item_features.csv", items);
  b.user_hierarchy = load_hierarchy(dir + "/user_hierarchy.csv", &users);
  b.item_hierarchy = load_hierarchy(dir + "/item_hierarchy.csv", &items);
  b.validate();
  return b;
}

} // namespace hire

#endif // HIRE_BUNDLE_HPP
