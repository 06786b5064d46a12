#ifndef HIRE_DATA_HPP
#define HIRE_DATA_HPP

#include "hire/common.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <utility>

namespace hire
{

/// Dense 0-based index over raw string ids.
///
/// Ids are ordered numerically when every id is an integer and
/// lexicographically otherwise, so the index depends only on the id set.
class IdIndex
{
public:
  IdIndex() = default;

  explicit IdIndex(std::vector<std::string> ids) : ids_(std::move(ids))
  {
    sort_canonical(ids_);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!lookup_.emplace(ids_[i], static_cast<Index>(i)).second)
        throw DataError("duplicate id '" + ids_[i] + "'");
    }
  }

  static IdIndex range(Index n)
  {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      ids.push_back(std::to_string(i));
    return IdIndex(std::move(ids));
  }

  Index size() const { return static_cast<Index>(ids_.size()); }
  const std::string &id(Index i) const { return ids_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string> &ids() const { return ids_; }

  std::optional<Index> find(const std::string &id) const
  {
    auto it = lookup_.find(id);
    if (it == lookup_.end())
      return std::nullopt;
    return it->second;
  }

  bool operator==(const IdIndex &o) const { return ids_ == o.ids_; }

  static void sort_canonical(std::vector<std::string> &ids)
  {
    const bool numeric = std::all_of(ids.begin(), ids.end(), [](const std::string &s) {
      if (s.empty() || s.size() > 18)
        return false;
      std::size_t i = (s[0] == '-') ? 1 : 0;
      if (i == s.size())
        return false;
      return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                         [](char c) { return c >= '0' && c <= '9'; });
    });
    if (numeric)
      std::sort(ids.begin(), ids.end(),
                [](const std::string &a, const std::string &b) {
                  const long long x = std::stoll(a), y = std::stoll(b);
                  return x != y ? x < y : a < b;
                });
    else
      std::sort(ids.begin(), ids.end());
  }

private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> lookup_;
};

struct Rating
{
  Index user = 0;
  Index item = 0;
  double value = 0.0;
};

/// Sparse explicit ratings R with implied indicator mask M.
///
/// Entries are kept sorted by (user, item). Construction rejects duplicate
/// pairs, non-positive ratings, and ratings outside [r_min, r_max].
class RatingMatrix
{
public:
  RatingMatrix() = default;

  RatingMatrix(IdIndex users, IdIndex items, std::vector<Rating> entries, double r_min, double r_max)
      : users_(std::move(users)), items_(std::move(items)), entries_(std::move(entries)), r_min_(r_min),
        r_max_(r_max)
  {
    if (!(r_min_ <= r_max_))
      throw DataError("rating range is empty");
    std::sort(entries_.begin(), entries_.end(), [](const Rating &a, const Rating &b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Rating &e = entries_[k];
      if (e.user < 0 || e.user >= n_users() || e.item < 0 || e.item >= n_items())
        throw DataError("rating entry index out of range");
      if (!(e.value > 0.0))
        throw DataError("rating for (" + users_.id(e.user) + ", " + items_.id(e.item) + ") is not strictly positive");
      if (e.value < r_min_ || e.value > r_max_)
        throw DataError("rating for (" + users_.id(e.user) + ", " + items_.id(e.item) + ") outside [" +
                        fmt_double(r_min_) + ", " + fmt_double(r_max_) + "]");
      if (k > 0 && entries_[k - 1].user == e.user && entries_[k - 1].item == e.item)
        throw DataError("duplicate rating for (" + users_.id(e.user) + ", " + items_.id(e.item) + ")");
    }
  }

  Index n_users() const { return users_.size(); }
  Index n_items() const { return items_.size(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  const IdIndex &users() const { return users_; }
  const IdIndex &items() const { return items_; }
  const std::vector<Rating> &entries() const { return entries_; }

  /// Same index spaces, different entry set.
  RatingMatrix with_entries(std::vector<Rating> entries) const
  {
    return RatingMatrix(users_, items_, std::move(entries), r_min_, r_max_);
  }

  Eigen::SparseMatrix<double> to_sparse() const
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(entries_.size());
    for (const Rating &e : entries_)
      t.emplace_back(e.user, e.item, e.value);
    Eigen::SparseMatrix<double> s(n_users(), n_items());
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }

  Matrix mask_dense() const
  {
    Matrix m = Matrix::Zero(n_users(), n_items());
    for (const Rating &e : entries_)
      m(e.user, e.item) = 1.0;
    return m;
  }

  bool operator==(const RatingMatrix &o) const
  {
    if (!(users_ == o.users_ && items_ == o.items_ && r_min_ == o.r_min_ && r_max_ == o.r_max_ &&
          entries_.size() == o.entries_.size()))
      return false;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Rating &a = entries_[k], &b = o.entries_[k];
      if (a.user != b.user || a.item != b.item || a.value != b.value)
        return false;
    }
    return true;
  }

private:
  IdIndex users_;
  IdIndex items_;
  std::vector<Rating> entries_;
  double r_min_ = 1.0;
  double r_max_ = 5.0;
};

/// Column layout of a delimited ratings file. Extra columns (timestamps) are ignored.
struct RatingSchema
{
  char delimiter = ',';
  bool has_header = true;
  int user_column = 0;
  int item_column = 1;
  int rating_column = 2;
  double r_min = 1.0;
  double r_max = 5.0;

  static RatingSchema canonical(double r_min = 1.0, double r_max = 5.0)
  {
    RatingSchema s;
    s.r_min = r_min;
    s.r_max = r_max;
    return s;
  }
};

namespace detail
{

struct RawRating
{
  std::string user, item;
  double value;
  std::size_t line;
};

inline std::vector<RawRating> read_raw_ratings(const std::string &path, const RatingSchema &schema)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open ratings file " + path);
  const int needed = std::max({schema.user_column, schema.item_column, schema.rating_column}) + 1;
  std::vector<RawRating> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (lineno == 1 && schema.has_header)
      continue;
    if (trim(line).empty())
      continue;
    auto f = split_fields(line, schema.delimiter);
    const std::string where = path + ":" + std::to_string(lineno);
    if (static_cast<int>(f.size()) < needed)
      throw DataError(where + ": malformed row, expected at least " + std::to_string(needed) + " fields");
    const auto &u = f[static_cast<std::size_t>(schema.user_column)];
    const auto &i = f[static_cast<std::size_t>(schema.item_column)];
    if (u.empty() || i.empty())
      throw DataError(where + ": malformed row, empty id");
    const double v = parse_double(f[static_cast<std::size_t>(schema.rating_column)], where + ": rating");
    if (!(v >= schema.r_min && v <= schema.r_max) || !(v > 0.0))
      throw DataError(where + ": rating " + fmt_double(v) + " outside [" + fmt_double(schema.r_min) + ", " +
                      fmt_double(schema.r_max) + "]");
    rows.push_back({u, i, v, lineno});
  }
  return rows;
}

inline IdIndex index_of(const std::vector<RawRating> &rows, bool users)
{
  std::set<std::string> seen;
  for (const auto &r : rows)
    seen.insert(users ? r.user : r.item);
  return IdIndex(std::vector<std::string>(seen.begin(), seen.end()));
}

} // namespace detail

/// Loads a delimited ratings file. Ids are remapped to dense indices; the
/// IdIndex tables inside the result hold the reverse mapping.
///
/// When `users` / `items` are given, ids are resolved against them instead of
/// being inferred; an id missing from a fixed index is an error.
inline RatingMatrix load_ratings(const std::string &path, const RatingSchema &schema,
                                 const IdIndex *users = nullptr, const IdIndex *items = nullptr)
{
  const auto rows = detail::read_raw_ratings(path, schema);
  IdIndex uidx = users ? *users : detail::index_of(rows, true);
  IdIndex iidx = items ? *items : detail::index_of(rows, false);
  std::vector<Rating> entries;
  entries.reserve(rows.size());
  std::map<std::pair<Index, Index>, std::size_t> seen;
  for (const auto &r : rows) {
    const auto u = uidx.find(r.user);
    const auto i = iidx.find(r.item);
    const std::string where = path + ":" + std::to_string(r.line);
    if (!u)
      throw DataError(where + ": unknown user id '" + r.user + "'");
    if (!i)
      throw DataError(where + ": unknown item id '" + r.item + "'");
    auto [it, fresh] = seen.emplace(std::make_pair(*u, *i), r.line);
    if (!fresh)
      throw DataError(where + ": duplicate rating for (" + r.user + ", " + r.item + "), first seen on line " +
                      std::to_string(it->second));
    entries.push_back({*u, *i, r.value});
  }
  return RatingMatrix(std::move(uidx), std::move(iidx), std::move(entries), schema.r_min, schema.r_max);
}

/// Canonical ratings format: header `user,item,rating`, raw ids, one entry per line.
inline void write_ratings(const std::string &path, const RatingMatrix &r)
{
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  os << "user,item,rating\n";
  for (const Rating &e : r.entries())
    os << r.users().id(e.user) << ',' << r.items().id(e.item) << ',' << fmt_double(e.value) << '\n';
}

inline void write_ids(const std::string &path, const IdIndex &ids)
{
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  for (const auto &id : ids.ids())
    os << id << '\n';
}

inline IdIndex read_ids(const std::string &path)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot read " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (!line.empty())
      ids.push_back(line);
  }
  return IdIndex(std::move(ids));
}

// ---------------------------------------------------------------------------
// Flat side information

struct AttributeEncoder
{
  enum class Kind
  {
    categorical,
    numeric
  };

  std::string name;
  Kind kind = Kind::categorical;
  // Categorical: fixed category list; inferred (sorted) from the file when empty.
  std::vector<std::string> categories;
  // Numeric: min-max range; inferred from the observed values when unset.
  std::optional<double> min;
  std::optional<double> max;

  static AttributeEncoder categorical(std::string name, std::vector<std::string> cats = {})
  {
    AttributeEncoder e;
    e.name = std::move(name);
    e.categories = std::move(cats);
    return e;
  }

  static AttributeEncoder numeric(std::string name, std::optional<double> lo = {}, std::optional<double> hi = {})
  {
    AttributeEncoder e;
    e.name = std::move(name);
    e.kind = Kind::numeric;
    e.min = lo;
    e.max = hi;
    return e;
  }
};

struct FeatureFileSchema
{
  char delimiter = ',';
  std::string id_column = "id";
  std::vector<AttributeEncoder> attributes;
  bool ignore_unknown_ids = false;
};

/// Dense attribute matrix, one column per entity (X is d_x × n).
struct FlatFeatures
{
  Matrix values;
  std::vector<std::string> feature_names;
  // Resolved encoders (categories and ranges filled in).
  std::vector<AttributeEncoder> encoders;

  Index dim() const { return values.rows(); }
  Index count() const { return values.cols(); }

  static FlatFeatures none(Index entities)
  {
    FlatFeatures f;
    f.values = Matrix::Zero(0, entities);
    return f;
  }
};

inline FlatFeatures load_flat_features(const std::string &path, const FeatureFileSchema &schema,
                                       const IdIndex &entities)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open features file " + path);
  std::string line;
  if (!std::getline(is, line))
    throw DataError(path + ": missing header row");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  const auto header = split_fields(line, schema.delimiter);
  auto column_of = [&](const std::string &name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError(path + ": header has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column_of(schema.id_column);
  std::vector<std::size_t> attr_cols;
  for (const auto &a : schema.attributes)
    attr_cols.push_back(column_of(a.name));

  // first pass: raw strings per entity
  std::vector<std::optional<std::vector<std::string>>> raw(static_cast<std::size_t>(entities.size()));
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line, schema.delimiter);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    const auto idx = entities.find(f[id_col]);
    if (!idx) {
      if (schema.ignore_unknown_ids)
        continue;
      throw DataError(where + ": unknown entity id '" + f[id_col] + "'");
    }
    auto &slot = raw[static_cast<std::size_t>(*idx)];
    if (slot)
      throw DataError(where + ": duplicate row for entity '" + f[id_col] + "'");
    std::vector<std::string> vals;
    for (std::size_t c : attr_cols)
      vals.push_back(f[c]);
    slot = std::move(vals);
  }

  // resolve encoders
  std::vector<AttributeEncoder> enc = schema.attributes;
  for (std::size_t a = 0; a < enc.size(); ++a) {
    auto &e = enc[a];
    if (e.kind == AttributeEncoder::Kind::categorical) {
      if (e.categories.empty()) {
        std::set<std::string> cats;
        for (const auto &r : raw)
          if (r && !(*r)[a].empty())
            cats.insert((*r)[a]);
        e.categories.assign(cats.begin(), cats.end());
      }
    }
    else {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t k = 0; k < raw.size(); ++k) {
        const auto &r = raw[k];
        if (!r || (*r)[a].empty())
          continue;
        const double v = parse_double((*r)[a], "attribute '" + e.name + "' of entity '" + entities.id(Index(k)) + "'");
        if (!std::isfinite(v))
          throw DataError("attribute '" + e.name + "': non-finite value for entity '" + entities.id(Index(k)) + "'");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!e.min)
        e.min = std::isfinite(lo) ? lo : 0.0;
      if (!e.max)
        e.max = std::isfinite(hi) ? hi : 1.0;
    }
  }

  FlatFeatures out;
  for (const auto &e : enc) {
    if (e.kind == AttributeEncoder::Kind::categorical)
      for (const auto &c : e.categories)
        out.feature_names.push_back(e.name + "=" + c);
    else
      out.feature_names.push_back(e.name);
  }
  out.values = Matrix::Zero(static_cast<Index>(out.feature_names.size()), entities.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (!raw[k])
      continue; // missing profile: zero column
    Index row = 0;
    for (std::size_t a = 0; a < enc.size(); ++a) {
      const auto &e = enc[a];
      const std::string &v = (*raw[k])[a];
      if (e.kind == AttributeEncoder::Kind::categorical) {
        if (!v.empty()) {
          auto it = std::find(e.categories.begin(), e.categories.end(), v);
          if (it == e.categories.end())
            throw DataError("attribute '" + e.name + "': unencodable value '" + v + "' for entity '" +
                            entities.id(Index(k)) + "'");
          out.values(row + (it - e.categories.begin()), Index(k)) = 1.0;
        }
        row += static_cast<Index>(e.categories.size());
      }
      else {
        if (!v.empty()) {
          const double x = parse_double(v, "attribute '" + e.name + "'");
          const double lo = *e.min, hi = *e.max;
          if (!std::isfinite(x) || x < lo || x > hi)
            throw DataError("attribute '" + e.name + "': unencodable value '" + v + "' outside [" + fmt_double(lo) +
                            ", " + fmt_double(hi) + "]");
          out.values(row, Index(k)) = hi > lo ? (x - lo) / (hi - lo) : 0.0;
        }
        row += 1;
      }
    }
  }
  out.encoders = std::move(enc);
  return out;
}

/// Canonical encoded-features file: header `id,<feature names>`, one row per entity in index order.
inline void write_encoded_features(const std::string &path, const FlatFeatures &f, const IdIndex &entities)
{
  if (f.count() != entities.size())
    throw ShapeError("features cover " + std::to_string(f.count()) + " entities, index has " +
                     std::to_string(entities.size()));
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  os << "id";
  for (const auto &n : f.feature_names)
    os << ',' << n;
  os << '\n';
  for (Index j = 0; j < f.count(); ++j) {
    os << entities.id(j);
    for (Index r = 0; r < f.dim(); ++r)
      os << ',' << fmt_double(f.values(r, j));
    os << '\n';
  }
}

inline FlatFeatures read_encoded_features(const std::string &path, const IdIndex &entities)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open features file " + path);
  std::string line;
  if (!std::getline(is, line))
    throw DataError(path + ": missing header row");
  auto header = split_fields(line, ',');
  if (header.empty() || header[0] != "id")
    throw DataError(path + ": first column must be 'id'");
  FlatFeatures f;
  f.feature_names.assign(header.begin() + 1, header.end());
  f.values = Matrix::Zero(static_cast<Index>(f.feature_names.size()), entities.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto fields = split_fields(line, ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != header.size())
      throw DataError(where + ": wrong field count");
    const auto idx = entities.find(fields[0]);
    if (!idx)
      throw DataError(where + ": unknown entity id '" + fields[0] + "'");
    for (std::size_t c = 1; c < fields.size(); ++c)
      f.values(Index(c - 1), *idx) = parse_double(fields[c], where);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Hierarchical side information

/// Layered parent–child structure. Layer 0 holds the entities themselves.
/// links[k] is the (size of layer k) × (size of layer k+1) membership matrix.
class Hierarchy
{
public:
  Hierarchy() = default;

  /// Validates that every non-top node has at least one parent.
  explicit Hierarchy(std::vector<Matrix> links, std::vector<std::vector<std::string>> node_ids = {})
      : links_(std::move(links)), node_ids_(std::move(node_ids))
  {
    if (links_.empty())
      throw DataError("hierarchy needs an explicit entity count when it has no links; use Hierarchy::flat");
    layer_sizes_.push_back(links_.front().rows());
    for (std::size_t k = 0; k < links_.size(); ++k) {
      const Matrix &t = links_[k];
      if (t.rows() != layer_sizes_.back())
        throw ShapeError("link " + std::to_string(k) + " has " + std::to_string(t.rows()) +
                         " child rows, layer has " + std::to_string(layer_sizes_.back()) + " nodes");
      if (t.cols() < 1)
        throw DataError("link " + std::to_string(k) + " has an empty parent layer");
      for (Index i = 0; i < t.rows(); ++i) {
        for (Index j = 0; j < t.cols(); ++j)
          if (t(i, j) != 0.0 && t(i, j) != 1.0)
            throw DataError("link " + std::to_string(k) + " is not a 0/1 membership matrix");
        if (t.row(i).sum() == 0.0)
          throw DataError("orphan node " + node_name(Index(k), i) + " in layer " + std::to_string(k) +
                          " has no parent");
      }
      layer_sizes_.push_back(t.cols());
    }
    if (!node_ids_.empty() && node_ids_.size() != layer_sizes_.size())
      throw DataError("node id table does not match layer count");
  }

  static Hierarchy flat(Index entities)
  {
    Hierarchy h;
    h.layer_sizes_ = {entities};
    return h;
  }

  /// Builds links from a per-layer parent assignment (one parent per child).
  static Hierarchy from_parents(Index entities, const std::vector<std::vector<Index>> &parents,
                                const std::vector<Index> &parent_layer_sizes)
  {
    if (parents.size() != parent_layer_sizes.size())
      throw ShapeError("parent assignment / layer size count mismatch");
    if (parents.empty())
      return flat(entities);
    std::vector<Matrix> links;
    Index below = entities;
    for (std::size_t k = 0; k < parents.size(); ++k) {
      if (static_cast<Index>(parents[k].size()) != below)
        throw ShapeError("layer " + std::to_string(k) + " parent list has wrong length");
      Matrix t = Matrix::Zero(below, parent_layer_sizes[k]);
      for (Index i = 0; i < below; ++i) {
        const Index p = parents[k][static_cast<std::size_t>(i)];
        if (p < 0 || p >= parent_layer_sizes[k])
          throw DataError("parent index out of range in layer " + std::to_string(k));
        t(i, p) = 1.0;
      }
      links.push_back(std::move(t));
      below = parent_layer_sizes[k];
    }
    return Hierarchy(std::move(links));
  }

  Index n_layers() const { return static_cast<Index>(layer_sizes_.size()); }
  Index entity_count() const { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
  const std::vector<Index> &layer_sizes() const { return layer_sizes_; }
  const std::vector<Matrix> &links() const { return links_; }
  const std::vector<std::vector<std::string>> &node_ids() const { return node_ids_; }

  std::string node_name(Index layer, Index i) const
  {
    if (static_cast<std::size_t>(layer) < node_ids_.size())
      return "'" + node_ids_[static_cast<std::size_t>(layer)][static_cast<std::size_t>(i)] + "'";
    return "#" + std::to_string(i);
  }

private:
  std::vector<Index> layer_sizes_;
  std::vector<Matrix> links_;
  std::vector<std::vector<std::string>> node_ids_;
};

/// Reads a `layer,child,parent` edge list. `layer` is the child's layer
/// (0 = entities). Node ids are global across layers.
///
/// With `entities` given, layer-0 children are resolved against it and every
/// entity must appear; without it, layer 0 is inferred from the file.
/// A file with only the header yields a single-layer hierarchy (needs
/// `entities` for its size, otherwise it has zero entities).
inline Hierarchy load_hierarchy(const std::string &path, const IdIndex *entities = nullptr)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open hierarchy file " + path);
  std::string line;
  if (!std::getline(is, line))
    throw DataError(path + ": missing header `layer,child,parent`");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (split_fields(line, ',') != std::vector<std::string>{"layer", "child", "parent"})
    throw DataError(path + ": header must be `layer,child,parent`");

  struct Edge
  {
    Index layer;
    std::string child, parent;
    std::size_t line;
  };
  std::vector<Edge> edges;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line, ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 3 || f[1].empty() || f[2].empty())
      throw DataError(where + ": malformed edge, expected layer,child,parent");
    const double l = parse_double(f[0], where + ": layer");
    if (l < 0 || l != std::floor(l))
      throw DataError(where + ": layer must be a nonnegative integer");
    edges.push_back({static_cast<Index>(l), f[1], f[2], lineno});
  }

  if (edges.empty())
    return Hierarchy::flat(entities ? entities->size() : 0);

  // cycle check over the global id graph (child -> parent)
  std::map<std::string, std::set<std::string>> up;
  for (const auto &e : edges)
    up[e.child].insert(e.parent);
  {
    std::map<std::string, int> state; // 1 = on stack, 2 = done
    std::vector<std::string> stack;
    std::function<void(const std::string &)> visit = [&](const std::string &v) {
      state[v] = 1;
      stack.push_back(v);
      auto it = up.find(v);
      if (it != up.end())
        for (const auto &p : it->second) {
          if (state[p] == 1) {
            std::string cyc;
            auto from = std::find(stack.begin(), stack.end(), p);
            for (; from != stack.end(); ++from)
              cyc += *from + " -> ";
            throw DataError(path + ": cycle detected: " + cyc + p);
          }
          if (state[p] == 0)
            visit(p);
        }
      stack.pop_back();
      state[v] = 2;
    };
    for (const auto &[v, ps] : up)
      if (state[v] == 0)
        visit(v);
  }

  // layer membership
  Index top = 0;
  for (const auto &e : edges)
    top = std::max(top, e.layer + 1);
  std::map<std::string, Index> layer_of;
  auto place = [&](const std::string &id, Index layer, std::size_t ln) {
    auto [it, fresh] = layer_of.emplace(id, layer);
    if (!fresh && it->second != layer)
      throw DataError(path + ":" + std::to_string(ln) + ": node '" + id + "' appears in layers " +
                      std::to_string(it->second) + " and " + std::to_string(layer));
  };
  for (const auto &e : edges) {
    place(e.child, e.layer, e.line);
    place(e.parent, e.layer + 1, e.line);
  }

  std::vector<std::vector<std::string>> ids(static_cast<std::size_t>(top + 1));
  for (const auto &[id, layer] : layer_of)
    if (layer > 0)
      ids[static_cast<std::size_t>(layer)].push_back(id);
  for (std::size_t k = 1; k < ids.size(); ++k)
    IdIndex::sort_canonical(ids[k]);
  IdIndex layer0;
  if (entities) {
    layer0 = *entities;
    for (const auto &[id, layer] : layer_of)
      if (layer == 0 && !entities->find(id))
        throw DataError(path + ": unknown entity id '" + id + "' in layer 0");
  }
  else {
    std::vector<std::string> l0;
    for (const auto &[id, layer] : layer_of)
      if (layer == 0)
        l0.push_back(id);
    layer0 = IdIndex(std::move(l0));
  }
  ids[0] = layer0.ids();

  std::vector<IdIndex> index;
  index.push_back(layer0);
  for (std::size_t k = 1; k < ids.size(); ++k)
    index.emplace_back(ids[k]);

  std::vector<Matrix> links;
  for (Index k = 0; k < top; ++k)
    links.push_back(Matrix::Zero(index[std::size_t(k)].size(), index[std::size_t(k + 1)].size()));
  for (const auto &e : edges)
    links[std::size_t(e.layer)](*index[std::size_t(e.layer)].find(e.child),
                                *index[std::size_t(e.layer + 1)].find(e.parent)) = 1.0;

  std::vector<std::string> orphans;
  for (Index k = 0; k < top; ++k)
    for (Index i = 0; i < links[std::size_t(k)].rows(); ++i)
      if (links[std::size_t(k)].row(i).sum() == 0.0)
        orphans.push_back("'" + ids[std::size_t(k)][std::size_t(i)] + "' (layer " + std::to_string(k) + ")");
  if (!orphans.empty()) {
    std::string msg = path + ": orphan node(s) without a parent: ";
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i)
      msg += (i ? ", " : "") + orphans[i];
    if (orphans.size() > 20)
      msg += ", ... (" + std::to_string(orphans.size()) + " total)";
    throw DataError(msg);
  }
  return Hierarchy(std::move(links), std::move(ids));
}

/// Writes the canonical edge list. Layer-0 nodes are named from `entities`
/// when given; unnamed upper nodes get zero-padded ids (`L<layer>_<index>`)
/// so that reloading preserves their order.
inline void write_hierarchy(const std::string &path, const Hierarchy &h, const IdIndex *entities = nullptr)
{
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  if (entities && entities->size() != h.entity_count())
    throw ShapeError("hierarchy has " + std::to_string(h.entity_count()) + " entities, index has " +
                     std::to_string(entities->size()));
  const auto name = [&](std::size_t layer, Index i) -> std::string {
    if (layer == 0 && entities)
      return entities->id(i);
    if (!h.node_ids().empty())
      return h.node_ids()[layer][std::size_t(i)];
    const std::string num = std::to_string(i);
    const std::size_t width = std::to_string(std::max<Index>(h.layer_sizes()[layer] - 1, 0)).size();
    return "L" + std::to_string(layer) + "_" + std::string(width - num.size(), '0') + num;
  };
  os << "layer,child,parent\n";
  for (std::size_t k = 0; k < h.links().size(); ++k) {
    const Matrix &t = h.links()[k];
    for (Index i = 0; i < t.rows(); ++i)
      for (Index j = 0; j < t.cols(); ++j)
        if (t(i, j) != 0.0)
          os << k << ',' << name(k, i) << ',' << name(k + 1, j) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Train/test split

struct SplitSpec
{
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Uniformly random disjoint split of the rated entries; both halves keep
/// the original index spaces.
inline std::pair<RatingMatrix, RatingMatrix> split_ratings(const RatingMatrix &r, const SplitSpec &spec)
{
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1), got " + fmt_double(spec.train_fraction));
  std::vector<std::size_t> order(r.size());
  for (std::size_t k = 0; k < order.size(); ++k)
    order[k] = k;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * double(r.size())));
  std::vector<Rating> train, test;
  train.reserve(n_train);
  test.reserve(r.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_train ? train : test).push_back(r.entries()[order[k]]);
  return {r.with_entries(std::move(train)), r.with_entries(std::move(test))};
}

/// Order-independent fingerprint of an entry set's (user, item) pairs.
inline std::uint64_t partition_hash(const RatingMatrix &r)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Rating &e : r.entries()) { // entries are canonically sorted
    const std::uint64_t key[2] = {static_cast<std::uint64_t>(e.user), static_cast<std::uint64_t>(e.item)};
    h = fnv1a(std::string_view(reinterpret_cast<const char *>(key), sizeof key), h);
  }
  return h;
}

} // namespace hire

#endif // HIRE_DATA_HPP
