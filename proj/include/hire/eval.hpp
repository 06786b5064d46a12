#ifndef HIRE_EVAL_HPP
#define HIRE_EVAL_HPP

#include "hire/bundle.hpp"
#include "hire/model.hpp"

#include <cstring>
#include <future>

namespace hire
{

/// sqrt(Σ (r̂ - r)² / |test|), predictions aligned with test.entries().
inline double rmse(const std::vector<double> &predictions, const RatingMatrix &test)
{
  if (test.empty())
    throw DataError("RMSE of an empty test set");
  if (predictions.size() != test.size())
    throw ShapeError("RMSE: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(test.size()) + " test ratings");
  double s = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = predictions[k] - test.entries()[k].value;
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(test.size()));
}

inline double rmse(const HireModel &model, const RatingMatrix &test, bool clamp)
{
  const auto pred = predict_entries(model, test.entries(),
                                    clamp ? std::optional<ClampRange>(ClampRange{test.r_min(), test.r_max()})
                                          : std::nullopt);
  return rmse(pred, test);
}

enum class Variant
{
  full,
  no_user_flat,  // HIRE-FU: gamma = 0
  no_item_flat,  // HIRE-FV: theta = 0
  no_user_struct, // HIRE-SU: alpha = 0
  no_item_struct  // HIRE-SV: beta = 0
};

inline const char *variant_name(Variant v)
{
  switch (v) {
  case Variant::full:
    return "full";
  case Variant::no_user_flat:
    return "FU";
  case Variant::no_item_flat:
    return "FV";
  case Variant::no_user_struct:
    return "SU";
  case Variant::no_item_struct:
    return "SV";
  }
  return "?";
}

inline HyperParams apply_variant(HyperParams h, Variant v)
{
  switch (v) {
  case Variant::full:
    break;
  case Variant::no_user_flat:
    h.gamma = 0.0;
    break;
  case Variant::no_item_flat:
    h.theta = 0.0;
    break;
  case Variant::no_user_struct:
    h.alpha = 0.0;
    break;
  case Variant::no_item_struct:
    h.beta = 0.0;
    break;
  }
  return h;
}

/// Sets one named hyperparameter from a number.
inline void set_hyper(HyperParams &h, const std::string &name, double v)
{
  if (name == "lambda")
    h.lambda = v;
  else if (name == "alpha")
    h.alpha = v;
  else if (name == "beta")
    h.beta = v;
  else if (name == "gamma")
    h.gamma = v;
  else if (name == "theta")
    h.theta = v;
  else if (name == "corruption_prob")
    h.corruption_prob = v;
  else if (name == "latent_dim")
    h.latent_dim = static_cast<Index>(v);
  else if (name == "max_iters")
    h.max_iters = static_cast<Index>(v);
  else if (name == "tolerance")
    h.tolerance = v;
  else if (name == "initial_step")
    h.initial_step = v;
  else
    throw ConfigError("unknown hyperparameter '" + name + "'");
}

struct ExperimentOptions
{
  std::vector<double> fractions = {0.8};
  Index repeats = 1;
  std::uint64_t seed = 0;
  bool clamp = true;
  int threads = 1;
};

struct ExperimentResult
{
  std::string dataset;
  double split = 0.0;
  std::string variant = "full";
  HyperParams hyper;
  std::vector<double> rmse;
  std::vector<std::uint64_t> partition_hashes;
  std::vector<Index> iterations;
  double mean = 0.0;
  double stddev = 0.0;
  double seconds = 0.0;
};

namespace detail
{

inline std::uint64_t fraction_key(double f)
{
  std::uint64_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  return bits;
}

/// Split seed for (master, fraction, repeat); independent of variant and hyperparameters.
inline std::uint64_t split_seed(std::uint64_t master, double fraction, Index repeat)
{
  return derive_seed(master, fraction_key(fraction), static_cast<std::uint64_t>(repeat), 0x5);
}

inline std::uint64_t init_seed(std::uint64_t master, double fraction, Index repeat)
{
  return derive_seed(master, fraction_key(fraction), static_cast<std::uint64_t>(repeat), 0x1);
}

inline void summarize(ExperimentResult &r)
{
  const double n = static_cast<double>(r.rmse.size());
  double s = 0.0;
  for (double v : r.rmse)
    s += v;
  r.mean = n > 0 ? s / n : 0.0;
  double ss = 0.0;
  for (double v : r.rmse)
    ss += (v - r.mean) * (v - r.mean);
  r.stddev = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

/// Runs jobs on up to `threads` workers; results come back in job order.
template <class T>
std::vector<T> run_jobs(std::vector<std::function<T()>> jobs, int threads)
{
  std::vector<T> out(jobs.size());
  if (threads <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k)
      out[k] = jobs[k]();
    return out;
  }
  std::size_t next = 0;
  while (next < jobs.size()) {
    std::vector<std::future<T>> running;
    const std::size_t end = std::min(jobs.size(), next + static_cast<std::size_t>(threads));
    for (std::size_t k = next; k < end; ++k)
      running.push_back(std::async(std::launch::async, jobs[k]));
    for (std::size_t k = next; k < end; ++k)
      out[k] = running[k - next].get();
    next = end;
  }
  return out;
}

struct RunOutcome
{
  double rmse = 0.0;
  std::uint64_t partition = 0;
  Index iterations = 0;
};

inline RunOutcome train_and_score(const Problem &base, const RatingMatrix &all, const HyperParams &h, double fraction,
                                  Index repeat, std::uint64_t master, bool clamp)
{
  auto [train_set, test_set] = split_ratings(all, SplitSpec{fraction, split_seed(master, fraction, repeat)});
  const Problem p = base.with_ratings(train_set);
  HireModel m = init_model(p, h, init_seed(master, fraction, repeat));
  TrainReport rep;
  try {
    rep = train(m, p, h);
  }
  catch (const TrainError &e) {
    throw TrainError(std::string(e.what()) + " [split " + fmt_double(fraction) + ", repeat " + std::to_string(repeat) +
                     ", seed " + std::to_string(master) + "]");
  }
  return {rmse(m, test_set, clamp), partition_hash(train_set), rep.iterations};
}

} // namespace detail

inline Problem base_problem(const DataBundle &b, const HyperParams &h)
{
  b.validate();
  return Problem::build(b.ratings, b.user_features, b.item_features, b.user_hierarchy, b.item_hierarchy,
                        h.corruption_prob);
}

/// For every split fraction: split, train, score; `repeats` times each.
/// Deterministic in (bundle, options, hyper).
inline std::vector<ExperimentResult> run_experiment(const DataBundle &b, const ExperimentOptions &opt,
                                                    const HyperParams &h, const std::string &variant = "full")
{
  h.validate();
  if (opt.repeats < 1)
    throw ConfigError("repeats must be >= 1");
  const Problem base = base_problem(b, h);
  std::vector<ExperimentResult> results;
  for (double f : opt.fractions) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::function<detail::RunOutcome()>> jobs;
    for (Index r = 0; r < opt.repeats; ++r)
      jobs.push_back([&, f, r] { return detail::train_and_score(base, b.ratings, h, f, r, opt.seed, opt.clamp); });
    const auto outcomes = detail::run_jobs(std::move(jobs), opt.threads);
    ExperimentResult res;
    res.dataset = b.name;
    res.split = f;
    res.variant = variant;
    res.hyper = h;
    for (const auto &o : outcomes) {
      res.rmse.push_back(o.rmse);
      res.partition_hashes.push_back(o.partition);
      res.iterations.push_back(o.iterations);
    }
    detail::summarize(res);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(res));
  }
  return results;
}

/// Full model and the four single-channel ablations under identical splits and seeds.
inline std::vector<ExperimentResult> ablation_suite(const DataBundle &b, const ExperimentOptions &opt,
                                                    const HyperParams &h)
{
  std::vector<ExperimentResult> out;
  for (Variant v : {Variant::full, Variant::no_user_flat, Variant::no_item_flat, Variant::no_user_struct,
                    Variant::no_item_struct}) {
    auto r = run_experiment(b, opt, apply_variant(h, v), variant_name(v));
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

struct SweepPoint
{
  double value = 0.0;
  ExperimentResult result;
};

/// One parameter varied, everything else fixed; uses opt.fractions.front().
inline std::vector<SweepPoint> sensitivity_sweep(const DataBundle &b, const std::string &param,
                                                 const std::vector<double> &values, const HyperParams &h,
                                                 ExperimentOptions opt)
{
  if (values.empty())
    throw ConfigError("sweep needs at least one value");
  if (param != "alpha" && param != "beta" && param != "gamma" && param != "theta")
    throw ConfigError("sweep parameter must be one of alpha, beta, gamma, theta");
  for (double v : values)
    if (!(v >= 0.0))
      throw ConfigError("sweep values must be nonnegative");
  if (opt.fractions.empty())
    throw ConfigError("sweep needs a split fraction");
  opt.fractions.resize(1);
  std::vector<SweepPoint> out;
  for (double v : values) {
    HyperParams hv = h;
    set_hyper(hv, param, v);
    auto r = run_experiment(b, opt, hv, param + "=" + fmt_double(v));
    out.push_back({v, std::move(r.front())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validated grid search

struct GridAxis
{
  std::string param;
  std::vector<double> values;
};

struct GridPoint
{
  std::vector<std::pair<std::string, double>> setting;
  double cv_rmse = 0.0;
};

struct GridSearchResult
{
  std::vector<GridPoint> points;
  HyperParams best;
  double best_cv_rmse = 0.0;
};

/// k-fold cross validation over the ratings of `b` for every point of the grid.
inline GridSearchResult grid_search(const DataBundle &b, const std::vector<GridAxis> &grid, const HyperParams &h,
                                    Index folds, std::uint64_t seed, bool clamp = true, int threads = 1)
{
  if (folds < 2)
    throw ConfigError("grid search needs at least 2 folds");
  std::vector<std::size_t> order(b.ratings.size());
  for (std::size_t k = 0; k < order.size(); ++k)
    order[k] = k;
  Rng rng(derive_seed(seed, 0xcf));
  rng.shuffle(order);

  std::vector<std::vector<std::pair<std::string, double>>> settings{{}};
  for (const auto &axis : grid) {
    if (axis.values.empty())
      throw ConfigError("grid axis '" + axis.param + "' has no values");
    std::vector<std::vector<std::pair<std::string, double>>> next;
    for (const auto &s : settings)
      for (double v : axis.values) {
        auto t = s;
        t.emplace_back(axis.param, v);
        next.push_back(std::move(t));
      }
    settings = std::move(next);
  }

  const Problem base = base_problem(b, h);
  GridSearchResult out;
  out.best_cv_rmse = std::numeric_limits<double>::infinity();
  for (const auto &s : settings) {
    HyperParams hs = h;
    for (const auto &[name, v] : s)
      set_hyper(hs, name, v);
    hs.validate();
    std::vector<std::function<double()>> jobs;
    for (Index f = 0; f < folds; ++f)
      jobs.push_back([&, f, hs] {
        std::vector<Rating> tr, te;
        for (std::size_t k = 0; k < order.size(); ++k)
          (static_cast<Index>(k % static_cast<std::size_t>(folds)) == f ? te : tr).push_back(b.ratings.entries()[order[k]]);
        const RatingMatrix train_set = b.ratings.with_entries(std::move(tr));
        const RatingMatrix test_set = b.ratings.with_entries(std::move(te));
        const Problem p = base.with_ratings(train_set);
        HireModel m = init_model(p, hs, derive_seed(seed, static_cast<std::uint64_t>(f), 0xf0));
        train(m, p, hs);
        return rmse(m, test_set, clamp);
      });
    const auto scores = detail::run_jobs(std::move(jobs), threads);
    double mean = 0.0;
    for (double v : scores)
      mean += v;
    mean /= static_cast<double>(scores.size());
    out.points.push_back({s, mean});
    if (mean < out.best_cv_rmse) {
      out.best_cv_rmse = mean;
      out.best = hs;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradcheckEntry
{
  std::string block;
  double rel_frobenius = 0.0;  // ||g_analytic - g_fd|| / max(||g_fd||, tiny)
  double max_abs_diff = 0.0;
  double fd_norm = 0.0;
  bool passed = true;
};

struct GradcheckReport
{
  std::vector<GradcheckEntry> entries;
  double threshold = 1e-4;
  double fd_step = 1e-5;

  bool all_passed() const
  {
    for (const auto &e : entries)
      if (!e.passed)
        return false;
    return true;
  }

  double max_error() const
  {
    double m = 0.0;
    for (const auto &e : entries)
      m = std::max(m, e.rel_frobenius);
    return m;
  }
};

using GradientFn = std::function<Matrix(const HireModel &, const Problem &, const HyperParams &, const Block &)>;

/// Central differences of objective() against `gradient` for every block.
inline GradcheckReport gradcheck_model(const HireModel &model, const Problem &p, const HyperParams &h, double fd_step,
                                       double threshold = 1e-4, const GradientFn &gradient = block_gradient)
{
  GradcheckReport rep;
  rep.threshold = threshold;
  rep.fd_step = fd_step;
  HireModel work = model;
  for (const Block &b : parameter_blocks(model, h.update_mda_maps)) {
    const Matrix g = gradient(model, p, h, b);
    Matrix &x = block_ref(work, b);
    Matrix fd(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j)
      for (Index i = 0; i < x.rows(); ++i) {
        const double x0 = x(i, j);
        x(i, j) = x0 + fd_step;
        const double fp = objective(work, p, h).total;
        x(i, j) = x0 - fd_step;
        const double fm = objective(work, p, h).total;
        x(i, j) = x0;
        fd(i, j) = (fp - fm) / (2.0 * fd_step);
      }
    GradcheckEntry e;
    e.block = b.name();
    e.fd_norm = fd.norm();
    const double diff = (g - fd).norm();
    e.rel_frobenius = diff / std::max(e.fd_norm, 1e-12);
    e.max_abs_diff = g.size() ? (g - fd).cwiseAbs().maxCoeff() : 0.0;
    e.passed = std::isfinite(e.rel_frobenius) && e.rel_frobenius <= threshold;
    rep.entries.push_back(e);
  }
  return rep;
}

struct GradcheckConfig
{
  Index n_users = 12;
  Index n_items = 15;
  Index latent_dim = 4;
  std::vector<Index> user_layers = {6, 3}; // above the entities: p = 3
  std::vector<Index> item_layers = {7, 3}; // q = 3
  Index user_feature_dim = 5;
  Index item_feature_dim = 4;
  double density = 0.4;
};

/// Random instance (all weights positive unless `h` says otherwise) and its gradient check.
inline GradcheckReport gradcheck(const GradcheckConfig &cfg, HyperParams h, std::uint64_t seed, double fd_step,
                                 double threshold = 1e-4, const GradientFn &gradient = block_gradient)
{
  SynthConfig sc;
  sc.n_users = cfg.n_users;
  sc.n_items = cfg.n_items;
  sc.latent_dim = cfg.latent_dim;
  sc.user_layers = cfg.user_layers;
  sc.item_layers = cfg.item_layers;
  sc.user_feature_dim = cfg.user_feature_dim;
  sc.item_feature_dim = cfg.item_feature_dim;
  sc.density = cfg.density;
  sc.feature_missing = 0.2;
  const SynthDataset data = synth_dataset(sc, seed);
  h.latent_dim = cfg.latent_dim;
  const Problem p = Problem::build(data.train, data.user_features, data.item_features, data.user_hierarchy,
                                   data.item_hierarchy, h.corruption_prob);
  HireModel m = init_model(p, h, derive_seed(seed, 0x9c));
  // move away from the small-scale init so every term carries weight
  Rng rng(derive_seed(seed, 0x9d));
  m.user_projection = rng.gaussian(m.user_projection.rows(), m.user_projection.cols(), 0.5);
  m.item_projection = rng.gaussian(m.item_projection.rows(), m.item_projection.cols(), 0.5);
  return gradcheck_model(m, p, h, fd_step, threshold, gradient);
}

} // namespace hire

#endif // HIRE_EVAL_HPP
