#ifndef HIRE_PERSIST_HPP
#define HIRE_PERSIST_HPP

#include "hire/io.hpp"
#include "hire/model.hpp"

namespace hire
{

inline KeyValues hyper_to_kv(const HyperParams &h)
{
  KeyValues kv;
  kv.set("latent_dim", static_cast<long long>(h.latent_dim));
  kv.set("lambda", h.lambda);
  kv.set("alpha", h.alpha);
  kv.set("beta", h.beta);
  kv.set("gamma", h.gamma);
  kv.set("theta", h.theta);
  kv.set("corruption_prob", h.corruption_prob);
  if (h.mda_ridge)
    kv.set("mda_ridge", *h.mda_ridge);
  kv.set("initial_step", h.initial_step);
  kv.set("step_growth", h.step_growth);
  kv.set("backtrack", h.backtrack);
  kv.set("armijo", h.armijo);
  kv.set("max_backtracks", static_cast<long long>(h.max_backtracks));
  kv.set("max_iters", static_cast<long long>(h.max_iters));
  kv.set("tolerance", h.tolerance);
  kv.set("update_mda_maps", h.update_mda_maps);
  return kv;
}

/// Reads the hyperparameter keys present in `kv`; others keep `base` values.
inline HyperParams hyper_from_kv(const KeyValues &kv, HyperParams base = {})
{
  HyperParams h = base;
  h.latent_dim = static_cast<Index>(kv.get_int_or("latent_dim", h.latent_dim));
  h.lambda = kv.get_double_or("lambda", h.lambda);
  h.alpha = kv.get_double_or("alpha", h.alpha);
  h.beta = kv.get_double_or("beta", h.beta);
  h.gamma = kv.get_double_or("gamma", h.gamma);
  h.theta = kv.get_double_or("theta", h.theta);
  h.corruption_prob = kv.get_double_or("corruption_prob", h.corruption_prob);
  if (kv.has("mda_ridge"))
    h.mda_ridge = kv.get_double("mda_ridge");
  h.initial_step = kv.get_double_or("initial_step", h.initial_step);
  h.step_growth = kv.get_double_or("step_growth", h.step_growth);
  h.backtrack = kv.get_double_or("backtrack", h.backtrack);
  h.armijo = kv.get_double_or("armijo", h.armijo);
  h.max_backtracks = static_cast<int>(kv.get_int_or("max_backtracks", h.max_backtracks));
  h.max_iters = static_cast<Index>(kv.get_int_or("max_iters", h.max_iters));
  h.tolerance = kv.get_double_or("tolerance", h.tolerance);
  h.update_mda_maps = kv.get_bool_or("update_mda_maps", h.update_mda_maps);
  h.validate();
  return h;
}

/// Directory of matrix files plus manifest.txt.
inline void save_model(const std::string &dir, const HireModel &m, const HyperParams &h, std::uint64_t seed,
                       Index iterations)
{
  ensure_dir(dir);
  KeyValues man = hyper_to_kv(h);
  man.set("seed", static_cast<unsigned long long>(seed));
  man.set("iterations", static_cast<long long>(iterations));
  man.set("user_depth", static_cast<long long>(m.user_depth()));
  man.set("item_depth", static_cast<long long>(m.item_depth()));
  man.save(dir + "/manifest.txt");
  for (Index k = 0; k < m.user_depth(); ++k)
    save_matrix(dir + "/U" + std::to_string(k + 1) + ".txt", m.user_factors[std::size_t(k)]);
  for (Index k = 0; k < m.item_depth(); ++k)
    save_matrix(dir + "/V" + std::to_string(k + 1) + ".txt", m.item_factors[std::size_t(k)]);
  save_matrix(dir + "/Su.txt", m.user_projection);
  save_matrix(dir + "/Sv.txt", m.item_projection);
  save_mda(dir + "/Wu.txt", m.user_map);
  save_mda(dir + "/Wv.txt", m.item_map);
}

struct LoadedModel
{
  HireModel model;
  HyperParams hyper;
  std::uint64_t seed = 0;
  Index iterations = 0;
};

inline LoadedModel load_model(const std::string &dir)
{
  if (!std::filesystem::is_directory(dir))
    throw DataError("model directory " + dir + " does not exist");
  const KeyValues man = KeyValues::load(dir + "/manifest.txt");
  LoadedModel out;
  out.hyper = hyper_from_kv(man);
  out.seed = man.get_u64_or("seed", 0);
  out.iterations = static_cast<Index>(man.get_int_or("iterations", 0));
  const auto p = man.get_int_or("user_depth", 0), q = man.get_int_or("item_depth", 0);
  if (p < 1 || q < 1)
    throw DataError(dir + "/manifest.txt: user_depth and item_depth must be >= 1");
  HireModel &m = out.model;
  for (long long k = 1; k <= p; ++k)
    m.user_factors.push_back(load_matrix(dir + "/U" + std::to_string(k) + ".txt"));
  for (long long k = 1; k <= q; ++k)
    m.item_factors.push_back(load_matrix(dir + "/V" + std::to_string(k) + ".txt"));
  m.user_projection = load_matrix(dir + "/Su.txt");
  m.item_projection = load_matrix(dir + "/Sv.txt");
  m.user_map = load_mda(dir + "/Wu.txt");
  m.item_map = load_mda(dir + "/Wv.txt");
  m.latent_dim = m.user_factors.back().cols();
  if (m.latent_dim != out.hyper.latent_dim || m.item_factors.back().rows() != m.latent_dim)
    throw ShapeError(dir + ": factor chains disagree with latent_dim " + std::to_string(out.hyper.latent_dim));
  for (std::size_t k = 0; k + 1 < m.user_factors.size(); ++k)
    if (m.user_factors[k].cols() != m.user_factors[k + 1].rows())
      throw ShapeError(dir + ": U" + std::to_string(k + 1) + " " + shape_str(m.user_factors[k]) + " does not chain with U" +
                       std::to_string(k + 2) + " " + shape_str(m.user_factors[k + 1]));
  for (std::size_t k = 0; k + 1 < m.item_factors.size(); ++k)
    if (m.item_factors[k + 1].cols() != m.item_factors[k].rows())
      throw ShapeError(dir + ": V" + std::to_string(k + 2) + " " + shape_str(m.item_factors[k + 1]) +
                       " does not chain with V" + std::to_string(k + 1) + " " + shape_str(m.item_factors[k]));
  return out;
}

/// One row per iteration: objective terms and training RMSE. No timing columns,
/// so reruns are byte-identical.
inline void write_train_history(const std::string &path, const TrainReport &r)
{
  CsvWriter w(path);
  std::vector<std::string> head{"iteration"};
  for (const auto &n : ObjectiveBreakdown::names())
    head.push_back(n);
  head.push_back("train_rmse");
  w.header(head);
  for (const auto &rec : r.history) {
    std::vector<std::string> row{std::to_string(rec.iteration)};
    for (double v : rec.objective.values())
      row.push_back(fmt_double(v));
    row.push_back(fmt_double(rec.train_rmse));
    w.row(row);
  }
}

} // namespace hire

#endif // HIRE_PERSIST_HPP
