// hire_cli: prepare / synth datasets, train, evaluate, ablate, sweep, gradcheck.
//
// Every command reads one key = value config file; --set key=value and the
// global flags override single keys. Results go to <out>/<config hash>/.

#include "hire/hire.hpp"

#include <CLI11.hpp>

#include <ctime>
#include <iostream>
#include <set>

using namespace hire;

namespace
{

enum Exit
{
  ok = 0,
  internal = 1,
  config_error = 2,
  data_error = 3,
  train_error = 4,
  verify_failed = 5
};

const std::set<std::string> &known_keys()
{
  static const std::set<std::string> keys = {
      // dataset
      "name", "bundle", "ratings", "ratings_delimiter", "ratings_header", "rating_columns", "rating_min", "rating_max",
      "user_features", "user_features_delimiter", "user_id_column", "user_attributes", "user_features_ignore_unknown",
      "item_features", "item_features_delimiter", "item_id_column", "item_attributes", "item_features_ignore_unknown",
      "user_hierarchy", "item_hierarchy",
      // run
      "seed", "out", "threads", "clamp_predictions", "split", "repeats", "sweep_param", "sweep_values",
      // hyperparameters
      "latent_dim", "lambda", "alpha", "beta", "gamma", "theta", "corruption_prob", "mda_ridge", "initial_step",
      "step_growth", "backtrack", "armijo", "max_backtracks", "max_iters", "tolerance", "update_mda_maps",
      // gradcheck
      "gradcheck_users", "gradcheck_items", "gradcheck_latent_dim", "gradcheck_user_layers", "gradcheck_item_layers",
      "gradcheck_step", "gradcheck_threshold", "gradcheck_seeds",
      // synthetic generator
      "synth_users", "synth_items", "synth_latent_dim", "synth_user_layers", "synth_item_layers", "synth_density",
      "synth_activity_skew", "synth_noise", "synth_hier_signal", "synth_flat_signal", "synth_flat_noise",
      "synth_feature_missing", "synth_user_feature_dim", "synth_item_feature_dim"};
  return keys;
}

// keys that change where or how fast a run happens, not what it computes
const std::set<std::string> &unhashed_keys()
{
  static const std::set<std::string> keys = {"out", "threads"};
  return keys;
}

struct Run
{
  KeyValues cfg;
  std::string command;

  std::string hash() const
  {
    KeyValues h;
    for (const auto &[k, v] : cfg.items())
      if (!unhashed_keys().count(k))
        h.set(k, v);
    return hex64(fnv1a(command + "\n" + h.to_string()));
  }

  std::string dir() const { return cfg.get_or("out", "runs") + "/" + hash(); }
  std::uint64_t seed() const { return cfg.get_u64_or("seed", 0); }
  int threads() const { return static_cast<int>(cfg.get_int_or("threads", 1)); }
  bool clamp() const { return cfg.get_bool_or("clamp_predictions", true); }

  std::string path(const std::string &key) const
  {
    const std::string p = cfg.get(key);
    if (!std::filesystem::exists(p))
      throw DataError(key + ": " + p + " does not exist");
    return p;
  }

  std::vector<double> splits() const
  {
    const auto s = cfg.get_list_or("split", {0.8});
    if (s.empty())
      throw ConfigError("split: need at least one fraction");
    for (double f : s)
      if (!(f > 0.0 && f < 1.0))
        throw ConfigError("split: fraction " + fmt_double(f) + " outside (0, 1)");
    return s;
  }

  HyperParams hyper() const { return hyper_from_kv(cfg); }

  ExperimentOptions options() const
  {
    ExperimentOptions o;
    o.fractions = splits();
    o.repeats = static_cast<Index>(cfg.get_int_or("repeats", 1));
    o.seed = seed();
    o.clamp = clamp();
    o.threads = threads();
    if (o.repeats < 1)
      throw ConfigError("repeats must be >= 1");
    if (o.threads < 1)
      throw ConfigError("threads must be >= 1");
    return o;
  }

  std::string bundle_dir() const
  {
    if (!cfg.has("bundle"))
      throw ConfigError("config has no 'bundle' directory");
    return cfg.get("bundle");
  }

  void write_manifest(const std::string &dir) const
  {
    ensure_dir(dir);
    KeyValues m = cfg;
    m.set("command", command);
    m.set("config_hash", hash());
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m.set("created", std::string(buf));
    m.save(dir + "/manifest.txt");
  }
};

std::vector<Index> index_list(const KeyValues &kv, const std::string &key, std::vector<Index> fallback)
{
  if (!kv.has(key))
    return fallback;
  std::vector<Index> out;
  for (double v : kv.get_list_or(key, {})) {
    if (v < 1 || v != std::floor(v))
      throw ConfigError(key + ": layer sizes must be positive integers");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

char delimiter(const KeyValues &kv, const std::string &key, char fallback)
{
  if (!kv.has(key))
    return fallback;
  const std::string d = kv.get(key);
  if (d == "tab" || d == "\\t")
    return '\t';
  if (d == "comma")
    return ',';
  if (d == "space")
    return ' ';
  if (d == "pipe")
    return '|';
  if (d.size() == 1)
    return d[0];
  throw ConfigError(key + ": unknown delimiter '" + d + "'");
}

// "gender:categorical, age:numeric, year:numeric:1900:2000"
std::vector<AttributeEncoder> attributes(const KeyValues &kv, const std::string &key)
{
  std::vector<AttributeEncoder> out;
  if (!kv.has(key))
    return out;
  for (const auto &spec : split_fields(kv.get(key), ',')) {
    if (spec.empty())
      continue;
    const auto parts = split_fields(spec, ':');
    if (parts.size() < 2)
      throw ConfigError(key + ": attribute '" + spec + "' needs a kind (name:categorical or name:numeric)");
    if (parts[1] == "categorical" && parts.size() == 2)
      out.push_back(AttributeEncoder::categorical(parts[0]));
    else if (parts[1] == "numeric" && parts.size() == 2)
      out.push_back(AttributeEncoder::numeric(parts[0]));
    else if (parts[1] == "numeric" && parts.size() == 4)
      out.push_back(AttributeEncoder::numeric(parts[0], parse_double(parts[2], key), parse_double(parts[3], key)));
    else
      throw ConfigError(key + ": cannot parse attribute '" + spec + "'");
  }
  return out;
}

FlatFeatures side_features(const Run &r, const std::string &side, const IdIndex &ids)
{
  const KeyValues &c = r.cfg;
  if (!c.has(side + "_features"))
    return FlatFeatures::none(ids.size());
  FeatureFileSchema s;
  s.delimiter = delimiter(c, side + "_features_delimiter", ',');
  s.id_column = c.get_or(side + "_id_column", "id");
  s.attributes = attributes(c, side + "_attributes");
  s.ignore_unknown_ids = c.get_bool_or(side + "_features_ignore_unknown", false);
  if (s.attributes.empty())
    throw ConfigError(side + "_attributes: list the attributes to encode");
  return load_flat_features(r.path(side + "_features"), s, ids);
}

Hierarchy side_hierarchy(const Run &r, const std::string &side, const IdIndex &ids)
{
  if (!r.cfg.has(side + "_hierarchy"))
    return Hierarchy::flat(ids.size());
  return load_hierarchy(r.path(side + "_hierarchy"), &ids);
}

void print_report(const KeyValues &kv) { std::cout << kv.to_string(); }

// ---------------------------------------------------------------------------

int cmd_prepare(const Run &r)
{
  const KeyValues &c = r.cfg;
  RatingSchema schema;
  schema.delimiter = delimiter(c, "ratings_delimiter", ',');
  schema.has_header = c.get_bool_or("ratings_header", true);
  const auto cols = c.get_list_or("rating_columns", {0, 1, 2});
  if (cols.size() != 3)
    throw ConfigError("rating_columns: need user,item,rating column indices");
  schema.user_column = static_cast<int>(cols[0]);
  schema.item_column = static_cast<int>(cols[1]);
  schema.rating_column = static_cast<int>(cols[2]);
  schema.r_min = c.get_double_or("rating_min", 1.0);
  schema.r_max = c.get_double_or("rating_max", 5.0);

  DataBundle b;
  b.name = c.get_or("name", "dataset");
  b.ratings = load_ratings(r.path("ratings"), schema);
  b.user_features = side_features(r, "user", b.ratings.users());
  b.item_features = side_features(r, "item", b.ratings.items());
  b.user_hierarchy = side_hierarchy(r, "user", b.ratings.users());
  b.item_hierarchy = side_hierarchy(r, "item", b.ratings.items());
  const std::string dir = r.bundle_dir();
  write_bundle(dir, b);
  std::cout << "bundle written to " << dir << "\n";
  print_report(validation_report(b));
  return ok;
}

int cmd_synth(const Run &r)
{
  const KeyValues &c = r.cfg;
  SynthConfig s;
  s.n_users = static_cast<Index>(c.get_int_or("synth_users", s.n_users));
  s.n_items = static_cast<Index>(c.get_int_or("synth_items", s.n_items));
  s.latent_dim = static_cast<Index>(c.get_int_or("synth_latent_dim", s.latent_dim));
  s.user_layers = index_list(c, "synth_user_layers", s.user_layers);
  s.item_layers = index_list(c, "synth_item_layers", s.item_layers);
  s.density = c.get_double_or("synth_density", s.density);
  s.activity_skew = c.get_double_or("synth_activity_skew", s.activity_skew);
  s.noise = c.get_double_or("synth_noise", s.noise);
  s.hier_signal = c.get_double_or("synth_hier_signal", s.hier_signal);
  s.flat_signal = c.get_double_or("synth_flat_signal", s.flat_signal);
  s.flat_noise = c.get_double_or("synth_flat_noise", s.flat_noise);
  s.feature_missing = c.get_double_or("synth_feature_missing", s.feature_missing);
  s.user_feature_dim = static_cast<Index>(c.get_int_or("synth_user_feature_dim", s.user_feature_dim));
  s.item_feature_dim = static_cast<Index>(c.get_int_or("synth_item_feature_dim", s.item_feature_dim));
  const auto data = synth_dataset(s, r.seed());
  const DataBundle b = DataBundle::from_synth(data, c.get_or("name", "synthetic"));
  const std::string dir = r.bundle_dir();
  write_bundle(dir, b);
  std::cout << "bundle written to " << dir << "\n";
  print_report(validation_report(b));
  return ok;
}

// The split and initialization used by train/evaluate: first split fraction, repeat 0.
std::pair<RatingMatrix, RatingMatrix> run_split(const Run &r, const DataBundle &b)
{
  const double f = r.splits().front();
  return split_ratings(b.ratings, SplitSpec{f, derive_seed(r.seed(), 0x7a)});
}

int cmd_train(const Run &r)
{
  const HyperParams h = r.hyper();
  const DataBundle b = read_bundle(r.bundle_dir());
  auto [train_set, test_set] = run_split(r, b);
  const Problem p = base_problem(b, h).with_ratings(train_set);
  HireModel m = init_model(p, h, derive_seed(r.seed(), 0x1d));
  const TrainReport rep = train(m, p, h);

  const std::string dir = r.dir();
  r.write_manifest(dir);
  save_model(dir + "/model", m, h, r.seed(), rep.iterations);
  write_train_history(dir + "/history.csv", rep);
  CsvWriter w(dir + "/metrics.csv");
  w.header({"split", "iterations", "converged", "train_rmse", "test_rmse"});
  const double test = rmse(m, test_set, r.clamp());
  w.row({fmt_double(r.splits().front()), std::to_string(rep.iterations), rep.converged ? "1" : "0",
         fmt_double(rmse(m, train_set, r.clamp())), fmt_double(test)});
  std::cout << "trained " << rep.iterations << " iterations, test RMSE " << fmt_double(test) << "\n" << dir << "\n";
  return ok;
}

int cmd_evaluate(const Run &r, const std::string &model_dir)
{
  const DataBundle b = read_bundle(r.bundle_dir());
  Run trained = r;
  trained.command = "train";
  const std::string src = model_dir.empty() ? trained.dir() + "/model" : model_dir;
  const LoadedModel lm = load_model(src);
  auto [train_set, test_set] = run_split(r, b);
  const Problem p = base_problem(b, lm.hyper).with_ratings(train_set);
  detail::check_model(lm.model, p);
  const std::string dir = r.dir();
  ensure_dir(dir);
  CsvWriter w(dir + "/evaluate.csv");
  w.header({"split", "clamped", "test_ratings", "test_rmse"});
  const double e = rmse(lm.model, test_set, r.clamp());
  w.row({fmt_double(r.splits().front()), r.clamp() ? "1" : "0", std::to_string(test_set.size()), fmt_double(e)});
  std::cout << "test RMSE " << fmt_double(e) << "\n";
  return ok;
}

void write_results(const std::string &path, const std::vector<ExperimentResult> &res, const std::string &first_col,
                   const std::function<std::string(const ExperimentResult &)> &label)
{
  CsvWriter w(path);
  w.header({first_col, "split", "repeat", "partition_hash", "iterations", "rmse"});
  for (const auto &x : res)
    for (std::size_t k = 0; k < x.rmse.size(); ++k)
      w.row({label(x), fmt_double(x.split), std::to_string(k), hex64(x.partition_hashes[k]),
             std::to_string(x.iterations[k]), fmt_double(x.rmse[k])});
}

int cmd_ablate(const Run &r)
{
  const HyperParams h = r.hyper();
  const DataBundle b = read_bundle(r.bundle_dir());
  const auto res = ablation_suite(b, r.options(), h);
  const std::string dir = r.dir();
  r.write_manifest(dir);
  write_results(dir + "/ablation.csv", res, "variant", [](const ExperimentResult &x) { return x.variant; });
  CsvWriter w(dir + "/ablation_summary.csv");
  w.header({"variant", "split", "repeats", "mean_rmse", "std_rmse"});
  for (const auto &x : res) {
    w.row({x.variant, fmt_double(x.split), std::to_string(x.rmse.size()), fmt_double(x.mean), fmt_double(x.stddev)});
    std::cout << x.variant << " split " << fmt_double(x.split) << " RMSE " << fmt_double(x.mean) << " +- "
              << fmt_double(x.stddev) << "\n";
  }
  std::cout << dir << "\n";
  return ok;
}

int cmd_sweep(const Run &r)
{
  const HyperParams h = r.hyper();
  const std::string param = r.cfg.get_or("sweep_param", "");
  const auto values = r.cfg.get_list_or("sweep_values", {});
  if (param.empty() || values.empty())
    throw ConfigError("sweep needs sweep_param and sweep_values");
  const DataBundle b = read_bundle(r.bundle_dir());
  const auto pts = sensitivity_sweep(b, param, values, h, r.options());
  const std::string dir = r.dir();
  r.write_manifest(dir);
  CsvWriter w(dir + "/sweep.csv");
  w.header({"param", "value", "split", "repeats", "mean_rmse", "std_rmse"});
  std::vector<ExperimentResult> all;
  for (const auto &pt : pts) {
    w.row({param, fmt_double(pt.value), fmt_double(pt.result.split), std::to_string(pt.result.rmse.size()),
           fmt_double(pt.result.mean), fmt_double(pt.result.stddev)});
    std::cout << param << " = " << fmt_double(pt.value) << " RMSE " << fmt_double(pt.result.mean) << "\n";
    all.push_back(pt.result);
  }
  write_results(dir + "/sweep_runs.csv", all, "value",
                [&](const ExperimentResult &x) { return x.variant.substr(param.size() + 1); });
  std::cout << dir << "\n";
  return ok;
}

int cmd_gradcheck(const Run &r)
{
  const KeyValues &c = r.cfg;
  GradcheckConfig g;
  g.n_users = static_cast<Index>(c.get_int_or("gradcheck_users", g.n_users));
  g.n_items = static_cast<Index>(c.get_int_or("gradcheck_items", g.n_items));
  g.latent_dim = static_cast<Index>(c.get_int_or("gradcheck_latent_dim", g.latent_dim));
  g.user_layers = index_list(c, "gradcheck_user_layers", g.user_layers);
  g.item_layers = index_list(c, "gradcheck_item_layers", g.item_layers);
  const double step = c.get_double_or("gradcheck_step", 1e-5);
  const double threshold = c.get_double_or("gradcheck_threshold", 1e-4);
  const auto seeds = c.get_int_or("gradcheck_seeds", 5);
  HyperParams h;
  h.lambda = c.get_double_or("lambda", 0.3);
  h.alpha = c.get_double_or("alpha", 0.7);
  h.beta = c.get_double_or("beta", 0.5);
  h.gamma = c.get_double_or("gamma", 0.4);
  h.theta = c.get_double_or("theta", 0.6);
  h.corruption_prob = c.get_double_or("corruption_prob", h.corruption_prob);

  const std::string dir = r.dir();
  r.write_manifest(dir);
  CsvWriter w(dir + "/gradcheck.csv");
  w.header({"seed", "block", "rel_frobenius", "max_abs_diff", "fd_norm", "passed"});
  bool all = true;
  for (long long s = 0; s < seeds; ++s) {
    const std::uint64_t seed = r.seed() + static_cast<std::uint64_t>(s);
    const auto rep = gradcheck(g, h, seed, step, threshold);
    for (const auto &e : rep.entries) {
      w.row({std::to_string(seed), e.block, fmt_double(e.rel_frobenius), fmt_double(e.max_abs_diff),
             fmt_double(e.fd_norm), e.passed ? "1" : "0"});
      std::cout << "seed " << seed << " " << e.block << " rel " << fmt_double(e.rel_frobenius)
                << (e.passed ? "" : "  FAILED") << "\n";
    }
    all = all && rep.all_passed();
  }
  if (!all)
    throw VerificationError("gradient check above threshold " + fmt_double(threshold) + "; see " + dir +
                            "/gradcheck.csv");
  std::cout << "all blocks below " << fmt_double(threshold) << "\n";
  return ok;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"hierarchical + flat side information recommender"};
  app.require_subcommand(1);
  std::string config_path, out, model_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<bool> clamp;
  std::vector<std::string> sets;
  app.add_option("--config,-c", config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output root (default runs)");
  app.add_option("--threads", threads, "worker threads for ablate / sweep");
  app.add_option("--clamp-predictions", clamp, "clamp predictions to the rating range (true/false)");
  app.add_option("--set", sets, "override one config key: key=value")->allow_extra_args(false);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"prepare", "raw files -> canonical bundle"},
      {"synth", "planted synthetic bundle"},
      {"train", "train on the first split, save model and history"},
      {"evaluate", "test RMSE of a saved model"},
      {"ablate", "full model and the four single-channel ablations"},
      {"sweep", "vary one side-information weight"},
      {"gradcheck", "finite-difference gradient check"}};
  for (const auto &[name, help] : commands) {
    auto *sc = app.add_subcommand(name, help);
    sc->fallthrough();
    if (name == "evaluate")
      sc->add_option("--model", model_dir, "model directory (default: this config's train output)");
  }
  try {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    Run r;
    r.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty())
      r.cfg = KeyValues::load(config_path);
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + s + "'");
      r.cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (seed)
      r.cfg.set("seed", static_cast<unsigned long long>(*seed));
    if (!out.empty())
      r.cfg.set("out", out);
    if (threads)
      r.cfg.set("threads", static_cast<long long>(*threads));
    if (clamp)
      r.cfg.set("clamp_predictions", *clamp);
    for (const auto &[k, v] : r.cfg.items())
      if (!known_keys().count(k))
        throw ConfigError("unknown config key '" + k + "'");

    if (r.command == "prepare")
      return cmd_prepare(r);
    if (r.command == "synth")
      return cmd_synth(r);
    if (r.command == "train")
      return cmd_train(r);
    if (r.command == "evaluate")
      return cmd_evaluate(r, model_dir);
    if (r.command == "ablate")
      return cmd_ablate(r);
    if (r.command == "sweep")
      return cmd_sweep(r);
    if (r.command == "gradcheck")
      return cmd_gradcheck(r);
  }
  catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  }
  catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data_error;
  }
  catch (const ShapeError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data_error;
  }
  catch (const TrainError &e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return train_error;
  }
  catch (const VerificationError &e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return verify_failed;
  }
  catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return internal;
  }
  return internal;
}
