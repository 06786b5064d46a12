#ifndef HIRE_MDA_HPP
#define HIRE_MDA_HPP

#include "hire/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <fstream>

namespace hire
{

/// Linear denoising map d -> d, with the settings it was fitted under.
struct MdaMap
{
  Matrix matrix;
  double corruption_prob = 0.0;
  double ridge = 0.0;

  Index dim() const { return matrix.rows(); }

  static MdaMap identity(Index dim)
  {
    return MdaMap{Matrix::Identity(dim, dim), 0.0, 0.0};
  }
};

/// k independently corrupted copies of one feature matrix.
struct CorruptionBatch
{
  std::vector<Matrix> copies;

  Index k() const { return static_cast<Index>(copies.size()); }
};

/// Zeroes every entry independently with probability `prob`.
inline Matrix corrupt(const Matrix &x, double prob, std::uint64_t seed)
{
  if (!(prob >= 0.0 && prob < 1.0))
    throw ConfigError("corruption probability must lie in [0, 1), got " + fmt_double(prob));
  Matrix out = x;
  if (prob == 0.0)
    return out;
  Rng rng(seed);
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      if (rng.uniform() < prob)
        out(i, j) = 0.0;
  return out;
}

inline CorruptionBatch make_batch(const Matrix &x, double prob, Index k, std::uint64_t seed)
{
  if (k < 1)
    throw ConfigError("corruption count k must be >= 1");
  CorruptionBatch b;
  b.copies.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j)
    b.copies.push_back(corrupt(x, prob, derive_seed(seed, static_cast<std::uint64_t>(j))));
  return b;
}

/// (1 / 2nk) * ||[X..X] - W [X~_1..X~_k]||_F^2
inline double reconstruction_loss(const MdaMap &w, const Matrix &x, const CorruptionBatch &batch)
{
  require_shape(w.matrix, x.rows(), x.rows(), "MDA map");
  if (batch.k() == 0)
    throw ShapeError("empty corruption batch");
  double sum = 0.0;
  for (const Matrix &c : batch.copies) {
    require_shape(c, x.rows(), x.cols(), "corrupted copy");
    sum += (x - w.matrix * c).squaredNorm();
  }
  const double n = static_cast<double>(x.cols());
  return n == 0.0 ? 0.0 : sum / (2.0 * n * static_cast<double>(batch.k()));
}

/// Batch loss plus the ridge penalty that solve_batch minimizes exactly,
/// both on the 1/(2nk) scale.
inline double regularized_batch_loss(const MdaMap &w, const Matrix &x, const CorruptionBatch &batch, double ridge)
{
  const double nk = 2.0 * static_cast<double>(x.cols()) * static_cast<double>(batch.k());
  return reconstruction_loss(w, x, batch) + (nk == 0.0 ? 0.0 : ridge * w.matrix.squaredNorm() / nk);
}

namespace detail
{

// W = K (J + ridge I)^-1 for symmetric J.
inline Matrix solve_map(const Matrix &k, const Matrix &j, double ridge)
{
  if (ridge < 0.0)
    throw ConfigError("MDA ridge must be nonnegative");
  const Index d = j.rows();
  Matrix a = j;
  a.diagonal().array() += ridge;
  Eigen::FullPivLU<Matrix> lu(a);
  if (d > 0 && lu.rank() < d)
    throw DataError("MDA system is singular (rank " + std::to_string(lu.rank()) + " of " + std::to_string(d) +
                    "); use ridge > 0");
  // W A = K  <=>  A^T W^T = K^T, and A is symmetric
  Matrix w = lu.solve(k.transpose()).transpose();
  if (!w.allFinite())
    throw DataError("MDA solve produced non-finite values; use a larger ridge");
  return w;
}

} // namespace detail

/// Exact minimizer for a given batch: W = (X̄ X̃ᵀ)(X̃ X̃ᵀ + ridge I)⁻¹.
inline Matrix solve_batch(const Matrix &x, const CorruptionBatch &batch, double ridge)
{
  const Index d = x.rows();
  Matrix k = Matrix::Zero(d, d), j = Matrix::Zero(d, d);
  for (const Matrix &c : batch.copies) {
    require_shape(c, x.rows(), x.cols(), "corrupted copy");
    k.noalias() += x * c.transpose();
    j.noalias() += c * c.transpose();
  }
  return detail::solve_map(k, j, ridge);
}

/// Finite-k estimate. K and J are sums over the k copies, so `ridge` acts on
/// the k-times-scaled system (the regularizer of regularized_batch_loss).
inline MdaMap solve_finite_k(const Matrix &x, double prob, Index k, double ridge, std::uint64_t seed)
{
  const CorruptionBatch batch = make_batch(x, prob, k, seed);
  return MdaMap{solve_batch(x, batch, ridge), prob, ridge};
}

/// Expectations of K/k and J/k over the corruption process, as k -> infinity.
struct MarginalStats
{
  Matrix expected_k; // E[x x̃ᵀ] summed over entities
  Matrix expected_j; // E[x̃ x̃ᵀ] summed over entities
  double scatter_trace = 0.0;
  Index count = 0;
};

inline MarginalStats marginal_stats(const Matrix &x, double prob)
{
  if (!(prob >= 0.0 && prob < 1.0))
    throw ConfigError("corruption probability must lie in [0, 1), got " + fmt_double(prob));
  const double keep = 1.0 - prob;
  const Matrix s = x * x.transpose();
  MarginalStats m;
  m.expected_k = keep * s;
  m.expected_j = (keep * keep) * s;
  m.expected_j.diagonal() = keep * s.diagonal();
  m.scatter_trace = s.trace();
  m.count = x.cols();
  return m;
}

/// Default ridge: 1e-6 * trace(E[J]) / d, floored so all-zero features stay solvable.
inline double default_mda_ridge(const Matrix &x, double prob)
{
  const Index d = x.rows();
  if (d == 0)
    return 0.0;
  const double tr = (1.0 - prob) * x.squaredNorm();
  return std::max(1e-6 * tr / static_cast<double>(d), 1e-12);
}

/// Marginalized closed form W = E[K] (E[J] + ridge I)⁻¹. No sampling.
inline MdaMap solve_marginalized(const Matrix &x, double prob, double ridge)
{
  const MarginalStats m = marginal_stats(x, prob);
  return MdaMap{detail::solve_map(m.expected_k, m.expected_j, ridge), prob, ridge};
}

/// lim_{k->inf} of reconstruction_loss: E ||x - W x̃||² / 2n, in closed form.
inline double expected_reconstruction_loss(const Matrix &w, const MarginalStats &m)
{
  if (m.count == 0)
    return 0.0;
  const double e = m.scatter_trace - 2.0 * (w.cwiseProduct(m.expected_k)).sum() +
                   (w * m.expected_j).cwiseProduct(w).sum();
  return e / (2.0 * static_cast<double>(m.count));
}

/// Gradient of expected_reconstruction_loss with respect to W.
inline Matrix expected_reconstruction_grad(const Matrix &w, const MarginalStats &m)
{
  if (m.count == 0)
    return Matrix::Zero(w.rows(), w.cols());
  return (w * m.expected_j - m.expected_k) / static_cast<double>(m.count);
}

/// W X
inline Matrix robust_features(const MdaMap &w, const Matrix &x)
{
  if (w.dim() != x.rows() || w.matrix.cols() != x.rows())
    throw ShapeError("MDA map is " + shape_str(w.matrix) + " but features have dim " + std::to_string(x.rows()));
  return w.matrix * x;
}

inline void save_mda(const std::string &path, const MdaMap &w)
{
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  os << "# hire mda map\n"
     << "dim=" << w.dim() << '\n'
     << "corruption_prob=" << fmt_double(w.corruption_prob) << '\n'
     << "ridge=" << fmt_double(w.ridge) << '\n';
  write_matrix(os, w.matrix);
}

inline MdaMap load_mda(const std::string &path)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot read " + path);
  std::string line;
  MdaMap w;
  Index dim = -1;
  while (is.peek() == '#' || std::isalpha(is.peek())) {
    std::getline(is, line);
    if (line.rfind("dim=", 0) == 0)
      dim = static_cast<Index>(parse_double(line.substr(4), path));
    else if (line.rfind("corruption_prob=", 0) == 0)
      w.corruption_prob = parse_double(line.substr(16), path);
    else if (line.rfind("ridge=", 0) == 0)
      w.ridge = parse_double(line.substr(6), path);
  }
  w.matrix = read_matrix(is, path);
  if (dim < 0 || w.matrix.rows() != dim || w.matrix.cols() != dim)
    throw DataError(path + ": MDA header dim disagrees with matrix");
  return w;
}

} // namespace hire

#endif // HIRE_MDA_HPP
