#ifndef HIRE_COMMON_HPP
#define HIRE_COMMON_HPP

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hire
{

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. The CLI maps each family onto its own exit code.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

class DataError : public Error
{
public:
  using Error::Error;
};

class ShapeError : public Error
{
public:
  using Error::Error;
};

class TrainError : public Error
{
public:
  using Error::Error;
};

class VerificationError : public Error
{
public:
  using Error::Error;
};

inline std::string shape_str(const Matrix &m)
{
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const Matrix &m, Index rows, Index cols, std::string_view what)
{
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + shape_str(m));
}

/// splitmix64 finalizer; used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
{
  return mix_seed(mix_seed(mix_seed(master ^ mix_seed(a)) ^ mix_seed(b + 0x51)) ^ mix_seed(c + 0xa7));
}

/// Seeded generator with a portable output sequence.
///
/// The standard library distributions are implementation-defined, so
/// uniform/normal/bounded draws are derived here from the raw mt19937_64
/// stream, which the standard does pin down. Results are therefore
/// bit-identical across toolchains for the same seed.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Uniform integer in [0, bound), unbiased (Lemire rejection).
  std::uint64_t below(std::uint64_t bound)
  {
    if (bound == 0)
      return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold)
        return r % bound;
    }
  }

  template <class T>
  void shuffle(std::vector<T> &v)
  {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  Matrix gaussian(Index rows, Index cols, double stddev)
  {
    Matrix m(rows, cols);
    // column-major fill order is part of the determinism contract
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i)
        m(i, j) = stddev * normal();
    return m;
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
{
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Shortest text form that reads back to the identical double.
inline std::string fmt_double(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  const std::string full = os.str();
  for (int prec = 1; prec < 17; ++prec) {
    std::ostringstream shorter;
    shorter << std::setprecision(prec) << v;
    if (std::strtod(shorter.str().c_str(), nullptr) == v)
      return shorter.str();
  }
  return full;
}

inline std::string trim(std::string_view s)
{
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
    ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
    --e;
  return std::string(s.substr(b, e - b));
}

inline double parse_double(std::string_view s, std::string_view what)
{
  const std::string str = trim(s);
  char *end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size())
    throw DataError(std::string(what) + ": not a number: '" + str + "'");
  return v;
}

inline std::vector<std::string> split_fields(std::string_view line, char delim)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  if (delim == ' ') {
    // whitespace-delimited: collapse runs
    std::istringstream is{std::string(line)};
    std::string tok;
    while (is >> tok)
      out.push_back(tok);
    return out;
  }
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

/// Dense matrix text file: a `rows cols` line followed by one row per line.
inline void write_matrix(std::ostream &os, const Matrix &m)
{
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j)
        os << ' ';
      os << fmt_double(m(i, j));
    }
    os << '\n';
  }
}

inline Matrix read_matrix(std::istream &is, std::string_view what)
{
  Index rows = -1, cols = -1;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0)
    throw DataError(std::string(what) + ": bad matrix header");
  Matrix m(rows, cols);
  std::string tok;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      if (!(is >> tok))
        throw DataError(std::string(what) + ": truncated matrix");
      m(i, j) = parse_double(tok, what);
    }
  return m;
}

inline void save_matrix(const std::string &path, const Matrix &m)
{
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path);
  write_matrix(os, m);
}

inline Matrix load_matrix(const std::string &path)
{
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot read " + path);
  return read_matrix(is, path);
}

} // namespace hire

#endif // HIRE_COMMON_HPP
