#ifndef HIRE_IO_HPP
#define HIRE_IO_HPP

#include "hire/common.hpp"

#include <filesystem>
#include <map>

namespace hire
{

/// Plain `key = value` text, one pair per line; `#` starts a comment.
/// Keys are kept sorted so the serialized form is canonical.
class KeyValues
{
public:
  void set(const std::string &key, const std::string &value) { values_[key] = value; }
  void set(const std::string &key, double value) { values_[key] = fmt_double(value); }
  void set(const std::string &key, long long value) { values_[key] = std::to_string(value); }
  void set(const std::string &key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string &key, long value) { values_[key] = std::to_string(value); }
  void set(const std::string &key, unsigned long value) { values_[key] = std::to_string(value); }
  void set(const std::string &key, unsigned long long value) { values_[key] = std::to_string(value); }
  void set(const std::string &key, bool value) { values_[key] = value ? "true" : "false"; }
  void set(const std::string &key, const char *value) { values_[key] = value; }

  bool has(const std::string &key) const { return values_.count(key) != 0; }
  void erase(const std::string &key) { values_.erase(key); }

  const std::string &get(const std::string &key) const
  {
    auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError("missing key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string &key, const std::string &fallback) const
  {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string &key) const
  {
    try {
      return parse_double(get(key), key);
    }
    catch (const DataError &e) {
      throw ConfigError(e.what());
    }
  }

  double get_double_or(const std::string &key, double fallback) const
  {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int_or(const std::string &key, long long fallback) const
  {
    if (!has(key))
      return fallback;
    const double v = get_double(key);
    if (v != std::floor(v))
      throw ConfigError("key '" + key + "' must be an integer");
    return static_cast<long long>(v);
  }

  std::uint64_t get_u64_or(const std::string &key, std::uint64_t fallback) const
  {
    if (!has(key))
      return fallback;
    const std::string &s = get(key);
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != s.size())
        throw std::invalid_argument(s);
      return v;
    }
    catch (const std::exception &) {
      throw ConfigError("key '" + key + "' must be an unsigned integer, got '" + s + "'");
    }
  }

  bool get_bool_or(const std::string &key, bool fallback) const
  {
    if (!has(key))
      return fallback;
    const std::string &v = get(key);
    if (v == "true" || v == "1" || v == "yes")
      return true;
    if (v == "false" || v == "0" || v == "no")
      return false;
    throw ConfigError("key '" + key + "' must be a boolean, got '" + v + "'");
  }

  std::vector<double> get_list_or(const std::string &key, std::vector<double> fallback) const
  {
    if (!has(key))
      return fallback;
    std::vector<double> out;
    for (const auto &f : split_fields(get(key), ','))
      if (!f.empty())
        out.push_back(parse_double(f, key));
    return out;
  }

  const std::map<std::string, std::string> &items() const { return values_; }

  std::string to_string() const
  {
    std::string s;
    for (const auto &[k, v] : values_)
      s += k + " = " + v + "\n";
    return s;
  }

  static KeyValues parse(const std::string &text, const std::string &origin)
  {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos)
        line.erase(hash);
      line = trim(line);
      if (line.empty())
        continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      kv.values_[key] = trim(line.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues load(const std::string &path)
  {
    std::ifstream is(path);
    if (!is)
      throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path);
  }

  void save(const std::string &path) const
  {
    std::ofstream os(path);
    if (!os)
      throw DataError("cannot write " + path);
    os << to_string();
  }

private:
  std::map<std::string, std::string> values_;
};

/// Writes comma-separated rows; numbers use the shortest round-trip form.
class CsvWriter
{
public:
  explicit CsvWriter(const std::string &path) : os_(path)
  {
    if (!os_)
      throw DataError("cannot write " + path);
  }

  void header(const std::vector<std::string> &cols) { row(cols); }

  void row(const std::vector<std::string> &cells)
  {
    for (std::size_t i = 0; i < cells.size(); ++i)
      os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

private:
  std::ofstream os_;
};

inline void ensure_dir(const std::string &path)
{
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw DataError("cannot create directory " + path + ": " + ec.message());
}

} // namespace hire

#endif // HIRE_IO_HPP
