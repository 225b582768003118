#include "moe/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace moe {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string component_key(std::size_t i, const char* field) {
  return "c" + std::to_string(i + 1) + "." + field;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  if (!std::isfinite(v)) throw ConfigError(what + ": value must be finite, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& what) {
  if (trim(text).empty()) return Eigen::VectorXd(0);
  const auto parts = split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], what);
  }
  return v;
}

KeyValueDocument KeyValueDocument::parse(const std::string& text, const std::string& source) {
  KeyValueDocument doc;
  doc.source_ = source;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool saw_format = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    const std::string at = source + ":" + std::to_string(line);
    if (eq == std::string::npos) throw ConfigError(at + ": expected key=value, got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(at + ": empty key");
    if (!saw_format) {
      if (key != "format") throw ConfigError(at + ": first line must be format=1");
      if (value != "1") throw ConfigError(at + ": unsupported format '" + value + "'");
      saw_format = true;
      continue;
    }
    if (doc.has(key)) throw ConfigError(at + ": duplicate key '" + key + "'");
    doc.entries_.push_back({std::move(key), std::move(value), line});
  }
  if (!saw_format) throw ConfigError(source + ": missing format=1 line");
  return doc;
}

KeyValueDocument KeyValueDocument::read_file(const std::string& path) {
  return parse(read_text_file(path), path);
}

void KeyValueDocument::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = value;
      e.line = 0;
      return;
    }
  }
  entries_.push_back({key, value, 0});
}

bool KeyValueDocument::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> KeyValueDocument::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e.value;
  }
  return std::nullopt;
}

const std::string& KeyValueDocument::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e.value;
  }
  throw ConfigError(source_ + ": missing key '" + key + "'");
}

std::string KeyValueDocument::where(const Entry& e) const {
  if (e.line == 0) return "override '" + e.key + "'";
  return source_ + ":" + std::to_string(e.line) + ": key '" + e.key + "'";
}

double KeyValueDocument::get_double(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return parse_double(e.value, where(e));
  }
  return parse_double(get(key), key);
}

double KeyValueDocument::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::uint64_t KeyValueDocument::get_uint(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return parse_uint(e.value, where(e));
  }
  return parse_uint(get(key), key);
}

std::uint64_t KeyValueDocument::get_uint(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_uint(key) : fallback;
}

Eigen::VectorXd KeyValueDocument::get_vector(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return parse_vector(e.value, where(e));
  }
  return parse_vector(get(key), key);
}

void KeyValueDocument::reject_unknown(const std::set<std::string>& allowed,
                                      const std::vector<std::string>& allowed_prefixes) const {
  for (const auto& e : entries_) {
    if (allowed.count(e.key)) continue;
    const bool prefixed = std::any_of(allowed_prefixes.begin(), allowed_prefixes.end(),
                                      [&](const std::string& p) { return e.key.rfind(p, 0) == 0; });
    if (!prefixed) throw ConfigError(where(e) + ": unknown key");
  }
}

MixingMeasure measure_from_document(const KeyValueDocument& doc) {
  const std::size_t dim = doc.get_uint("dim");
  const std::size_t k = doc.get_uint("k");
  if (k == 0) throw ConfigError(doc.source() + ": k must be positive");
  std::set<std::string> allowed{"dim", "k"};
  std::vector<ExpertComponent> comps(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (const char* f : {"beta0", "beta1", "a", "b", "sigma"}) allowed.insert(component_key(i, f));
    auto& c = comps[i];
    c.beta0 = doc.get_double(component_key(i, "beta0"));
    c.beta1 = doc.get_vector(component_key(i, "beta1"));
    c.a = doc.get_vector(component_key(i, "a"));
    c.b = doc.get_double(component_key(i, "b"));
    c.sigma = doc.get_double(component_key(i, "sigma"));
    if (c.beta1.size() != static_cast<Eigen::Index>(dim) ||
        c.a.size() != static_cast<Eigen::Index>(dim)) {
      throw ConfigError(doc.source() + ": component " + std::to_string(i + 1) +
                        " has vectors of the wrong length for dim=" + std::to_string(dim));
    }
  }
  doc.reject_unknown(allowed);
  try {
    return MixingMeasure(std::move(comps));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(doc.source() + ": " + e.what());
  }
}

std::string measure_to_string(const MixingMeasure& g) {
  std::ostringstream out;
  out << "format=1\n";
  out << "dim=" << g.dim() << "\n";
  out << "k=" << g.size() << "\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g[i];
    out << component_key(i, "beta0") << "=" << format_double(c.beta0) << "\n";
    out << component_key(i, "beta1") << "=" << format_vector(c.beta1) << "\n";
    out << component_key(i, "a") << "=" << format_vector(c.a) << "\n";
    out << component_key(i, "b") << "=" << format_double(c.b) << "\n";
    out << component_key(i, "sigma") << "=" << format_double(c.sigma) << "\n";
  }
  return out.str();
}

MixingMeasure read_measure(const std::string& path) {
  return measure_from_document(KeyValueDocument::read_file(path));
}

void write_measure(const std::string& path, const MixingMeasure& g) {
  write_text_file(path, measure_to_string(g));
}

polysys::CandidateSolution solution_from_document(const KeyValueDocument& doc) {
  const std::size_t m = doc.get_uint("m");
  const std::size_t d = doc.get_uint("d");
  if (m == 0 || d == 0) throw ConfigError(doc.source() + ": m and d must be positive");
  std::set<std::string> allowed{"m", "d", "p3", "p4", "p5"};
  auto sol = polysys::CandidateSolution::zeros(m, d);
  auto expect = [&](const Eigen::VectorXd& v, std::size_t n, const std::string& key) {
    if (static_cast<std::size_t>(v.size()) != n) {
      throw ConfigError(doc.source() + ": key '" + key + "' needs " + std::to_string(n) +
                        " values, got " + std::to_string(v.size()));
    }
    return v;
  };
  for (std::size_t j = 0; j < m; ++j) {
    const std::string k1 = "p1." + std::to_string(j + 1);
    const std::string k2 = "p2." + std::to_string(j + 1);
    allowed.insert(k1);
    allowed.insert(k2);
    sol.p1[j] = expect(doc.get_vector(k1), d, k1);
    sol.p2[j] = expect(doc.get_vector(k2), d, k2);
  }
  sol.p3 = expect(doc.get_vector("p3"), m, "p3");
  sol.p4 = expect(doc.get_vector("p4"), m, "p4");
  sol.p5 = expect(doc.get_vector("p5"), m, "p5");
  doc.reject_unknown(allowed);
  return sol;
}

std::string solution_to_string(const polysys::CandidateSolution& sol) {
  std::ostringstream out;
  out << "format=1\n";
  out << "m=" << sol.m() << "\n";
  out << "d=" << sol.d() << "\n";
  for (std::size_t j = 0; j < sol.m(); ++j) {
    out << "p1." << j + 1 << "=" << format_vector(sol.p1[j]) << "\n";
    out << "p2." << j + 1 << "=" << format_vector(sol.p2[j]) << "\n";
  }
  out << "p3=" << format_vector(sol.p3) << "\n";
  out << "p4=" << format_vector(sol.p4) << "\n";
  out << "p5=" << format_vector(sol.p5) << "\n";
  return out.str();
}

polysys::CandidateSolution read_solution(const std::string& path) {
  return solution_from_document(KeyValueDocument::read_file(path));
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "# format=1\n";
  for (std::size_t u = 0; u < data.dim(); ++u) out << "x" << u + 1 << ",";
  out << "y\n";
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    for (Eigen::Index u = 0; u < data.x.cols(); ++u) out << format_double(data.x(i, u)) << ",";
    out << format_double(data.y[i]) << "\n";
  }
}

Dataset read_dataset_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(line);
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next() || line != "# format=1") {
    throw ConfigError(source + ":" + std::to_string(lineno) + ": first line must be '# format=1'");
  }
  if (!next()) throw ConfigError(source + ": missing header");
  const auto header = split(line, ',');
  const std::size_t d = header.size() - 1;
  for (std::size_t u = 0; u < d; ++u) {
    if (header[u] != "x" + std::to_string(u + 1)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": header column " +
                        std::to_string(u + 1) + " must be x" + std::to_string(u + 1));
    }
  }
  if (header.empty() || header.back() != "y") {
    throw ConfigError(source + ":" + std::to_string(lineno) + ": last header column must be y");
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (next()) {
    const auto cells = split(line, ',');
    const std::string at = source + ":" + std::to_string(lineno);
    if (cells.size() != d + 1) {
      throw ConfigError(at + ": expected " + std::to_string(d + 1) + " columns, got " +
                        std::to_string(cells.size()));
    }
    for (const auto& c : cells) values.push_back(parse_double(c, at));
    ++rows;
  }
  Dataset data;
  data.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  data.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t u = 0; u < d; ++u) data.x(ii, static_cast<Eigen::Index>(u)) = values[i * (d + 1) + u];
    data.y[ii] = values[i * (d + 1) + d];
  }
  return data;
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_dataset_csv(out, data);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_dataset_csv(in, path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("failed writing " + path);
}

}  // namespace moe
