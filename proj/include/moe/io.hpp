#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moe/model.hpp"
#include "moe/polysys.hpp"

namespace moe {

/// Malformed input or configuration. The command line maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-tripping form is not required; 17 significant digits always are.
std::string format_double(double v);
std::string format_vector(const Eigen::Ref<const Eigen::VectorXd>& v);

double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);
Eigen::VectorXd parse_vector(const std::string& text, const std::string& what);

/// Flat `key=value` text. Blank lines and lines starting with '#' are ignored.
/// The first meaningful line must be `format=1`; keys may not repeat.
class KeyValueDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  KeyValueDocument() = default;
  static KeyValueDocument parse(const std::string& text, const std::string& source);
  static KeyValueDocument read_file(const std::string& path);

  /// Adds or replaces a key (command-line overrides).
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws ConfigError when missing
  std::optional<std::string> find(const std::string& key) const;

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  Eigen::VectorXd get_vector(const std::string& key) const;

  /// Throws ConfigError naming the first key that is neither in `allowed`
  /// nor starts with one of `allowed_prefixes`.
  void reject_unknown(const std::set<std::string>& allowed,
                      const std::vector<std::string>& allowed_prefixes = {}) const;

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::string where(const Entry& e) const;

  std::vector<Entry> entries_;
  std::string source_;
};

/// Measure documents:
///   format=1, dim=d, k=k, then c<i>.beta0, c<i>.beta1, c<i>.a, c<i>.b, c<i>.sigma
/// for i = 1..k, with vectors written as comma-separated values.
MixingMeasure measure_from_document(const KeyValueDocument& doc);
std::string measure_to_string(const MixingMeasure& g);
MixingMeasure read_measure(const std::string& path);
void write_measure(const std::string& path, const MixingMeasure& g);

/// Solution documents:
///   format=1, m=m, d=d, p1.<j>, p2.<j> (d-vectors), p3, p4, p5 (m-vectors).
polysys::CandidateSolution solution_from_document(const KeyValueDocument& doc);
std::string solution_to_string(const polysys::CandidateSolution& sol);
polysys::CandidateSolution read_solution(const std::string& path);

/// Dataset CSV: a `# format=1` line, a header `x1,...,xd,y`, then one row per point.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, const std::string& source);
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace moe
