#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptflow::cli {

/// Configuration problem tied to a specific key. The CLI maps this to exit
/// code 2; the message always names the offending key.
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_, const std::string& what_)
      : std::runtime_error(key_ + ": " + what_), key(std::move(key_)) {}
};

/// Flat key-value configuration with dotted section keys:
///
///   # comment
///   flow.name = ptgf
///   flow.k    = 0.1
///   init.x0   = [-2, 3]
///   objective.A = [[1, 0], [0, 4]]
///   init.sweep  = [[-10, -10], [5, -5]]
///
/// Values are read through typed accessors that record which keys were
/// consumed; check_all_consumed() then reports the first key nobody asked
/// for — catching typos and keys that do not apply to the chosen mode.
class KeyValues {
 public:
  [[nodiscard]] static KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  [[nodiscard]] static KeyValues parse_string(const std::string& text,
                                              const std::string& origin = "<string>") {
    KeyValues kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno), "expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno), "empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  /// Applies one "key=value" override (the CLI's --set flag).
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set", "override must look like key=value, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    if (key.empty()) throw ConfigError("--set", "override has an empty key");
    values_[key] = value;
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

  [[nodiscard]] std::string get_string(const std::string& key) {
    touch(key);
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "missing required key");
    return it->second;
  }

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) {
    touch(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  [[nodiscard]] double get_double(const std::string& key) { return to_double(key, get_string(key)); }

  [[nodiscard]] double get_double(const std::string& key, double fallback) {
    touch(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  [[nodiscard]] long long get_int(const std::string& key, long long fallback) {
    touch(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double d = to_double(key, it->second);
    const auto v = static_cast<long long>(d);
    if (static_cast<double>(v) != d) throw ConfigError(key, "expected an integer, got '" + it->second + "'");
    return v;
  }

  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) {
    touch(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(key, "expected true/false, got '" + it->second + "'");
  }

  [[nodiscard]] Eigen::VectorXd get_vector(const std::string& key) {
    const Node n = parse_node(key, get_string(key));
    return node_to_vector(key, n);
  }

  [[nodiscard]] Eigen::MatrixXd get_matrix(const std::string& key) {
    const Node n = parse_node(key, get_string(key));
    if (n.leaf || n.children.empty() || n.children.front().leaf)
      throw ConfigError(key, "expected a matrix like [[1, 0], [0, 4]]");
    const auto rows = static_cast<Eigen::Index>(n.children.size());
    const auto cols = static_cast<Eigen::Index>(n.children.front().children.size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Node& row = n.children[static_cast<size_t>(i)];
      if (row.leaf || static_cast<Eigen::Index>(row.children.size()) != cols)
        throw ConfigError(key, "matrix rows must have equal length");
      for (Eigen::Index j = 0; j < cols; ++j) {
        const Node& cell = row.children[static_cast<size_t>(j)];
        if (!cell.leaf) throw ConfigError(key, "matrix entries must be numbers");
        M(i, j) = cell.value;
      }
    }
    return M;
  }

  /// List of vectors: [[-10,-10], [5,-5]] (parentheses work too).
  [[nodiscard]] std::vector<Eigen::VectorXd> get_vector_list(const std::string& key) {
    const Node n = parse_node(key, get_string(key));
    if (n.leaf) throw ConfigError(key, "expected a list like [[-10,-10], [5,-5]]");
    std::vector<Eigen::VectorXd> out;
    out.reserve(n.children.size());
    for (const Node& child : n.children) out.push_back(node_to_vector(key, child));
    return out;
  }

  /// Throws for the first stored key that no accessor ever consumed.
  void check_all_consumed() const {
    for (const auto& [key, value] : values_)
      if (consumed_.count(key) == 0)
        throw ConfigError(key, "unknown or inapplicable key");
  }

 private:
  struct Node {
    bool leaf = true;
    double value = 0.0;
    std::vector<Node> children;
  };

  static std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || end != t.c_str() + t.size())
      throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
  }

  void touch(const std::string& key) { consumed_.insert(key); }

  static Node node_from(const std::string& key, const std::string& text, size_t& pos) {
    const auto skip_ws = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    skip_ws();
    if (pos >= text.size()) throw ConfigError(key, "unexpected end of list literal");
    const char open = text[pos];
    if (open == '[' || open == '(') {
      const char close = open == '[' ? ']' : ')';
      ++pos;
      Node n;
      n.leaf = false;
      skip_ws();
      if (pos < text.size() && text[pos] == close) {
        ++pos;
        return n;  // empty list
      }
      while (true) {
        n.children.push_back(node_from(key, text, pos));
        skip_ws();
        if (pos >= text.size()) throw ConfigError(key, "unterminated list literal");
        if (text[pos] == ',') {
          ++pos;
          continue;
        }
        if (text[pos] == close) {
          ++pos;
          return n;
        }
        throw ConfigError(key, std::string("expected ',' or '") + close + "' in list literal");
      }
    }
    // number
    const size_t start = pos;
    while (pos < text.size() && std::string("]),").find(text[pos]) == std::string::npos) ++pos;
    Node n;
    n.value = to_double(key, text.substr(start, pos - start));
    return n;
  }

  static Node parse_node(const std::string& key, const std::string& text) {
    size_t pos = 0;
    Node n = node_from(key, text, pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size()) throw ConfigError(key, "trailing characters in list literal");
    return n;
  }

  static Eigen::VectorXd node_to_vector(const std::string& key, const Node& n) {
    if (n.leaf) {
      Eigen::VectorXd v(1);
      v[0] = n.value;
      return v;
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n.children.size()));
    for (size_t i = 0; i < n.children.size(); ++i) {
      if (!n.children[i].leaf) throw ConfigError(key, "expected a flat vector of numbers");
      v[static_cast<Eigen::Index>(i)] = n.children[i].value;
    }
    return v;
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

}  // namespace ptflow::cli
