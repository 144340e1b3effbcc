#include "dynssep/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dynssep/errors.hpp"
#include "dynssep/io.hpp"

namespace dynssep {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Strip a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\'))
      in_string = !in_string;
    else if (line[i] == '#' && !in_string)
      return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_dotted(const std::string& key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  for (const auto& p : parts)
    if (p.empty()) throw UsageError("config: empty key segment in '" + key + "'");
  return parts;
}

nlohmann::json parse_value(const std::string& raw);

std::vector<std::string> split_top_level(const std::string& s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  bool in_string = false;
  std::string cur;
  for (char c : s) {
    if (c == '"') in_string = !in_string;
    if (!in_string) {
      if (c == '[' || c == '(') ++depth;
      if (c == ']' || c == ')') --depth;
      if (c == sep && depth == 0) {
        out.push_back(cur);
        cur.clear();
        continue;
      }
    }
    cur += c;
  }
  out.push_back(cur);
  return out;
}

nlohmann::json parse_array(const std::string& raw) {
  const std::string inner = trim(raw.substr(1, raw.size() - 2));
  nlohmann::json arr = nlohmann::json::array();
  if (inner.empty()) return arr;
  for (const auto& piece : split_top_level(inner, ',')) {
    const std::string entry = trim(piece);
    if (entry.empty())
      throw UsageError("config: empty array entry in '" + raw + "'");
    arr.push_back(parse_value(entry));
  }
  return arr;
}

nlohmann::json parse_value(const std::string& raw) {
  const std::string v = trim(raw);
  if (v.empty()) throw UsageError("config: missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw UsageError("config: unterminated string " + v);
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        if (v[i] == 'n') out += '\n';
        else if (v[i] == 't') out += '\t';
        else out += v[i];
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') throw UsageError("config: unterminated array " + v);
    return parse_array(v);
  }
  // Number: integer unless it carries a decimal point or exponent.
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos ||
        v.rfind("0x", 0) == 0) {
      const long long n = std::stoll(v, &used, 0);
      if (used == v.size()) return n;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("config: cannot parse value '" + v + "'");
}

nlohmann::json* descend(nlohmann::json* node,
                        const std::vector<std::string>& path) {
  for (const auto& part : path) {
    if (!node->is_object())
      throw UsageError("config: key '" + part + "' redefines a value");
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  return node;
}

}  // namespace

nlohmann::json parse_toml(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.size() < 3 || s.back() != ']' || s[1] == '[')
        throw UsageError("config line " + std::to_string(lineno) +
                         ": unsupported table header " + s);
      table = descend(&root, split_dotted(s.substr(1, s.size() - 2)));
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    const auto path = split_dotted(s.substr(0, eq));
    nlohmann::json* node = table;
    if (path.size() > 1)
      node = descend(table, {path.begin(), path.end() - 1});
    const std::string& key = path.back();
    if (node->contains(key))
      throw UsageError("config line " + std::to_string(lineno) +
                       ": duplicate key '" + key + "'");
    (*node)[key] = parse_value(s.substr(eq + 1));
  }
  return root;
}

nlohmann::json load_config_file(const std::string& path) {
  const std::string text = read_text(path);
  const bool looks_json =
      path.size() > 5 && path.substr(path.size() - 5) == ".json";
  const std::string lead = trim(text);
  if (looks_json || (!lead.empty() && lead.front() == '{')) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
  }
  return parse_toml(text);
}

std::string canonical_dump(const nlohmann::json& j) {
  // nlohmann objects iterate in key order already; dump(-1) is compact.
  return j.dump();
}

const nlohmann::json& require_field(const nlohmann::json& j,
                                    const std::string& name) {
  if (!j.is_object() || !j.contains(name))
    throw UsageError("config: missing field '" + name + "'");
  return j.at(name);
}

double require_number(const nlohmann::json& j, const std::string& name) {
  const auto& v = require_field(j, name);
  if (!v.is_number())
    throw UsageError("config: field '" + name + "' must be a number");
  return v.get<double>();
}

double require_positive(const nlohmann::json& j, const std::string& name) {
  const double v = require_number(j, name);
  if (!(v > 0.0))
    throw UsageError("config: field '" + name + "' must be > 0");
  return v;
}

int64_t require_integer(const nlohmann::json& j, const std::string& name) {
  const auto& v = require_field(j, name);
  if (!v.is_number_integer())
    throw UsageError("config: field '" + name + "' must be an integer");
  return v.get<int64_t>();
}

std::string require_string(const nlohmann::json& j, const std::string& name) {
  const auto& v = require_field(j, name);
  if (!v.is_string())
    throw UsageError("config: field '" + name + "' must be a string");
  return v.get<std::string>();
}

double number_or(const nlohmann::json& j, const std::string& name,
                 double fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return require_number(j, name);
}

int64_t integer_or(const nlohmann::json& j, const std::string& name,
                   int64_t fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return require_integer(j, name);
}

std::string string_or(const nlohmann::json& j, const std::string& name,
                      const std::string& fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return require_string(j, name);
}

bool bool_or(const nlohmann::json& j, const std::string& name, bool fallback) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  const auto& v = j.at(name);
  if (!v.is_boolean())
    throw UsageError("config: field '" + name + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> number_list(const nlohmann::json& j,
                                const std::string& name) {
  const auto& v = require_field(j, name);
  if (!v.is_array())
    throw UsageError("config: field '" + name + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number())
      throw UsageError("config: field '" + name + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> integer_list(const nlohmann::json& j,
                              const std::string& name) {
  const auto& v = require_field(j, name);
  if (!v.is_array())
    throw UsageError("config: field '" + name + "' must be an array");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer())
      throw UsageError("config: field '" + name + "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

namespace {

std::array<int, 3> parse_mode_vector(const std::string& args, int dim,
                                     const std::string& spec) {
  std::array<int, 3> k{0, 0, 0};
  const auto parts = split_top_level(args, ',');
  if (parts.empty() || static_cast<int>(parts.size()) > dim)
    throw UsageError("function '" + spec + "': mode needs 1.." +
                     std::to_string(dim) + " components");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    try {
      std::size_t used = 0;
      k[i] = std::stoi(trim(parts[i]), &used);
      if (used != trim(parts[i]).size()) throw std::invalid_argument("trail");
    } catch (const std::exception&) {
      throw UsageError("function '" + spec + "': bad mode component '" +
                       trim(parts[i]) + "'");
    }
  }
  return k;
}

TestFunction parse_atom(const std::string& atom, int dim,
                        const std::string& spec) {
  if (atom == "const" || atom == "1") return TestFunction::constant(dim, 1.0);
  const std::size_t open = atom.find('(');
  if (open == std::string::npos || atom.back() != ')')
    throw UsageError("function '" + spec + "': unknown term '" + atom + "'");
  const std::string head = trim(atom.substr(0, open));
  const std::string args = atom.substr(open + 1, atom.size() - open - 2);
  if (head == "cos" || head == "sin") {
    const auto k = parse_mode_vector(args, dim, spec);
    return TestFunction::harmonic(dim, k, head == "cos" ? 1.0 : 0.0,
                                  head == "sin" ? 1.0 : 0.0);
  }
  if (head == "gauss") {
    const auto halves = split_top_level(args, ';');
    if (halves.size() != 2)
      throw UsageError("function '" + spec +
                       "': gauss needs (center...; width)");
    std::array<double, 3> center{0, 0, 0};
    const auto cs = split_top_level(halves[0], ',');
    if (static_cast<int>(cs.size()) > dim)
      throw UsageError("function '" + spec + "': too many center components");
    double width = 0.0;
    try {
      for (std::size_t i = 0; i < cs.size(); ++i)
        center[i] = std::stod(trim(cs[i]));
      width = std::stod(trim(halves[1]));
    } catch (const std::exception&) {
      throw UsageError("function '" + spec + "': bad gauss argument");
    }
    if (!(width > 0.0))
      throw UsageError("function '" + spec + "': gauss width must be > 0");
    return wrapped_gaussian(dim, center, width, 6);
  }
  throw UsageError("function '" + spec + "': unknown term '" + atom + "'");
}

}  // namespace

TestFunction parse_test_function(const std::string& spec, int dim) {
  if (dim < 1 || dim > 3) throw UsageError("function dim must be 1..3");
  // Normalize: strip whitespace, split on top-level +/− into signed terms.
  std::string s;
  for (char c : spec)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw UsageError("empty function spec");
  TestFunction f(dim);
  std::size_t i = 0;
  bool any = false;
  while (i < s.size()) {
    double sign = 1.0;
    while (i < s.size() && (s[i] == '+' || s[i] == '-')) {
      if (s[i] == '-') sign = -sign;
      ++i;
    }
    std::size_t j = i;
    int depth = 0;
    while (j < s.size()) {
      if (s[j] == '(') ++depth;
      if (s[j] == ')') --depth;
      if (depth == 0 && (s[j] == '+' || s[j] == '-')) {
        // A sign inside an exponent (1e-3) is part of the number.
        if (j > i && (s[j - 1] == 'e' || s[j - 1] == 'E') &&
            std::isdigit(static_cast<unsigned char>(s[i])))
          ;
        else
          break;
      }
      ++j;
    }
    const std::string term = s.substr(i, j - i);
    i = j;
    if (term.empty()) throw UsageError("function '" + spec + "': empty term");
    double coef = sign;
    std::string atom = term;
    const std::size_t star = term.find('*');
    if (star != std::string::npos) {
      try {
        coef = sign * std::stod(term.substr(0, star));
      } catch (const std::exception&) {
        throw UsageError("function '" + spec + "': bad coefficient in '" +
                         term + "'");
      }
      atom = term.substr(star + 1);
    } else if (!term.empty() &&
               (std::isdigit(static_cast<unsigned char>(term[0])) ||
                term[0] == '.')) {
      // Bare number → constant term.
      try {
        coef = sign * std::stod(term);
        atom = "const";
      } catch (const std::exception&) {
        throw UsageError("function '" + spec + "': bad number '" + term + "'");
      }
    }
    f += coef * parse_atom(atom, dim, spec);
    any = true;
  }
  if (!any) throw UsageError("function '" + spec + "' has no terms");
  return f;
}

void parse_dictionary(const nlohmann::json& cfg, int dim,
                      std::vector<TestFunction>* dictionary,
                      std::vector<std::string>* names) {
  dictionary->clear();
  names->clear();
  const auto& v = require_field(cfg, "dictionary");
  if (v.is_string()) {
    if (v.get<std::string>() != "default")
      throw UsageError("config: dictionary must be \"default\" or a list");
    *dictionary = default_dictionary(dim);
    for (std::size_t i = 0; i < dictionary->size(); ++i)
      names->push_back("dict" + std::to_string(i));
    return;
  }
  if (!v.is_array() || v.empty())
    throw UsageError("config: dictionary must be a non-empty list");
  for (const auto& e : v) {
    if (!e.is_string())
      throw UsageError("config: dictionary entries must be strings");
    dictionary->push_back(parse_test_function(e.get<std::string>(), dim));
    names->push_back(e.get<std::string>());
  }
}

EnvironmentSpec environment_from_config(const nlohmann::json& block) {
  if (!block.is_object())
    throw UsageError("config: missing [environment] table");
  EnvironmentSpec spec;
  spec.kind = environment_kind_from_name(require_string(block, "kind"));
  if (block.contains("levels")) {
    spec.levels = number_list(block, "levels");
  } else if (block.contains("level")) {
    spec.levels = {require_positive(block, "level")};
  }
  spec.flip_rate = number_or(block, "flip_rate", 0.0);
  spec.period = number_or(block, "period", 1.0);
  spec.alpha = number_or(block, "alpha", 0.0);
  spec.horizon = number_or(block, "horizon", 1.0);
  spec.seed = static_cast<uint64_t>(integer_or(block, "seed", 0));
  spec.validate();
  return spec;
}

Eigen::MatrixXd matrix_from_config(const nlohmann::json& value, int dim,
                                   const std::string& name) {
  if (!value.is_array() || static_cast<int>(value.size()) != dim)
    throw UsageError("config: '" + name + "' must be a " +
                     std::to_string(dim) + "x" + std::to_string(dim) +
                     " nested array");
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const auto& row = value.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw UsageError("config: '" + name + "' row " + std::to_string(i) +
                       " has wrong width");
    for (int j = 0; j < dim; ++j) {
      if (!row.at(j).is_number())
        throw UsageError("config: '" + name + "' must hold numbers");
      m(i, j) = row.at(j).get<double>();
    }
  }
  validate_sigma(m, dim);
  return m;
}

namespace {

void walk_invariants(const nlohmann::json& node, const std::string& path) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string sub = path.empty() ? it.key() : path + "." + it.key();
      const std::string& key = it.key();
      const bool tol_key =
          key.size() >= 3 && (key.substr(key.size() - 3) == "tol" ||
                              (key.size() >= 9 &&
                               key.substr(key.size() - 9) == "tolerance"));
      if (tol_key) {
        if (!it.value().is_number() || !(it.value().get<double>() > 0.0))
          throw UsageError("config: '" + sub + "' must be a positive number");
      }
      if (key == "N") {
        if (it.value().is_number_integer()) {
          if (it.value().get<int64_t>() < 4)
            throw UsageError("config: '" + sub + "' must be >= 4");
        } else if (it.value().is_array()) {
          for (const auto& e : it.value())
            if (!e.is_number_integer() || e.get<int64_t>() < 4)
              throw UsageError("config: every entry of '" + sub +
                               "' must be an integer >= 4");
        }
      }
      walk_invariants(it.value(), sub);
    }
  } else if (node.is_array()) {
    for (const auto& e : node) walk_invariants(e, path);
  }
}

}  // namespace

void validate_experiment_config(const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw UsageError("config: top level must be a table");
  if (!cfg.contains("seed"))
    throw UsageError(
        "config: missing field 'seed' (set it in the file or pass --seed)");
  if (!cfg.at("seed").is_number_integer() || cfg.at("seed").get<int64_t>() < 0)
    throw UsageError("config: 'seed' must be a non-negative integer");
  walk_invariants(cfg, "");
}

}  // namespace dynssep
