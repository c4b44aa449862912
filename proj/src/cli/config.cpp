#include "mixres/cli/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace mixres::cli {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

json parse_scalar(const std::string& raw, int line_no) {
  std::string v = trim(raw);
  if (v.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    }
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  bool integral = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char c = v[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      integral = false;
      break;
    }
  }
  try {
    if (integral) return std::stoll(v);
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad value '" + v + "'");
  }
}

json parse_value(const std::string& raw, int line_no) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": arrays must close on the same line");
    }
    json arr = json::array();
    std::string body = v.substr(1, v.size() - 2);
    std::string item;
    bool in_string = false;
    for (char c : body) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
    return arr;
  }
  return parse_scalar(v, line_no);
}

}  // namespace

json parse_toml(const std::string& text) {
  json root = json::object();
  json* current = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": bad table header");
      }
      std::string name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": empty table name");
      }
      root[name] = json::object();
      current = &root[name];
      continue;
    }
    std::size_t eq = std::string::npos;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_string = !in_string;
      if (s[i] == '=' && !in_string) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(s.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    (*current)[key] = parse_value(s.substr(eq + 1), line_no);
  }
  return root;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string ext = path.extension().string();
  if (ext == ".json") {
    try {
      return json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("json parse error in " + path.string() + ": " + e.what());
    }
  }
  if (ext == ".toml") return parse_toml(buffer.str());
  throw ConfigError("config must be .toml or .json: " + path.string());
}

void check_known_keys(const json& obj, const std::set<std::string>& allowed,
                      const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
    }
  }
}

namespace {

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

}  // namespace

double get_double(const json& obj, const std::string& key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError("'" + key + "' must be a number");
  return v->get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return v->get<int>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError("'" + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<int> get_int_list(const json& obj, const std::string& key,
                              const std::vector<int>& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_array()) throw ConfigError("'" + key + "' must be an array");
  std::vector<int> out;
  for (const auto& item : *v) {
    if (!item.is_number_integer()) {
      throw ConfigError("'" + key + "' must hold integers");
    }
    out.push_back(item.get<int>());
  }
  return out;
}

std::vector<std::uint64_t> get_u64_list(const json& obj, const std::string& key,
                                        const std::vector<std::uint64_t>& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_array()) throw ConfigError("'" + key + "' must be an array");
  std::vector<std::uint64_t> out;
  for (const auto& item : *v) {
    if (!item.is_number_integer()) {
      throw ConfigError("'" + key + "' must hold integers");
    }
    out.push_back(item.get<std::uint64_t>());
  }
  return out;
}

std::vector<double> get_double_list(const json& obj, const std::string& key,
                                    const std::vector<double>& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_array()) throw ConfigError("'" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& item : *v) {
    if (!item.is_number()) throw ConfigError("'" + key + "' must hold numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

}  // namespace mixres::cli
