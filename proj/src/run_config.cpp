#include "ookb/run_config.hpp"

#include <charconv>
#include <sstream>

#include "ookb/errors.hpp"
#include "ookb/triplet_io.hpp"

namespace ookb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig(std::vector<ConfigKey> schema) : schema_(std::move(schema)) {
  for (const auto& k : schema_) values_[k.name] = k.default_value;
}

void RunConfig::require_known(const std::string& key, const std::string& source) const {
  if (values_.count(key) == 0) throw ConfigError(source + ": unknown configuration key '" + key + "'");
}

void RunConfig::merge_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path);
  }
  merge_text(text, path);
}

void RunConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    const auto key = trim(t.substr(0, eq));
    require_known(key, source + ":" + std::to_string(n));
    values_[key] = trim(t.substr(eq + 1));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  require_known(key, "command line");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("configuration key '" + key + "' is not defined for this command");
  return it->second;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

}  // namespace

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
std::size_t RunConfig::get_size(const std::string& key) const { return parse_number<std::size_t>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : schema_) out += k.name + "=" + get(k.name) + "\n";
  return out;
}

std::string RunConfig::echo(const std::vector<std::string>& keys) const {
  std::string out;
  for (const auto& k : keys) {
    if (!out.empty()) out += ' ';
    out += k + "=" + get(k);
  }
  return out;
}

}  // namespace ookb
