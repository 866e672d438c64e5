#pragma once

#include <map>
#include <string>
#include <vector>

namespace ookb {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Flat key-value configuration for one CLI command. Values resolve as
// command line > config file > defaults; keys outside the command's schema
// are rejected.
class RunConfig {
 public:
  explicit RunConfig(std::vector<ConfigKey> schema);

  const std::vector<ConfigKey>& schema() const { return schema_; }

  // `key = value` lines; blank lines and lines starting with '#' are skipped.
  void merge_file(const std::string& path);
  void merge_text(const std::string& text, const std::string& source);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  bool empty(const std::string& key) const { return get(key).empty(); }
  int get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // Every key in schema order, `key=value` per line.
  std::string to_text() const;
  // Selected keys on one line: "k1=v1 k2=v2".
  std::string echo(const std::vector<std::string>& keys) const;

 private:
  void require_known(const std::string& key, const std::string& source) const;

  std::vector<ConfigKey> schema_;
  std::map<std::string, std::string> values_;
};

}  // namespace ookb
