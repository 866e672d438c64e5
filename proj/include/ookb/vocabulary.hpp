#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ookb {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// Dense string interning: ids are 0..size()-1 in first-insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  // Returns the existing id or appends a new one.
  std::int32_t intern(std::string_view name);
  std::optional<std::int32_t> find(std::string_view name) const;
  // Throws DataError if absent.
  std::int32_t at(std::string_view name) const;

  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
  bool contains(std::int32_t id) const { return id >= 0 && id < size(); }

  // Newline-delimited; line number is the id.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace ookb
