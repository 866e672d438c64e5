#include "ookb/vocabulary.hpp"

#include <fstream>
#include <sstream>

#include "ookb/errors.hpp"

namespace ookb {

Vocabulary::Vocabulary(std::vector<std::string> names) {
  for (auto& n : names) {
    if (index_.count(n) != 0) throw DataError("duplicate vocabulary entry: " + n);
    intern(n);
  }
}

std::int32_t Vocabulary::intern(std::string_view name) {
  std::string key(name);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw DataError("unknown name: " + std::string(name));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& n : names_) out << n << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) names.push_back(line);
  return Vocabulary(std::move(names));
}

}  // namespace ookb
