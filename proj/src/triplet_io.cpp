#include "ookb/triplet_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "ookb/errors.hpp"

namespace ookb {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << contents;
  if (!out) throw DataError("write failed: " + path);
}

std::vector<LabeledTriplet> parse_triplets(const std::string& text, bool labeled, Vocabularies& vocab,
                                           const std::string& source, LoadSummary* summary) {
  std::vector<LabeledTriplet> out;
  LoadSummary s;
  const auto entities_before = vocab.entities.size();
  const auto relations_before = vocab.relations.size();
  std::unordered_set<Triplet, TripletHash> seen;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (line.empty()) throw ParseError(source, line_no, "blank line");
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const std::size_t expected = labeled ? 4 : 3;
    if (fields.size() != expected) {
      if (labeled && fields.size() == 3) throw ParseError(source, line_no, "missing label column");
      throw ParseError(source, line_no,
                       "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < 3; ++i)
      if (fields[i].empty()) throw ParseError(source, line_no, "empty field");

    LabeledTriplet lt;
    lt.triplet.head = vocab.entities.intern(fields[0]);
    lt.triplet.relation = vocab.relations.intern(fields[1]);
    lt.triplet.tail = vocab.entities.intern(fields[2]);
    if (labeled) {
      if (fields[3] == "1") {
        lt.positive = true;
      } else if (fields[3] == "-1") {
        lt.positive = false;
      } else {
        throw ParseError(source, line_no, "bad label '" + std::string(fields[3]) + "'");
      }
    }
    if (!seen.insert(lt.triplet).second) ++s.duplicates;
    (lt.positive ? s.positives : s.negatives)++;
    out.push_back(lt);
  }
  s.lines = line_no;
  s.new_entities = static_cast<std::size_t>(vocab.entities.size() - entities_before);
  s.new_relations = static_cast<std::size_t>(vocab.relations.size() - relations_before);
  if (summary) *summary = s;
  return out;
}

std::vector<LabeledTriplet> load_triplet_file(const std::string& path, bool labeled, Vocabularies& vocab,
                                              LoadSummary* summary) {
  return parse_triplets(read_file(path), labeled, vocab, path, summary);
}

std::string format_triplets(const std::vector<LabeledTriplet>& triplets, bool labeled, const Vocabularies& vocab) {
  std::string out;
  for (const auto& lt : triplets) {
    out += vocab.entities.name(lt.triplet.head);
    out += '\t';
    out += vocab.relations.name(lt.triplet.relation);
    out += '\t';
    out += vocab.entities.name(lt.triplet.tail);
    if (labeled) out += lt.positive ? "\t1" : "\t-1";
    out += '\n';
  }
  return out;
}

void save_triplet_file(const std::string& path, const std::vector<LabeledTriplet>& triplets, bool labeled,
                       const Vocabularies& vocab) {
  write_file(path, format_triplets(triplets, labeled, vocab));
}

std::vector<Triplet> strip_labels(const std::vector<LabeledTriplet>& triplets) {
  std::vector<Triplet> out;
  out.reserve(triplets.size());
  for (const auto& lt : triplets) out.push_back(lt.triplet);
  return out;
}

std::vector<LabeledTriplet> as_positive(const std::vector<Triplet>& triplets) {
  std::vector<LabeledTriplet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back({t, true});
  return out;
}

}  // namespace ookb
