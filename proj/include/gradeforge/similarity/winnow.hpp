#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gradeforge/util/files.hpp"

namespace gradeforge::similarity {

inline constexpr std::uint64_t kHashModulus = (std::uint64_t{1} << 61) - 1;
inline constexpr std::uint64_t kHashBase = 257;
// Joins files of one document; never produced by normalize_source.
inline constexpr char kFileSeparator = '\xff';

// Lowercases, drops comments for known languages (python3: `#`;
// c, cpp, java: `//` and `/* */`) and removes all whitespace.
std::string normalize_source(std::string_view text, std::string_view language_id);

// Language id guessed from a file extension, empty when unknown.
std::string language_for_path(std::string_view path);

struct Fingerprint {
  std::uint64_t hash;
  std::size_t position;  // index of the k-gram in the normalized text
  auto operator<=>(const Fingerprint&) const = default;
};

struct FingerprintSet {
  std::string doc_id;
  int k = 12;
  int w = 8;
  std::vector<Fingerprint> prints;  // ordered by position

  std::set<std::uint64_t> hashes() const;
};

// Polynomial rolling hash of every k-gram, base 257 mod 2^61 - 1.
std::vector<std::uint64_t> kgram_hashes(std::string_view text, int k);

// Winnowing over `text` as given (normalize first). In every window of w
// consecutive k-gram hashes the minimum is selected, rightmost on ties. A text
// with fewer than w k-grams forms a single window. Throws Error(validation)
// for k < 2 or w < 1.
FingerprintSet fingerprints(std::string_view text, int k, int w, std::string doc_id = {});

enum class ScoreMode { containment, jaccard };

struct SimilarityPair {
  std::string doc_a;
  std::string doc_b;
  double score = 0;
  std::size_t shared_print_count = 0;
};

// Compares distinct hash sets. containment: shared / min(|a|, |b|);
// jaccard: shared / |a u b|. Empty sets score 0.
SimilarityPair compare(const FingerprintSet& a, const FingerprintSet& b,
                       ScoreMode mode = ScoreMode::containment);

struct Document {
  std::string id;
  util::FileMap files;
  // Documents sharing a non-empty team are never paired.
  std::string team;
};

struct ReportOptions {
  int k = 12;
  int w = 8;
  double threshold = 0.5;
  ScoreMode mode = ScoreMode::containment;
  // Files byte-identical to the template at the same path are skipped.
  util::FileMap template_files;
};

// Normalized files of a document, in path order, joined by kFileSeparator.
std::string document_text(const util::FileMap& files, const util::FileMap& template_files = {});

// Pairs with score >= threshold, by descending score then ids.
std::vector<SimilarityPair> similarity_report(const std::vector<Document>& docs,
                                              const ReportOptions& options);

nlohmann::json to_json(const std::vector<SimilarityPair>& pairs);

}  // namespace gradeforge::similarity
