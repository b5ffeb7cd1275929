#include "gradeforge/similarity/winnow.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gradeforge/error.hpp"

namespace gradeforge::similarity {

namespace {

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  __uint128_t p = static_cast<__uint128_t>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(p & kHashModulus);
  std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
  std::uint64_t r = lo + hi;
  while (r >= kHashModulus) r -= kHashModulus;
  return r;
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = a + b;
  return r >= kHashModulus ? r - kHashModulus : r;
}

std::string strip_comments(std::string_view text, std::string_view lang) {
  const bool hash_comments = lang == "python3";
  const bool c_comments = lang == "c" || lang == "cpp" || lang == "java";
  if (!hash_comments && !c_comments) return std::string(text);
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (hash_comments && text[i] == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      if (i < text.size()) out.push_back('\n');
      continue;
    }
    if (c_comments && text[i] == '/' && i + 1 < text.size()) {
      if (text[i + 1] == '/') {
        while (i < text.size() && text[i] != '\n') ++i;
        if (i < text.size()) out.push_back('\n');
        continue;
      }
      if (text[i + 1] == '*') {
        auto end = text.find("*/", i + 2);
        i = end == std::string_view::npos ? text.size() : end + 1;
        out.push_back(' ');
        continue;
      }
    }
    out.push_back(text[i]);
  }
  return out;
}

}  // namespace

std::string language_for_path(std::string_view path) {
  auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return {};
  std::string ext(path.substr(dot));
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".py") return "python3";
  if (ext == ".c" || ext == ".h") return "c";
  if (ext == ".cpp" || ext == ".cc" || ext == ".cxx" || ext == ".hpp" || ext == ".hh") return "cpp";
  if (ext == ".java") return "java";
  return {};
}

std::string normalize_source(std::string_view text, std::string_view language_id) {
  std::string stripped = strip_comments(text, language_id);
  std::string out;
  out.reserve(stripped.size());
  for (unsigned char c : stripped) {
    if (std::isspace(c) || c == static_cast<unsigned char>(kFileSeparator)) continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::set<std::uint64_t> FingerprintSet::hashes() const {
  std::set<std::uint64_t> out;
  for (const auto& p : prints) out.insert(p.hash);
  return out;
}

std::vector<std::uint64_t> kgram_hashes(std::string_view text, int k) {
  std::vector<std::uint64_t> out;
  if (k < 1 || text.size() < static_cast<std::size_t>(k)) return out;
  std::uint64_t top = 1;  // base^(k-1)
  for (int i = 1; i < k; ++i) top = mulmod(top, kHashBase);
  std::uint64_t h = 0;
  for (int i = 0; i < k; ++i) h = addmod(mulmod(h, kHashBase), static_cast<unsigned char>(text[i]));
  out.push_back(h);
  for (std::size_t i = k; i < text.size(); ++i) {
    std::uint64_t drop = mulmod(static_cast<unsigned char>(text[i - k]), top);
    h = addmod(h, kHashModulus - drop);
    h = addmod(mulmod(h, kHashBase), static_cast<unsigned char>(text[i]));
    out.push_back(h);
  }
  return out;
}

FingerprintSet fingerprints(std::string_view text, int k, int w, std::string doc_id) {
  if (k < 2) throw Error(ErrorKind::validation, "k must be at least 2", "k");
  if (w < 1) throw Error(ErrorKind::validation, "w must be at least 1", "w");
  FingerprintSet set;
  set.doc_id = std::move(doc_id);
  set.k = k;
  set.w = w;
  auto hashes = kgram_hashes(text, k);
  if (hashes.empty()) return set;
  const std::size_t n = hashes.size();
  const std::size_t window = std::min<std::size_t>(w, n);
  // Monotone deque of candidate indices; front is the rightmost minimum.
  std::vector<std::size_t> dq(n);
  std::size_t head = 0, tail = 0;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < n; ++i) {
    while (tail > head && hashes[dq[tail - 1]] >= hashes[i]) --tail;
    dq[tail++] = i;
    if (i + 1 < window) continue;
    const std::size_t start = i + 1 - window;
    while (dq[head] < start) ++head;
    if (!last || *last != dq[head]) {
      last = dq[head];
      set.prints.push_back({hashes[dq[head]], dq[head]});
    }
  }
  return set;
}

SimilarityPair compare(const FingerprintSet& a, const FingerprintSet& b, ScoreMode mode) {
  SimilarityPair pair;
  pair.doc_a = a.doc_id;
  pair.doc_b = b.doc_id;
  auto ha = a.hashes(), hb = b.hashes();
  std::size_t shared = 0;
  for (auto h : ha) shared += hb.count(h);
  pair.shared_print_count = shared;
  if (ha.empty() || hb.empty()) return pair;
  const std::size_t denom =
      mode == ScoreMode::containment ? std::min(ha.size(), hb.size()) : ha.size() + hb.size() - shared;
  pair.score = static_cast<double>(shared) / static_cast<double>(denom);
  return pair;
}

std::string document_text(const util::FileMap& files, const util::FileMap& template_files) {
  std::string out;
  bool first = true;
  for (const auto& [path, data] : files) {
    auto t = template_files.find(path);
    if (t != template_files.end() && t->second == data) continue;
    if (!first) out.push_back(kFileSeparator);
    first = false;
    out += normalize_source(data, language_for_path(path));
  }
  return out;
}

std::vector<SimilarityPair> similarity_report(const std::vector<Document>& docs,
                                              const ReportOptions& options) {
  std::vector<FingerprintSet> sets;
  sets.reserve(docs.size());
  for (const auto& d : docs) {
    sets.push_back(fingerprints(document_text(d.files, options.template_files), options.k,
                                options.w, d.id));
  }
  std::vector<SimilarityPair> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      if (!docs[i].team.empty() && docs[i].team == docs[j].team) continue;
      bool swap = docs[j].id < docs[i].id;
      auto pair = compare(swap ? sets[j] : sets[i], swap ? sets[i] : sets[j], options.mode);
      if (pair.score >= options.threshold) out.push_back(pair);
    }
  }
  std::sort(out.begin(), out.end(), [](const SimilarityPair& x, const SimilarityPair& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.doc_a != y.doc_a) return x.doc_a < y.doc_a;
    return x.doc_b < y.doc_b;
  });
  return out;
}

nlohmann::json to_json(const std::vector<SimilarityPair>& pairs) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs) {
    arr.push_back({{"doc_a", p.doc_a},
                   {"doc_b", p.doc_b},
                   {"score", std::round(p.score * 10000.0) / 10000.0},
                   {"shared_print_count", p.shared_print_count}});
  }
  return arr;
}

}  // namespace gradeforge::similarity
