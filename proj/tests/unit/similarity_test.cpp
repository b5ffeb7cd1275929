#include "gradeforge/similarity/winnow.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gradeforge/error.hpp"

namespace gradeforge::similarity {
namespace {

// Reference k-gram hash computed straight from the definition.
std::uint64_t oracle_hash(std::string_view gram) {
  const unsigned __int128 mod = kHashModulus;
  unsigned __int128 h = 0;
  for (unsigned char c : gram) h = (h * 257 + c) % mod;
  return static_cast<std::uint64_t>(h);
}

std::set<Fingerprint> oracle_fingerprints(std::string_view text, int k, int w) {
  std::set<Fingerprint> out;
  if (text.size() < static_cast<std::size_t>(k)) return out;
  std::vector<std::uint64_t> all;
  for (std::size_t i = 0; i + k <= text.size(); ++i) all.push_back(oracle_hash(text.substr(i, k)));
  const std::size_t n = all.size();
  const std::size_t win = std::min<std::size_t>(w, n);
  for (std::size_t start = 0; start + win <= n; ++start) {
    std::size_t best = start;
    for (std::size_t j = start; j < start + win; ++j) {
      if (all[j] <= all[best]) best = j;
    }
    out.insert({all[best], best});
  }
  return out;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len, const std::string& alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_source("A  b\n", ""), "ab");
  EXPECT_EQ(normalize_source("x=1 # set x", "python3"), "x=1");
  EXPECT_EQ(normalize_source("int a; // c\n", "c"), "inta;");
  EXPECT_EQ(normalize_source("int /* x */ b;", "java"), "intb;");
  EXPECT_EQ(normalize_source("x=1 # kept", "unknown"), "x=1#kept");
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    auto s = random_text(rng, 80, "ab #/*\n\tXY");
    for (const char* lang : {"python3", "c", ""}) {
      auto once = normalize_source(s, lang);
      EXPECT_EQ(normalize_source(once, ""), once);
    }
  }
}

TEST(Fingerprints, ShorterThanKIsEmpty) {
  EXPECT_TRUE(fingerprints("abc", 5, 4).prints.empty());
  EXPECT_TRUE(fingerprints("", 2, 1).prints.empty());
}

TEST(Fingerprints, RejectsBadParameters) {
  EXPECT_THROW(fingerprints("abcdef", 1, 4), Error);
  EXPECT_THROW(fingerprints("abcdef", 3, 0), Error);
}

TEST(Fingerprints, RollingHashMatchesDefinition) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto s = random_text(rng, 100, "\x01\x7f\xfe" "abcxyz");
    for (int k : {2, 3, 12}) {
      auto hs = kgram_hashes(s, k);
      ASSERT_EQ(hs.size(), s.size() >= std::size_t(k) ? s.size() - k + 1 : 0);
      for (std::size_t j = 0; j < hs.size(); ++j) ASSERT_EQ(hs[j], oracle_hash(s.substr(j, k)));
    }
  }
}

TEST(Fingerprints, EqualsBruteForceOracle) {
  std::mt19937_64 rng(2024);
  const std::string alphabets[] = {"ab", "abcd", "abcdefghijklmnopqrstuvwxyz0123456789(){};="};
  int cases = 0;
  for (int i = 0; i < 200; ++i) {
    auto s = random_text(rng, 200, alphabets[i % 3]);
    for (int k : {3, 5, 12}) {
      for (int w : {1, 4, 8}) {
        auto fp = fingerprints(s, k, w);
        std::set<Fingerprint> got(fp.prints.begin(), fp.prints.end());
        ASSERT_EQ(got.size(), fp.prints.size()) << "duplicate selections";
        ASSERT_EQ(got, oracle_fingerprints(s, k, w)) << s << " k=" << k << " w=" << w;
        ++cases;
      }
    }
  }
  EXPECT_EQ(cases, 1800);
}

TEST(Fingerprints, EveryWindowCovered) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    auto s = random_text(rng, 200, "abc");
    for (int k : {3, 5}) {
      for (int w : {1, 4, 8}) {
        auto fp = fingerprints(s, k, w);
        auto n = kgram_hashes(s, k).size();
        std::set<std::size_t> pos;
        for (const auto& p : fp.prints) pos.insert(p.position);
        std::size_t win = std::min<std::size_t>(w, n);
        for (std::size_t start = 0; n > 0 && start + win <= n; ++start) {
          auto it = pos.lower_bound(start);
          ASSERT_TRUE(it != pos.end() && *it < start + win);
        }
        // Subset of the document's k-gram hashes.
        auto all = kgram_hashes(s, k);
        for (const auto& p : fp.prints) ASSERT_EQ(all[p.position], p.hash);
      }
    }
  }
}

TEST(Fingerprints, Deterministic) {
  EXPECT_EQ(fingerprints("the quick brown fox jumps", 4, 3).prints,
            fingerprints("the quick brown fox jumps", 4, 3).prints);
}

TEST(Score, IdenticalDisjointAndSymmetric) {
  auto a = fingerprints("abcdefghijklmnopqrstuvwxyz", 5, 4, "a");
  auto b = fingerprints("0123456789012345678901234", 5, 4, "b");
  EXPECT_DOUBLE_EQ(compare(a, a).score, 1.0);
  EXPECT_DOUBLE_EQ(compare(a, b).score, 0.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto x = fingerprints(random_text(rng, 120, "abcd"), 4, 3, "x");
    auto y = fingerprints(random_text(rng, 120, "abcd"), 4, 3, "y");
    for (auto mode : {ScoreMode::containment, ScoreMode::jaccard}) {
      auto xy = compare(x, y, mode), yx = compare(y, x, mode);
      EXPECT_DOUBLE_EQ(xy.score, yx.score);
      EXPECT_EQ(xy.shared_print_count, yx.shared_print_count);
      EXPECT_GE(xy.score, 0.0);
      EXPECT_LE(xy.score, 1.0);
    }
  }
}

TEST(Score, ContainmentVersusJaccard) {
  auto small = fingerprints("abcdefghij", 3, 1, "s");
  auto big = fingerprints("abcdefghijklmnopqrst", 3, 1, "b");
  EXPECT_DOUBLE_EQ(compare(small, big).score, 1.0);
  EXPECT_DOUBLE_EQ(compare(small, big, ScoreMode::jaccard).score, 8.0 / 18.0);
}

const char* kProgram =
    "import pandas as pd\n"
    "# load the data\n"
    "df = pd.read_csv('iris.csv')\n"
    "print(round(df['petal_width'].mean(), 1))  # average\n";

const char* kMutated =
    "import pandas   as pd\n"
    "\n"
    "# read the dataset first\n"
    "df=pd.read_csv('iris.csv')\n"
    "print( round(df['petal_width'].mean(), 1) )   # prints the mean\n";

TEST(Report, IdenticalSubmissionsScoreOne) {
  std::vector<Document> docs = {{"alice", {{"a.py", kProgram}}, ""},
                                {"bob", {{"a.py", kProgram}}, ""}};
  auto report = similarity_report(docs, {});
  ASSERT_EQ(report.size(), 1u);
  EXPECT_DOUBLE_EQ(report[0].score, 1.0);
  EXPECT_EQ(report[0].doc_a, "alice");
}

TEST(Report, DisjointAlphabetsScoreZero) {
  std::vector<Document> docs = {{"a", {{"x.txt", "abcdefghijklmnopqrstuvwxyz"}}, ""},
                                {"b", {{"x.txt", "0123456789+-*/=<>!?0123456789"}}, ""}};
  ReportOptions opts;
  opts.threshold = 0.0;
  auto report = similarity_report(docs, opts);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_DOUBLE_EQ(report[0].score, 0.0);
  opts.threshold = 0.5;
  EXPECT_TRUE(similarity_report(docs, opts).empty());
}

TEST(Report, CommentAndWhitespaceMutationScoresOne) {
  // Oracle route: normalized texts must be byte-identical, hence identical
  // fingerprint sets.
  EXPECT_EQ(normalize_source(kProgram, "python3"), normalize_source(kMutated, "python3"));
  std::vector<Document> docs = {{"a", {{"main.py", kProgram}}, ""},
                                {"b", {{"main.py", kMutated}}, ""}};
  auto report = similarity_report(docs, {});
  ASSERT_EQ(report.size(), 1u);
  EXPECT_DOUBLE_EQ(report[0].score, 1.0);
}

TEST(Report, TemplateFilesAndTeamsExcluded) {
  util::FileMap tmpl = {{"data.csv", "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15"}};
  std::vector<Document> docs = {
      {"a", {{"data.csv", tmpl.at("data.csv")}, {"m.py", "print('hello world from a')"}}, "t1"},
      {"b", {{"data.csv", tmpl.at("data.csv")}, {"m.py", "x = [i*i for i in range(99)]"}}, "t2"},
      {"c", {{"m.py", "print('hello world from a')"}}, "t1"}};
  ReportOptions opts;
  opts.threshold = 0.0;
  opts.k = 5;
  opts.w = 4;
  opts.template_files = tmpl;
  auto report = similarity_report(docs, opts);
  for (const auto& p : report) {
    EXPECT_FALSE(p.doc_a == "a" && p.doc_b == "c") << "same team paired";
    if (p.doc_a == "a" && p.doc_b == "b") {
      EXPECT_LT(p.score, 0.5);
    }
  }
  EXPECT_EQ(report.size(), 2u);
}

TEST(Report, SortedAndSerialized) {
  std::vector<Document> docs = {{"c", {{"m.py", "abcdefghijklmnop"}}, ""},
                                {"b", {{"m.py", "abcdefghijklmnop"}}, ""},
                                {"a", {{"m.py", "abcdefghqrstuvwx"}}, ""}};
  ReportOptions opts;
  opts.k = 3;
  opts.w = 2;
  opts.threshold = 0.0;
  auto report = similarity_report(docs, opts);
  ASSERT_EQ(report.size(), 3u);
  EXPECT_EQ(report[0].doc_a, "b");
  EXPECT_EQ(report[0].doc_b, "c");
  for (std::size_t i = 1; i < report.size(); ++i) EXPECT_GE(report[i - 1].score, report[i].score);
  auto j = to_json(report);
  EXPECT_EQ(j[0]["score"], 1.0);
  EXPECT_TRUE(j[1].contains("shared_print_count"));
}

TEST(Report, FewerThanTwoDocumentsIsEmpty) {
  EXPECT_TRUE(similarity_report({}, {}).empty());
  EXPECT_TRUE(similarity_report({{"a", {{"m.py", kProgram}}, ""}}, {}).empty());
}

}  // namespace
}  // namespace gradeforge::similarity
