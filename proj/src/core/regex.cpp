#include "gradeforge/core/regex.hpp"

#include <cctype>
#include <memory>

#include "gradeforge/error.hpp"

namespace gradeforge::core {

namespace {

constexpr int kUnbounded = -1;
constexpr int kMaxRepeat = 255;
constexpr std::size_t kMaxProgram = 200000;

struct Node {
  enum class Kind { empty, byte, any, set, bol, eol, concat, alt, repeat };
  Kind kind = Kind::empty;
  unsigned char byte = 0;
  std::uint32_t set = 0;
  int min = 0;
  int max = 0;
  std::vector<std::unique_ptr<Node>> kids;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make(Node::Kind kind) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  return n;
}

std::bitset<256> class_bits(std::string_view name, bool* known) {
  std::bitset<256> bits;
  *known = true;
  int (*pred)(int) = nullptr;
  if (name == "alpha") pred = ::isalpha;
  else if (name == "digit") pred = ::isdigit;
  else if (name == "alnum") pred = ::isalnum;
  else if (name == "upper") pred = ::isupper;
  else if (name == "lower") pred = ::islower;
  else if (name == "space") pred = ::isspace;
  else if (name == "blank") pred = ::isblank;
  else if (name == "punct") pred = ::ispunct;
  else if (name == "print") pred = ::isprint;
  else if (name == "graph") pred = ::isgraph;
  else if (name == "cntrl") pred = ::iscntrl;
  else if (name == "xdigit") pred = ::isxdigit;
  else {
    *known = false;
    return bits;
  }
  for (int c = 0; c < 128; ++c) {
    if (pred(c)) bits.set(std::size_t(c));
  }
  return bits;
}

}  // namespace

class RegexCompiler {
 public:
  explicit RegexCompiler(std::string_view pattern) : src_(pattern) {}

  Regex run() {
    Regex re;
    re.pattern_ = std::string(src_);
    NodePtr root = parse_alt();
    if (pos_ != src_.size()) fail("unmatched ')'");
    sets_ = &re.sets_;
    for (auto& s : pending_sets_) re.sets_.push_back(s);
    prog_ = &re.program_;
    emit(*root);
    push({Regex::Op::match});
    return re;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::comparison,
                "invalid regex '" + std::string(src_) + "' at offset " +
                    std::to_string(pos_) + ": " + why,
                "output");
  }

  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  std::uint32_t add_set(const std::bitset<256>& bits) {
    pending_sets_.push_back(bits);
    return std::uint32_t(pending_sets_.size() - 1);
  }

  NodePtr set_node(const std::bitset<256>& bits) {
    auto n = make(Node::Kind::set);
    n->set = add_set(bits);
    return n;
  }

  NodePtr parse_alt() {
    std::vector<NodePtr> branches;
    branches.push_back(parse_concat());
    while (!at_end() && peek() == '|') {
      ++pos_;
      branches.push_back(parse_concat());
    }
    if (branches.size() == 1) return std::move(branches.front());
    auto n = make(Node::Kind::alt);
    n->kids = std::move(branches);
    return n;
  }

  NodePtr parse_concat() {
    auto n = make(Node::Kind::concat);
    while (!at_end() && peek() != '|' && peek() != ')') {
      n->kids.push_back(parse_repeat());
    }
    if (n->kids.empty()) return make(Node::Kind::empty);
    if (n->kids.size() == 1) return std::move(n->kids.front());
    return n;
  }

  bool parse_bound(int* min, int* max) {
    // positioned just after '{'
    auto number = [&](int* out) {
      std::size_t start = pos_;
      long v = 0;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + (peek() - '0');
        if (v > kMaxRepeat) fail("repetition count exceeds 255");
        ++pos_;
      }
      *out = int(v);
      return pos_ > start;
    };
    if (!number(min)) fail("malformed repetition bound");
    *max = *min;
    if (!at_end() && peek() == ',') {
      ++pos_;
      if (!number(max)) *max = kUnbounded;
    }
    if (at_end() || peek() != '}') fail("malformed repetition bound");
    ++pos_;
    if (*max != kUnbounded && *max < *min) fail("repetition bound max < min");
    return true;
  }

  NodePtr parse_repeat() {
    NodePtr atom = parse_atom();
    while (!at_end()) {
      int min = 0;
      int max = 0;
      char c = peek();
      if (c == '*') {
        min = 0;
        max = kUnbounded;
        ++pos_;
      } else if (c == '+') {
        min = 1;
        max = kUnbounded;
        ++pos_;
      } else if (c == '?') {
        min = 0;
        max = 1;
        ++pos_;
      } else if (c == '{') {
        ++pos_;
        parse_bound(&min, &max);
      } else {
        break;
      }
      if (atom->kind == Node::Kind::bol || atom->kind == Node::Kind::eol) {
        fail("nothing to repeat");
      }
      auto rep = make(Node::Kind::repeat);
      rep->min = min;
      rep->max = max;
      rep->kids.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  NodePtr parse_atom() {
    char c = peek();
    switch (c) {
      case '(': {
        ++pos_;
        NodePtr inner = parse_alt();
        if (at_end() || peek() != ')') fail("missing ')'");
        ++pos_;
        return inner;
      }
      case '*':
      case '+':
      case '?':
      case '{':
        fail("nothing to repeat");
      case '.': {
        ++pos_;
        return make(Node::Kind::any);
      }
      case '^':
        ++pos_;
        return make(Node::Kind::bol);
      case '$':
        ++pos_;
        return make(Node::Kind::eol);
      case '[':
        ++pos_;
        return parse_bracket();
      case '\\':
        ++pos_;
        return parse_escape();
      default: {
        ++pos_;
        auto n = make(Node::Kind::byte);
        n->byte = static_cast<unsigned char>(c);
        return n;
      }
    }
  }

  NodePtr parse_escape() {
    if (at_end()) fail("trailing backslash");
    char c = peek();
    ++pos_;
    std::bitset<256> bits;
    bool known = false;
    switch (c) {
      case 'd': return set_node(class_bits("digit", &known));
      case 'D': return set_node(~class_bits("digit", &known));
      case 's': return set_node(class_bits("space", &known));
      case 'S': return set_node(~class_bits("space", &known));
      case 'w':
      case 'W':
        bits = class_bits("alnum", &known);
        bits.set('_');
        return set_node(c == 'w' ? bits : ~bits);
      case 'n': return literal('\n');
      case 't': return literal('\t');
      case 'r': return literal('\r');
      case 'f': return literal('\f');
      case 'v': return literal('\v');
      default: break;
    }
    if (c >= '1' && c <= '9') fail("backreferences are not supported");
    if (std::isalnum(static_cast<unsigned char>(c))) {
      fail(std::string("unsupported escape '\\") + c + "'");
    }
    return literal(c);
  }

  NodePtr literal(char c) {
    auto n = make(Node::Kind::byte);
    n->byte = static_cast<unsigned char>(c);
    return n;
  }

  NodePtr parse_bracket() {
    // positioned just after '['; backslash is an ordinary member here.
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    std::bitset<256> bits;
    bool first = true;
    while (true) {
      if (at_end()) fail("missing ']'");
      char c = peek();
      if (c == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      if (c == '[' && pos_ + 1 < src_.size()) {
        char kind = src_[pos_ + 1];
        if (kind == ':') {
          std::size_t close = src_.find(":]", pos_ + 2);
          if (close == std::string_view::npos) fail("unterminated character class");
          bool known = false;
          auto cls = class_bits(src_.substr(pos_ + 2, close - pos_ - 2), &known);
          if (!known) fail("unknown character class");
          bits |= cls;
          pos_ = close + 2;
          continue;
        }
        if (kind == '=' || kind == '.') {
          fail("collating elements and equivalence classes are not supported");
        }
      }
      ++pos_;
      unsigned char lo = static_cast<unsigned char>(c);
      if (pos_ + 1 < src_.size() && peek() == '-' && src_[pos_ + 1] != ']') {
        ++pos_;
        char d = peek();
        if (d == '[' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == '.' || src_[pos_ + 1] == '=' ||
             src_[pos_ + 1] == ':')) {
          fail("invalid range end");
        }
        ++pos_;
        unsigned char hi = static_cast<unsigned char>(d);
        if (hi < lo) fail("invalid range (end before start)");
        for (unsigned v = lo; v <= hi; ++v) bits.set(v);
      } else {
        bits.set(lo);
      }
    }
    if (negate) bits.flip();
    return set_node(bits);
  }

  // --- code generation ---

  std::uint32_t push(Regex::Inst inst) {
    if (prog_->size() >= kMaxProgram) fail("pattern too large");
    prog_->push_back(inst);
    return std::uint32_t(prog_->size() - 1);
  }

  std::uint32_t here() const { return std::uint32_t(prog_->size()); }

  void emit(const Node& n) {
    using Op = Regex::Op;
    switch (n.kind) {
      case Node::Kind::empty:
        return;
      case Node::Kind::byte:
        push({Op::byte, n.byte});
        return;
      case Node::Kind::any:
        push({Op::any});
        return;
      case Node::Kind::set:
        push({Op::set, 0, n.set});
        return;
      case Node::Kind::bol:
        push({Op::bol});
        return;
      case Node::Kind::eol:
        push({Op::eol});
        return;
      case Node::Kind::concat:
        for (const auto& k : n.kids) emit(*k);
        return;
      case Node::Kind::alt: {
        std::vector<std::uint32_t> exits;
        for (std::size_t i = 0; i < n.kids.size(); ++i) {
          if (i + 1 < n.kids.size()) {
            std::uint32_t split = push({Op::split});
            (*prog_)[split].x = here();
            emit(*n.kids[i]);
            exits.push_back(push({Op::jump}));
            (*prog_)[split].y = here();
          } else {
            emit(*n.kids[i]);
          }
        }
        for (auto j : exits) (*prog_)[j].x = here();
        return;
      }
      case Node::Kind::repeat: {
        const Node& body = *n.kids.front();
        for (int i = 0; i < n.min; ++i) emit(body);
        if (n.max == kUnbounded) {
          std::uint32_t loop = push({Op::split});
          (*prog_)[loop].x = here();
          emit(body);
          push({Op::jump, 0, loop});
          (*prog_)[loop].y = here();
        } else {
          std::vector<std::uint32_t> splits;
          for (int i = n.min; i < n.max; ++i) {
            std::uint32_t split = push({Op::split});
            (*prog_)[split].x = here();
            splits.push_back(split);
            emit(body);
          }
          for (auto s : splits) (*prog_)[s].y = here();
        }
        return;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<std::bitset<256>> pending_sets_;
  std::vector<std::bitset<256>>* sets_ = nullptr;
  std::vector<Regex::Inst>* prog_ = nullptr;
};

Regex Regex::compile(std::string_view pattern) {
  return RegexCompiler(pattern).run();
}

bool Regex::search(std::string_view text) const {
  const std::size_t n = text.size();
  const std::size_t size = program_.size();
  std::vector<std::uint32_t> mark(size, 0);
  std::vector<std::uint32_t> current;
  std::vector<std::uint32_t> next;
  std::vector<std::uint32_t> stack;
  current.reserve(size);
  next.reserve(size);
  std::uint32_t gen = 1;

  // Follows epsilon edges from pc at text position pos, appending the
  // consuming instructions reached to `list`. Returns true on reaching match.
  auto add = [&](std::vector<std::uint32_t>& list, std::uint32_t start,
                 std::size_t pos) {
    stack.push_back(start);
    while (!stack.empty()) {
      std::uint32_t pc = stack.back();
      stack.pop_back();
      if (mark[pc] == gen) continue;
      mark[pc] = gen;
      const Inst& in = program_[pc];
      switch (in.op) {
        case Op::jump:
          stack.push_back(in.x);
          break;
        case Op::split:
          stack.push_back(in.y);
          stack.push_back(in.x);
          break;
        case Op::bol:
          if (pos == 0) stack.push_back(pc + 1);
          break;
        case Op::eol:
          if (pos == n) stack.push_back(pc + 1);
          break;
        case Op::match:
          stack.clear();
          return true;
        default:
          list.push_back(pc);
      }
    }
    return false;
  };

  for (std::size_t pos = 0;; ++pos) {
    if (add(current, 0, pos)) return true;
    if (pos == n) return false;
    ++gen;
    next.clear();
    const unsigned char c = static_cast<unsigned char>(text[pos]);
    for (std::uint32_t pc : current) {
      const Inst& in = program_[pc];
      bool ok = false;
      switch (in.op) {
        case Op::byte: ok = in.byte == c; break;
        case Op::any: ok = c != '\n'; break;
        case Op::set: ok = sets_[in.x].test(c); break;
        default: break;
      }
      if (ok && add(next, pc + 1, pos + 1)) return true;
    }
    std::swap(current, next);
  }
}

}  // namespace gradeforge::core
