#include "plastigen/cgp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "plastigen/format.hpp"

namespace plastigen {

char op_symbol(Op op) {
  switch (op) {
    case Op::Add: return '+';
    case Op::Sub: return '-';
    case Op::Mul: return '*';
  }
  return '?';
}

double apply_op(Op op, double lhs, double rhs) {
  switch (op) {
    case Op::Add: return lhs + rhs;
    case Op::Sub: return lhs - rhs;
    case Op::Mul: return lhs * rhs;
  }
  return 0.0;
}

OperatorSet::OperatorSet(std::vector<Op> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw std::invalid_argument("OperatorSet: must not be empty");
}

namespace {

constexpr int kGenesPerNode = 3;

// Connection targets of internal node k: every terminal plus the internal
// nodes within levels_back strictly before k.
int connection_range(const Genome& g, int k) {
  return g.n_inputs + std::min(k, g.levels_back);
}

// Maps a rank in [0, connection_range) to a gene value: terminals first,
// then the reachable window of internal nodes.
int connection_from_rank(const Genome& g, int k, int rank) {
  if (rank < g.n_inputs) return rank;
  const int window = std::min(k, g.levels_back);
  const int first = k - window;
  return g.n_inputs + first + (rank - g.n_inputs);
}

int rank_of_connection(const Genome& g, int k, int value) {
  if (value < g.n_inputs) return value;
  const int window = std::min(k, g.levels_back);
  const int first = k - window;
  return g.n_inputs + (value - g.n_inputs - first);
}

bool connection_valid(const Genome& g, int k, int value) {
  if (value < 0) return false;
  if (value < g.n_inputs) return true;
  const int j = value - g.n_inputs;
  return j < k && k - j <= g.levels_back;
}

// Uniform draw from [0, range) excluding `current`.
int resample_excluding(Rng& rng, int range, int current) {
  if (range <= 1) return current;
  int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(range) - 1));
  if (r >= current) ++r;
  return r;
}

}  // namespace

void validate_genome(const Genome& g, const OperatorSet& ops) {
  if (g.n_inputs != 3 && g.n_inputs != 4)
    throw std::invalid_argument("genome: n_inputs must be 3 (w,x,y) or 4 (w,x,y,1.0)");
  if (g.n_columns < 1) throw std::invalid_argument("genome: n_columns must be >= 1");
  if (g.levels_back < 1) throw std::invalid_argument("genome: levels_back must be >= 1");
  const auto expected = static_cast<std::size_t>(g.n_columns) * kGenesPerNode;
  if (g.genes.size() != expected)
    throw std::invalid_argument("genome: expected " + std::to_string(expected) +
                                " genes, got " + std::to_string(g.genes.size()));
  for (int k = 0; k < g.n_columns; ++k) {
    const int base = k * kGenesPerNode;
    const int fn = g.genes[static_cast<std::size_t>(base)];
    if (fn < 0 || fn >= static_cast<int>(ops.size()))
      throw std::invalid_argument("genome: function gene " + std::to_string(base) +
                                  " out of range (value " + std::to_string(fn) + ")");
    for (int slot = 1; slot <= 2; ++slot) {
      const int value = g.genes[static_cast<std::size_t>(base + slot)];
      if (!connection_valid(g, k, value))
        throw std::invalid_argument("genome: connection gene " + std::to_string(base + slot) +
                                    " out of range (value " + std::to_string(value) + ")");
    }
  }
  if (g.output_gene < 0 || g.output_gene >= g.n_inputs + g.n_columns)
    throw std::invalid_argument("genome: output gene out of range (value " +
                                std::to_string(g.output_gene) + ")");
}

Genome random_genome(const CgpLayout& layout, const OperatorSet& ops, Rng& rng) {
  Genome g;
  g.n_inputs = layout.n_inputs;
  g.n_columns = layout.n_columns;
  g.levels_back = layout.levels_back;
  g.genes.resize(static_cast<std::size_t>(g.n_columns) * kGenesPerNode);
  for (int k = 0; k < g.n_columns; ++k) {
    const int base = k * kGenesPerNode;
    g.genes[static_cast<std::size_t>(base)] = static_cast<int>(rng.below(ops.size()));
    for (int slot = 1; slot <= 2; ++slot) {
      const int rank = static_cast<int>(rng.below(static_cast<std::uint64_t>(connection_range(g, k))));
      g.genes[static_cast<std::size_t>(base + slot)] = connection_from_rank(g, k, rank);
    }
  }
  g.output_gene = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.n_inputs + g.n_columns)));
  validate_genome(g, ops);
  return g;
}

Genome mutate(const Genome& parent, double per_gene_rate, Rng& rng, const OperatorSet& ops) {
  if (!(per_gene_rate > 0.0) || per_gene_rate > 1.0)
    throw std::invalid_argument("mutate: per_gene_rate must be in (0, 1]");
  validate_genome(parent, ops);
  Genome child = parent;
  for (int k = 0; k < child.n_columns; ++k) {
    const int base = k * kGenesPerNode;
    for (int slot = 0; slot < kGenesPerNode; ++slot) {
      if (!rng.coin(per_gene_rate)) continue;
      int& gene = child.genes[static_cast<std::size_t>(base + slot)];
      if (slot == 0) {
        gene = resample_excluding(rng, static_cast<int>(ops.size()), gene);
      } else {
        const int range = connection_range(child, k);
        const int rank = rank_of_connection(child, k, gene);
        gene = connection_from_rank(child, k, resample_excluding(rng, range, rank));
      }
    }
  }
  if (rng.coin(per_gene_rate)) {
    const int range = child.n_inputs + child.n_columns;
    child.output_gene = resample_excluding(rng, range, child.output_gene);
  }
  return child;
}

std::string genome_to_json(const Genome& g) {
  nlohmann::json j;
  j["n_inputs"] = g.n_inputs;
  j["n_columns"] = g.n_columns;
  j["levels_back"] = g.levels_back;
  j["genes"] = g.genes;
  j["output_gene"] = g.output_gene;
  return j.dump();
}

Genome genome_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  Genome g;
  g.n_inputs = j.at("n_inputs").get<int>();
  g.n_columns = j.at("n_columns").get<int>();
  g.levels_back = j.at("levels_back").get<int>();
  g.genes = j.at("genes").get<std::vector<int>>();
  g.output_gene = j.at("output_gene").get<int>();
  return g;
}

RuleExpression RuleExpression::from_nodes(std::vector<Node> nodes, std::int32_t root) {
  const auto n = static_cast<std::int32_t>(nodes.size());
  if (root < 0 || root >= n)
    throw std::invalid_argument("RuleExpression: root out of range");
  for (std::int32_t i = 0; i < n; ++i) {
    const Node& node = nodes[static_cast<std::size_t>(i)];
    if (node.kind == NodeKind::Binary) {
      if (node.lhs < 0 || node.lhs >= i || node.rhs < 0 || node.rhs >= i)
        throw std::invalid_argument("RuleExpression: children must precede parents");
    } else if (node.kind == NodeKind::Constant && !std::isfinite(node.value)) {
      throw std::invalid_argument("RuleExpression: constants must be finite");
    }
  }
  std::vector<char> reachable(nodes.size(), 0);
  reachable[static_cast<std::size_t>(root)] = 1;
  for (std::int32_t i = root; i >= 0; --i) {
    if (!reachable[static_cast<std::size_t>(i)]) continue;
    const Node& node = nodes[static_cast<std::size_t>(i)];
    if (node.kind == NodeKind::Binary) {
      reachable[static_cast<std::size_t>(node.lhs)] = 1;
      reachable[static_cast<std::size_t>(node.rhs)] = 1;
    }
  }
  if (std::find(reachable.begin(), reachable.end(), 0) != reachable.end())
    throw std::invalid_argument("RuleExpression: all nodes must be reachable from root");
  RuleExpression expr;
  expr.nodes_ = std::move(nodes);
  expr.root_ = root;
  return expr;
}

double RuleExpression::evaluate(double w, double x, double y) const {
  if (root_ < 0) throw std::logic_error("RuleExpression: empty expression");
  double inline_buf[64];
  thread_local std::vector<double> heap_buf;
  double* vals = inline_buf;
  if (nodes_.size() > 64) {
    heap_buf.resize(nodes_.size());
    vals = heap_buf.data();
  }
  const std::size_t count = nodes_.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::W: vals[i] = w; break;
      case NodeKind::X: vals[i] = x; break;
      case NodeKind::Y: vals[i] = y; break;
      case NodeKind::Constant: vals[i] = n.value; break;
      case NodeKind::Binary: {
        const double l = vals[n.lhs];
        const double r = vals[n.rhs];
        vals[i] = n.op == Op::Add ? l + r : (n.op == Op::Sub ? l - r : l * r);
        break;
      }
    }
  }
  return vals[root_];
}

RuleExpression decode(const Genome& g, const OperatorSet& ops) {
  validate_genome(g, ops);
  using Node = RuleExpression::Node;
  using Kind = RuleExpression::NodeKind;

  std::vector<char> active(static_cast<std::size_t>(g.n_columns), 0);
  std::vector<int> stack;
  auto push = [&](int idx) {
    if (idx < g.n_inputs) return;
    const int j = idx - g.n_inputs;
    if (!active[static_cast<std::size_t>(j)]) {
      active[static_cast<std::size_t>(j)] = 1;
      stack.push_back(j);
    }
  };
  push(g.output_gene);
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    push(g.genes[static_cast<std::size_t>(j * kGenesPerNode + 1)]);
    push(g.genes[static_cast<std::size_t>(j * kGenesPerNode + 2)]);
  }

  std::vector<Node> nodes;
  std::array<std::int32_t, 4> term_index{-1, -1, -1, -1};
  std::vector<std::int32_t> internal_index(static_cast<std::size_t>(g.n_columns), -1);
  auto terminal = [&](int t) {
    if (term_index[static_cast<std::size_t>(t)] < 0) {
      Node node;
      switch (t) {
        case 0: node.kind = Kind::W; break;
        case 1: node.kind = Kind::X; break;
        case 2: node.kind = Kind::Y; break;
        default:
          node.kind = Kind::Constant;
          node.value = 1.0;
          break;
      }
      nodes.push_back(node);
      term_index[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(nodes.size()) - 1;
    }
    return term_index[static_cast<std::size_t>(t)];
  };
  auto ref = [&](int idx) {
    return idx < g.n_inputs ? terminal(idx)
                            : internal_index[static_cast<std::size_t>(idx - g.n_inputs)];
  };
  for (int j = 0; j < g.n_columns; ++j) {
    if (!active[static_cast<std::size_t>(j)]) continue;
    Node node;
    node.kind = Kind::Binary;
    node.op = ops.at(static_cast<std::size_t>(g.genes[static_cast<std::size_t>(j * kGenesPerNode)]));
    node.lhs = ref(g.genes[static_cast<std::size_t>(j * kGenesPerNode + 1)]);
    node.rhs = ref(g.genes[static_cast<std::size_t>(j * kGenesPerNode + 2)]);
    nodes.push_back(node);
    internal_index[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(nodes.size()) - 1;
  }
  const std::int32_t root = ref(g.output_gene);
  return RuleExpression::from_nodes(std::move(nodes), root);
}

namespace {

using Node = RuleExpression::Node;
using Kind = RuleExpression::NodeKind;

// Hash-consing builder: structurally equal sub-DAGs share one index, which
// makes the e - e -> 0 rule an index comparison.
class ExprBuilder {
 public:
  std::int32_t terminal(Kind kind) {
    Node n;
    n.kind = kind;
    return intern(n);
  }

  std::int32_t constant(double v) {
    Node n;
    n.kind = Kind::Constant;
    n.value = v;
    return intern(n);
  }

  std::int32_t binary_raw(Op op, std::int32_t lhs, std::int32_t rhs) {
    Node n;
    n.kind = Kind::Binary;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return intern(n);
  }

  bool constant_value(std::int32_t i, double& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.kind != Kind::Constant) return false;
    out = n.value;
    return true;
  }

  // Simplifying constructor.
  std::int32_t binary(Op op, std::int32_t lhs, std::int32_t rhs) {
    double lv = 0.0;
    double rv = 0.0;
    const bool lc = constant_value(lhs, lv);
    const bool rc = constant_value(rhs, rv);
    if (lc && rc) {
      const double folded = apply_op(op, lv, rv);
      if (std::isfinite(folded)) return constant(folded);
    }
    switch (op) {
      case Op::Add:
        if (lc && lv == 0.0) return rhs;
        if (rc && rv == 0.0) return lhs;
        break;
      case Op::Sub:
        if (rc && rv == 0.0) return lhs;
        if (lhs == rhs) return constant(0.0);
        break;
      case Op::Mul:
        if (lc && lv == 1.0) return rhs;
        if (rc && rv == 1.0) return lhs;
        if ((lc && lv == 0.0) || (rc && rv == 0.0)) return constant(0.0);
        break;
    }
    return binary_raw(op, lhs, rhs);
  }

  // Extracts the sub-DAG reachable from root, preserving topological order.
  RuleExpression extract(std::int32_t root) const {
    std::vector<char> keep(nodes_.size(), 0);
    keep[static_cast<std::size_t>(root)] = 1;
    for (std::int32_t i = root; i >= 0; --i) {
      if (!keep[static_cast<std::size_t>(i)]) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.kind == Kind::Binary) {
        keep[static_cast<std::size_t>(n.lhs)] = 1;
        keep[static_cast<std::size_t>(n.rhs)] = 1;
      }
    }
    std::vector<std::int32_t> remap(nodes_.size(), -1);
    std::vector<Node> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!keep[i]) continue;
      Node n = nodes_[i];
      if (n.kind == Kind::Binary) {
        n.lhs = remap[static_cast<std::size_t>(n.lhs)];
        n.rhs = remap[static_cast<std::size_t>(n.rhs)];
      }
      out.push_back(n);
      remap[i] = static_cast<std::int32_t>(out.size()) - 1;
    }
    return RuleExpression::from_nodes(std::move(out), remap[static_cast<std::size_t>(root)]);
  }

 private:
  std::int32_t intern(const Node& n) {
    const std::array<std::uint64_t, 3> key{
        (static_cast<std::uint64_t>(n.kind) << 8) | static_cast<std::uint64_t>(n.op),
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(n.lhs)) << 32) |
            static_cast<std::uint32_t>(n.rhs),
        std::bit_cast<std::uint64_t>(n.value)};
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    nodes_.push_back(n);
    const auto idx = static_cast<std::int32_t>(nodes_.size()) - 1;
    cache_.emplace(key, idx);
    return idx;
  }

  std::vector<Node> nodes_;
  std::map<std::array<std::uint64_t, 3>, std::int32_t> cache_;
};

std::string format_literal(double v) {
  std::string text = format_double(v);
  if (text.find_first_of(".eE") == std::string::npos) text += ".0";
  return text;
}

void print_node(const std::vector<Node>& nodes, std::int32_t i, std::string& out) {
  const Node& n = nodes[static_cast<std::size_t>(i)];
  switch (n.kind) {
    case Kind::W: out += 'w'; return;
    case Kind::X: out += 'x'; return;
    case Kind::Y: out += 'y'; return;
    case Kind::Constant: out += format_literal(n.value); return;
    case Kind::Binary:
      out += '(';
      print_node(nodes, n.lhs, out);
      out += ' ';
      out += op_symbol(n.op);
      out += ' ';
      print_node(nodes, n.rhs, out);
      out += ')';
      return;
  }
}

}  // namespace

RuleExpression simplify(const RuleExpression& expr) {
  if (expr.empty()) throw std::invalid_argument("simplify: empty expression");
  ExprBuilder builder;
  std::vector<std::int32_t> memo(expr.nodes().size(), -1);
  for (std::size_t i = 0; i < expr.nodes().size(); ++i) {
    const Node& n = expr.nodes()[i];
    switch (n.kind) {
      case Kind::W:
      case Kind::X:
      case Kind::Y:
        memo[i] = builder.terminal(n.kind);
        break;
      case Kind::Constant:
        memo[i] = builder.constant(n.value);
        break;
      case Kind::Binary:
        memo[i] = builder.binary(n.op, memo[static_cast<std::size_t>(n.lhs)],
                                 memo[static_cast<std::size_t>(n.rhs)]);
        break;
    }
  }
  return builder.extract(memo[static_cast<std::size_t>(expr.root())]);
}

std::string to_infix(const RuleExpression& expr) {
  const RuleExpression s = simplify(expr);
  std::string out;
  print_node(s.nodes(), s.root(), out);
  return out;
}

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error("parse error at position " + std::to_string(position) + ": " + message),
      position_(position) {}

namespace {

constexpr int kMaxParseDepth = 500;

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  RuleExpression parse() {
    const std::int32_t root = parse_expr(0);
    skip_ws();
    if (pos_ != src_.size()) throw ParseError(pos_, "unexpected trailing input");
    return RuleExpression::from_nodes(std::move(nodes_), root);
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                  src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  std::int32_t add(Node n) {
    nodes_.push_back(n);
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }

  std::int32_t add_binary(Op op, std::int32_t lhs, std::int32_t rhs) {
    Node n;
    n.kind = Kind::Binary;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return add(n);
  }

  std::int32_t parse_expr(int depth) {
    std::int32_t lhs = parse_term(depth);
    for (;;) {
      skip_ws();
      if (eof() || (peek() != '+' && peek() != '-')) return lhs;
      const Op op = peek() == '+' ? Op::Add : Op::Sub;
      ++pos_;
      lhs = add_binary(op, lhs, parse_term(depth));
    }
  }

  std::int32_t parse_term(int depth) {
    std::int32_t lhs = parse_factor(depth);
    for (;;) {
      skip_ws();
      if (eof() || peek() != '*') return lhs;
      ++pos_;
      lhs = add_binary(Op::Mul, lhs, parse_factor(depth));
    }
  }

  std::int32_t parse_factor(int depth) {
    if (depth > kMaxParseDepth) throw ParseError(pos_, "expression nests too deeply");
    skip_ws();
    if (eof()) throw ParseError(pos_, "expected operand");
    const char c = peek();
    if (c == '-') {
      ++pos_;
      const std::int32_t sub = parse_factor(depth + 1);
      // Literals negate in place; anything else becomes 0 - e. The parser
      // builds trees, so the literal node is owned by this factor alone.
      if (nodes_[static_cast<std::size_t>(sub)].kind == Kind::Constant) {
        nodes_[static_cast<std::size_t>(sub)].value =
            -nodes_[static_cast<std::size_t>(sub)].value;
        return sub;
      }
      Node zero;
      zero.kind = Kind::Constant;
      zero.value = 0.0;
      return add_binary(Op::Sub, add(zero), sub);
    }
    if (c == '(') {
      ++pos_;
      const std::int32_t inner = parse_expr(depth + 1);
      skip_ws();
      if (eof() || peek() != ')') throw ParseError(pos_, "expected ')'");
      ++pos_;
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string_view ident = src_.substr(start, pos_ - start);
      Node n;
      if (ident == "w") n.kind = Kind::W;
      else if (ident == "x") n.kind = Kind::X;
      else if (ident == "y") n.kind = Kind::Y;
      else throw ParseError(start, "unknown identifier '" + std::string(ident) + "'");
      return add(n);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::size_t start = pos_;
      double value = 0.0;
      const char* first = src_.data() + pos_;
      const char* last = src_.data() + src_.size();
      const auto res = std::from_chars(first, last, value);
      if (res.ec == std::errc::result_out_of_range || (res.ec == std::errc() && !std::isfinite(value)))
        throw ParseError(start, "literal out of range");
      if (res.ec != std::errc() || res.ptr == first)
        throw ParseError(start, "malformed literal");
      pos_ += static_cast<std::size_t>(res.ptr - first);
      Node n;
      n.kind = Kind::Constant;
      n.value = value;
      return add(n);
    }
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

RuleExpression parse_rule(std::string_view source) { return Parser(source).parse(); }

}  // namespace plastigen
