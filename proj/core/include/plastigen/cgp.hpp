#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plastigen/rng.hpp"

namespace plastigen {

enum class Op : std::uint8_t { Add, Sub, Mul };

char op_symbol(Op op);
double apply_op(Op op, double lhs, double rhs);

/// Ordered set of binary operators a genome draws its function genes from.
class OperatorSet {
 public:
  OperatorSet() : ops_{Op::Add, Op::Sub, Op::Mul} {}
  explicit OperatorSet(std::vector<Op> ops);

  std::size_t size() const { return ops_.size(); }
  Op at(std::size_t i) const { return ops_.at(i); }

 private:
  std::vector<Op> ops_;
};

/// Grid geometry: a single row of internal nodes over the terminal set.
/// Terminals are w, x, y and (when n_inputs is 4) the constant 1.0.
/// The default grid is deliberately much larger than the deepest useful
/// expression: inactive columns carry the neutral drift the search relies on.
struct CgpLayout {
  int n_inputs = 4;
  int n_columns = 192;
  int levels_back = 192;
};

/// Integer-encoded Cartesian graph. `genes` holds one function index and two
/// connection indices per internal node; a connection value t < n_inputs
/// addresses terminal t, otherwise internal node t - n_inputs. `output_gene`
/// addresses any terminal or internal node.
struct Genome {
  int n_inputs = 4;
  int n_columns = 192;
  int levels_back = 192;
  std::vector<int> genes;
  int output_gene = 0;

  CgpLayout layout() const { return {n_inputs, n_columns, levels_back}; }

  bool operator==(const Genome&) const = default;
};

/// Throws std::invalid_argument naming the offending gene on any
/// out-of-range function or connection index.
void validate_genome(const Genome& genome, const OperatorSet& ops = OperatorSet());

Genome random_genome(const CgpLayout& layout, const OperatorSet& ops, Rng& rng);

/// Point mutation: each gene (output gene included) is independently
/// resampled with probability per_gene_rate to a different value drawn
/// uniformly from its legal range. The parent is left untouched.
Genome mutate(const Genome& genome, double per_gene_rate, Rng& rng,
              const OperatorSet& ops = OperatorSet());

std::string genome_to_json(const Genome& genome);
Genome genome_from_json(std::string_view text);

/// Decoded computation DAG over terminals {w, x, y, constants} and the binary
/// operators. Nodes are stored in topological order: children precede parents.
class RuleExpression {
 public:
  enum class NodeKind : std::uint8_t { W, X, Y, Constant, Binary };

  struct Node {
    NodeKind kind = NodeKind::Constant;
    Op op = Op::Add;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    double value = 0.0;
  };

  RuleExpression() = default;

  /// Validates topological order, acyclicity, reachability from root and
  /// finiteness of constants.
  static RuleExpression from_nodes(std::vector<Node> nodes, std::int32_t root);

  /// Value of the DAG under the assignment; total on finite inputs.
  double evaluate(double w, double x, double y) const;

  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::int32_t root() const { return root_; }

 private:
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Genotype -> phenotype map: extracts the DAG of active nodes only.
/// Terminal indices: 0 -> w, 1 -> x, 2 -> y, 3 -> 1.0.
RuleExpression decode(const Genome& genome, const OperatorSet& ops = OperatorSet());

inline double evaluate(const RuleExpression& expr, double w, double x, double y) {
  return expr.evaluate(w, x, y);
}

/// Conservative simplification: constant folding, +-0 elimination, 1*e -> e,
/// 0*e -> 0, e-e -> 0. No distribution or factoring.
RuleExpression simplify(const RuleExpression& expr);

/// Fully parenthesized infix form of the simplified expression. Literals use
/// the shortest decimal representation that re-parses to the same value.
std::string to_infix(const RuleExpression& expr);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses the rule DSL:
///   expr   := term (('+'|'-') term)*
///   term   := factor ('*' factor)*
///   factor := 'w' | 'x' | 'y' | decimal-literal | '(' expr ')' | '-' factor
RuleExpression parse_rule(std::string_view source);

}  // namespace plastigen
