#include <doctest.h>

#include <cmath>
#include <set>

#include "plastigen/cgp.hpp"

using namespace plastigen;

namespace {

// w*y, x - (w*y), y*(x - (w*y)); output at the last node. Remaining columns
// are inert ADD(w, w) fillers.
Genome oja_genome(int n_columns = 12) {
  Genome g;
  g.n_inputs = 4;
  g.n_columns = n_columns;
  g.levels_back = n_columns;
  g.genes.assign(static_cast<std::size_t>(n_columns) * 3, 0);
  auto set_node = [&](int k, int fn, int a, int b) {
    g.genes[static_cast<std::size_t>(k) * 3] = fn;
    g.genes[static_cast<std::size_t>(k) * 3 + 1] = a;
    g.genes[static_cast<std::size_t>(k) * 3 + 2] = b;
  };
  set_node(0, 2, 0, 2);  // MUL(w, y)
  set_node(1, 1, 1, 4);  // SUB(x, node0)
  set_node(2, 2, 2, 5);  // MUL(y, node1)
  g.output_gene = 6;
  return g;
}

// Flat indices of genes feeding the decoded expression (output gene excluded).
std::set<int> active_gene_indices(const Genome& g) {
  std::set<int> active_nodes;
  std::vector<int> stack;
  auto push = [&](int idx) {
    if (idx >= g.n_inputs && !active_nodes.contains(idx - g.n_inputs)) {
      active_nodes.insert(idx - g.n_inputs);
      stack.push_back(idx - g.n_inputs);
    }
  };
  push(g.output_gene);
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    push(g.genes[static_cast<std::size_t>(j) * 3 + 1]);
    push(g.genes[static_cast<std::size_t>(j) * 3 + 2]);
  }
  std::set<int> out;
  for (const int j : active_nodes)
    for (int slot = 0; slot < 3; ++slot) out.insert(j * 3 + slot);
  return out;
}

double oja_formula(double w, double x, double y) { return y * (x - w * y); }

bool second_difference_linear_in_x(const RuleExpression& expr) {
  Rng rng(1234);
  for (int i = 0; i < 200; ++i) {
    const double w = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-2.0, 2.0);
    const double d = 0.5;
    const double second = expr.evaluate(w, x + 2 * d, y) - 2.0 * expr.evaluate(w, x + d, y) +
                          expr.evaluate(w, x, y);
    if (std::abs(second) > 1e-9) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("cgp");

TEST_CASE("decode maps output gene on a terminal to that terminal") {
  Genome g = oja_genome();
  g.output_gene = 1;
  const RuleExpression expr = decode(g);
  CHECK(to_infix(expr) == "x");
  CHECK(expr.evaluate(0.3, 1.7, -2.0) == 1.7);
}

TEST_CASE("decode recovers the Oja kernel from a hand-built genome") {
  const RuleExpression expr = decode(oja_genome());
  CHECK(to_infix(expr) == "(y * (x - (w * y)))");
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double w = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    CHECK(expr.evaluate(w, x, y) == doctest::Approx(oja_formula(w, x, y)).epsilon(1e-15));
  }
}

TEST_CASE("decode ignores inactive genes") {
  const Genome a = oja_genome();
  Genome b = a;
  b.genes[3 * 3] = 2;  // node 3 is unreachable from the output
  b.genes[3 * 3 + 1] = 6;
  b.genes[5 * 3 + 2] = 1;
  CHECK(to_infix(decode(a)) == to_infix(decode(b)));
}

TEST_CASE("decode rejects out-of-range genes naming the offender") {
  Genome g = oja_genome();
  g.genes[4] = 11;  // node 1 connection referencing a later node
  CHECK_THROWS_WITH_AS(decode(g), doctest::Contains("gene 4"), std::invalid_argument);

  Genome h = oja_genome();
  h.genes[0] = 3;  // function index beyond the operator set
  CHECK_THROWS_WITH_AS(decode(h), doctest::Contains("gene 0"), std::invalid_argument);

  Genome o = oja_genome();
  o.output_gene = 16;
  CHECK_THROWS_WITH_AS(decode(o), doctest::Contains("output gene"), std::invalid_argument);
}

TEST_CASE("evaluate matches hand arithmetic on the named kernels") {
  CHECK(decode(oja_genome()).evaluate(1.0, 1.0, 1.0) == 0.0);
  const RuleExpression lr2 = parse_rule("2.0*y*(x - w*y)");
  CHECK(lr2.evaluate(0.0, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  const RuleExpression lr3 = parse_rule("(-x)*(x - w*y)");
  CHECK(lr3.evaluate(0.5, 2.0, 1.0) == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("mutate leaves the parent untouched and is silent without draws") {
  const Genome parent = oja_genome();
  Rng rng(99);
  const Genome child = mutate(parent, 1e-12, rng);
  CHECK(child == parent);

  Rng rng2(100);
  Genome copy = parent;
  (void)mutate(copy, 1.0, rng2);
  CHECK(copy == parent);
}

TEST_CASE("mutations confined to inactive genes keep the phenotype") {
  const Genome parent = oja_genome();
  const auto active = active_gene_indices(parent);
  const std::string parent_form = to_infix(decode(parent));
  Rng rng(2024);
  int silent_cases = 0;
  for (int i = 0; i < 600; ++i) {
    const Genome child = mutate(parent, 0.1, rng);
    if (child.output_gene != parent.output_gene) continue;
    bool touched_active = false;
    for (std::size_t gi = 0; gi < child.genes.size(); ++gi)
      if (child.genes[gi] != parent.genes[gi] && active.contains(static_cast<int>(gi)))
        touched_active = true;
    if (touched_active) continue;
    ++silent_cases;
    CHECK(to_infix(decode(child)) == parent_form);
  }
  CHECK(silent_cases > 50);
}

TEST_CASE("mutated gene count matches the binomial expectation") {
  // 13 columns -> 40 genes including the output gene.
  Rng init(5);
  const Genome parent = random_genome(CgpLayout{4, 13, 13}, OperatorSet{}, init);
  REQUIRE(parent.genes.size() + 1 == 40);

  Rng rng(77);
  std::int64_t changed = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const Genome child = mutate(parent, 0.1, rng);
    for (std::size_t gi = 0; gi < child.genes.size(); ++gi)
      if (child.genes[gi] != parent.genes[gi]) ++changed;
    if (child.output_gene != parent.output_gene) ++changed;
  }
  const double mean = static_cast<double>(changed) / trials;
  CHECK(mean > 3.8);
  CHECK(mean < 4.2);
}

TEST_CASE("to_infix applies the simplification pass") {
  using Node = RuleExpression::Node;
  using Kind = RuleExpression::NodeKind;

  // 1.0 * x -> x
  {
    std::vector<Node> nodes(3);
    nodes[0] = {Kind::Constant, Op::Add, -1, -1, 1.0};
    nodes[1] = {Kind::X, Op::Add, -1, -1, 0.0};
    nodes[2] = {Kind::Binary, Op::Mul, 0, 1, 0.0};
    CHECK(to_infix(RuleExpression::from_nodes(nodes, 2)) == "x");
  }
  // y + (x - x) -> y
  {
    std::vector<Node> nodes(4);
    nodes[0] = {Kind::Y, Op::Add, -1, -1, 0.0};
    nodes[1] = {Kind::X, Op::Add, -1, -1, 0.0};
    nodes[2] = {Kind::Binary, Op::Sub, 1, 1, 0.0};
    nodes[3] = {Kind::Binary, Op::Add, 0, 2, 0.0};
    CHECK(to_infix(RuleExpression::from_nodes(nodes, 3)) == "y");
  }
  CHECK(to_infix(parse_rule("x - x")) == "0.0");
  CHECK(to_infix(parse_rule("0.0 * x")) == "0.0");
  CHECK(to_infix(decode(oja_genome())) == "(y * (x - (w * y)))");
}

TEST_CASE("parse_rule evaluates with standard precedence") {
  CHECK(parse_rule("y*(x - w*y)").evaluate(0.5, 1.0, 1.0) == doctest::Approx(0.5));
  const RuleExpression id = parse_rule("x");
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double w = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    CHECK(id.evaluate(w, x, y) == x);
  }
  CHECK(parse_rule("1.0 + 2.0*3.0").evaluate(0, 0, 0) == 7.0);
  CHECK(parse_rule("1.0 - 2.0 - 3.0").evaluate(0, 0, 0) == -4.0);
  CHECK(parse_rule("-x*y").evaluate(0.0, 2.0, 3.0) == -6.0);
}

TEST_CASE("parse_rule matches the lr1 closed form") {
  const RuleExpression parsed = parse_rule("(2*y + 1.0 + w)*(x - w*y)");
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double w = rng.uniform(-2.0, 2.0);
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double expected = (2.0 * y + 1.0 + w) * (x - w * y);
    CHECK(parsed.evaluate(w, x, y) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("parse_rule reports positions on syntax errors") {
  CHECK_THROWS_WITH_AS(parse_rule("x - "), doctest::Contains("position 4"), ParseError);
  try {
    parse_rule("x - ");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_AS(parse_rule("x + z"), ParseError);
  CHECK_THROWS_AS(parse_rule("(x + y"), ParseError);
  CHECK_THROWS_AS(parse_rule("x y"), ParseError);
  CHECK_THROWS_AS(parse_rule(""), ParseError);
  CHECK_THROWS_WITH_AS(parse_rule("1e999"), doctest::Contains("out of range"), ParseError);
}

TEST_CASE("decode/print/parse round trip over random genomes") {
  Rng rng(20240601);
  const CgpLayout layout{4, 12, 12};
  const OperatorSet ops;
  int checked = 0;
  for (int g = 0; g < 1000; ++g) {
    const Genome genome = random_genome(layout, ops, rng);
    const RuleExpression expr = decode(genome);
    const RuleExpression reparsed = parse_rule(to_infix(expr));
    for (int p = 0; p < 100; ++p) {
      const double w = rng.uniform(-2.0, 2.0);
      const double x = rng.uniform(-2.0, 2.0);
      const double y = rng.uniform(-2.0, 2.0);
      const double a = expr.evaluate(w, x, y);
      const double b = reparsed.evaluate(w, x, y);
      REQUIRE(std::isfinite(a));
      REQUIRE(std::abs(a - b) <= 1e-12);
      ++checked;
    }
  }
  CHECK(checked == 100000);
}

TEST_CASE("print/parse/print is idempotent on large genomes") {
  Rng rng(555);
  const CgpLayout layout{4, 192, 192};
  const OperatorSet ops;
  for (int g = 0; g < 50; ++g) {
    const Genome genome = random_genome(layout, ops, rng);
    const std::string printed = to_infix(decode(genome));
    CHECK(to_infix(parse_rule(printed)) == printed);
  }
}

TEST_CASE("decode is a pure function of the genome") {
  Rng rng(8);
  const Genome genome = random_genome(CgpLayout{4, 12, 12}, OperatorSet{}, rng);
  CHECK(to_infix(decode(genome)) == to_infix(decode(genome)));
}

TEST_CASE("second-difference linearity in x discriminates the named kernels") {
  CHECK(second_difference_linear_in_x(parse_rule("y*(x - w*y)")));
  CHECK(second_difference_linear_in_x(parse_rule("(2.0*y + 1.0 + w)*(x - w*y)")));
  CHECK(second_difference_linear_in_x(parse_rule("2.0*y*(x - w*y)")));
  // lr3 carries an x^2 term; so does lr4 once (y + w*x)*(x - w*y) is expanded.
  CHECK_FALSE(second_difference_linear_in_x(parse_rule("(-x)*(x - w*y)")));
  CHECK_FALSE(second_difference_linear_in_x(parse_rule("(y + w*x)*(x - w*y)")));
}

TEST_CASE("genome JSON round trip") {
  Rng rng(41);
  const Genome genome = random_genome(CgpLayout{4, 12, 12}, OperatorSet{}, rng);
  const Genome back = genome_from_json(genome_to_json(genome));
  CHECK(back == genome);
}

TEST_CASE("literals print in shortest round-trip form") {
  CHECK(to_infix(parse_rule("0.1 + 0.2")) == "0.30000000000000004");
  CHECK(to_infix(parse_rule("2.0 * 3.0")) == "6.0");
  CHECK(to_infix(parse_rule("1.5 * w * 2.0")) == "((1.5 * w) * 2.0)");
}

TEST_SUITE_END();
