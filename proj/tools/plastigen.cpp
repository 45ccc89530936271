// plastigen command-line tool: evolve plasticity rules, score them on held-out
// task families, generate datasets and export phase-plane analyses.
//
// Exit codes: 0 success, 1 runtime/I/O failure, 2 usage or validation error.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "plastigen/analysis.hpp"
#include "plastigen/cgp.hpp"
#include "plastigen/evolve.hpp"
#include "plastigen/fitness.hpp"
#include "plastigen/format.hpp"
#include "plastigen/parallel.hpp"
#include "plastigen/plasticity.hpp"
#include "plastigen/tasks.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("failed to read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// --rule accepts a builtin name, expr:SOURCE, or file:PATH (champion JSON or
// a plain rule-DSL file).
plastigen::PlasticityRule rule_from_token(const std::string& token) {
  using namespace plastigen;
  for (const auto& name : builtin_rule_names())
    if (token == name) return builtin_rule(token);
  if (token.rfind("expr:", 0) == 0) {
    RuleExpression expr = parse_rule(std::string_view(token).substr(5));
    return {std::move(expr), token};
  }
  if (token.rfind("file:", 0) == 0) {
    const fs::path path = token.substr(5);
    const std::string content = read_text_file(path);
    if (path.extension() == ".json") {
      const auto j = json::parse(content);
      if (j.contains("genome"))
        return {decode(genome_from_json(j.at("genome").dump())), token};
      if (j.contains("expression"))
        return {parse_rule(j.at("expression").get<std::string>()), token};
      throw std::invalid_argument(path.string() +
                                  ": expected a champion file with a genome or expression");
    }
    return {parse_rule(trimmed(content)), token};
  }
  throw std::invalid_argument(
      "unknown rule '" + token +
      "'; expected a builtin (oja, lr1, lr2, lr3, lr4), expr:SOURCE or file:PATH");
}

struct EvolveArgs {
  std::string family = "t0";
  std::uint64_t seed = 1;
  int generations = 1000;
  int mu = 4;
  int lambda = 16;
  double mutation_rate = 0.03;
  int k = 10;
  int m = 1000;
  double eta = 0.01;
  double alpha = plastigen::kSearchAlpha;
  std::string out;
  bool reseed_datasets = false;
  bool empirical_pc = false;
};

json evolve_config_json(const EvolveArgs& a) {
  json cfg;
  cfg["family"] = a.family;
  cfg["seed"] = a.seed;
  cfg["generations"] = a.generations;
  cfg["mu"] = a.mu;
  cfg["lambda"] = a.lambda;
  cfg["mutation_rate"] = a.mutation_rate;
  cfg["k"] = a.k;
  cfg["m"] = a.m;
  cfg["eta"] = a.eta;
  cfg["alpha"] = a.alpha;
  cfg["reseed_datasets"] = a.reseed_datasets;
  cfg["empirical_pc"] = a.empirical_pc;
  return cfg;
}

int cmd_evolve(const EvolveArgs& args) {
  using namespace plastigen;
  const fs::path out_dir = args.out;
  fs::create_directories(out_dir);

  json manifest;
  manifest["tool"] = "plastigen";
  manifest["version"] = kVersion;
  manifest["command"] = "evolve";
  manifest["master_seed"] = args.seed;
  manifest["config"] = evolve_config_json(args);
  manifest["outputs"] = {{"manifest", "manifest.json"},
                         {"generations", "generations.jsonl"},
                         {"champion", "champion.json"}};
  manifest["started_utc"] = utc_timestamp();
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  EvolutionConfig cfg;
  cfg.mu = args.mu;
  cfg.lambda = args.lambda;
  cfg.generations = args.generations;
  cfg.per_gene_rate = args.mutation_rate;
  cfg.master_seed = args.seed;
  cfg.family = family_from_name(args.family);
  cfg.fitness = {args.alpha, args.eta, args.k, args.m};
  cfg.reseed_datasets_every_generation = args.reseed_datasets;
  cfg.pc_ref = args.empirical_pc ? PcReference::Empirical : PcReference::Generator;

  std::ofstream generations(out_dir / "generations.jsonl", std::ios::binary);
  if (!generations)
    throw std::runtime_error("failed to open " + (out_dir / "generations.jsonl").string());
  const auto on_generation = [&](const GenerationRecord& record) {
    generations << generation_record_json(record) << '\n';
    generations.flush();
    if (!generations) throw std::runtime_error("failed to append generation record");
  };

  const EvolutionResult result = run(cfg, 0, on_generation);

  const std::string expression = to_infix(result.champion.kernel);
  write_text_file(out_dir / "champion.json",
                  champion_json(result.champion_genome, expression, result.champion_fitness));

  manifest["finished_utc"] = utc_timestamp();
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "champion: " << expression << "\n"
            << "fitness:  " << format_double(result.champion_fitness) << "\n";
  return 0;
}

struct EvalArgs {
  std::vector<std::string> rules;
  std::vector<std::string> families;
  int n_eval = 100;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  using namespace plastigen;
  std::vector<PlasticityRule> rules;
  for (const auto& token : args.rules) rules.push_back(rule_from_token(token));

  std::vector<Family> families;
  if (args.families.empty()) {
    families = {Family::T0, Family::T1, Family::T2};
  } else {
    for (const auto& name : args.families) families.push_back(family_from_name(name));
  }

  const FitnessConfig cfg;
  const auto entries =
      generalization_matrix(rules, families, args.n_eval, cfg, args.seed);
  save_generalization_csv(entries, args.out);
  return 0;
}

struct PhasePlaneArgs {
  std::string rule = "lr3";
  double var1 = 1.0;
  double var2 = 0.9;
  double cov = 0.3;
  double box = 2.0;
  int grid = 20;
  int mc_samples = 100000;
  std::vector<std::string> trajectories;
  std::string out;
};

Eigen::Vector2d parse_start(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("trajectory start must be 'w1,w2', got '" + text + "'");
  const auto w1 = plastigen::parse_double(trimmed(text.substr(0, comma)));
  const auto w2 = plastigen::parse_double(trimmed(text.substr(comma + 1)));
  if (!w1 || !w2)
    throw std::invalid_argument("trajectory start must be 'w1,w2', got '" + text + "'");
  return {*w1, *w2};
}

int cmd_phase_plane(const PhasePlaneArgs& args) {
  using namespace plastigen;
  if (!(args.var1 > 0.0 && args.var2 > 0.0 &&
        args.var1 * args.var2 - args.cov * args.cov > 0.0))
    throw std::invalid_argument("covariance not positive definite");

  Eigen::Matrix2d sigma;
  sigma << args.var1, args.cov, args.cov, args.var2;

  VectorField field;
  if (args.rule == "lr3") {
    field = lr3_closed_form_field(sigma);
  } else {
    const PlasticityRule rule = rule_from_token(args.rule);
    field = monte_carlo_field(rule, sigma, args.mc_samples,
                              plastigen::derive_seed(0, "phase-plane-field", 0));
  }

  const fs::path out_dir = args.out;
  fs::create_directories(out_dir);
  const Box box = Box::centered(args.box);

  save_phase_plane_csv(phase_plane(field, box, args.grid), out_dir / "field.csv");
  write_text_file(out_dir / "fixed_points.json",
                  fixed_points_json(find_fixed_points(field, box, args.grid)));

  constexpr double kStep = 0.01;
  constexpr int kMaxSteps = 100000;
  for (std::size_t i = 0; i < args.trajectories.size(); ++i) {
    const Eigen::Vector2d start = parse_start(args.trajectories[i]);
    const TrajectoryResult traj = integrate_trajectory(field, start, kStep, kMaxSteps);
    save_trajectory_csv(traj, out_dir / ("trajectory_" + std::to_string(i) + ".csv"));
  }
  return 0;
}

struct GenDataArgs {
  std::string family = "t0";
  int n = 2;
  int m = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
  using namespace plastigen;
  const Dataset dataset =
      make_dataset(family_from_name(args.family), args.n, args.m, args.seed);
  save_dataset(dataset, args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plastigen: evolves synaptic plasticity rules for online PCA tasks "
               "and analyzes their expected dynamics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  EvolveArgs evolve_args;
  auto* evolve = app.add_subcommand("evolve", "Run a (mu+lambda) evolutionary search");
  evolve->add_option("--family", evolve_args.family, "Task family: t0, t1 or t2")
      ->check(CLI::IsMember({"t0", "t1", "t2"}));
  evolve->add_option("--seed", evolve_args.seed, "Master seed");
  evolve->add_option("--generations", evolve_args.generations, "Offspring generations")
      ->check(CLI::NonNegativeNumber);
  evolve->add_option("--mu", evolve_args.mu, "Parent count")->check(CLI::PositiveNumber);
  evolve->add_option("--lambda", evolve_args.lambda, "Offspring count")
      ->check(CLI::PositiveNumber);
  evolve->add_option("--mutation-rate", evolve_args.mutation_rate, "Per-gene mutation rate");
  evolve->add_option("--k", evolve_args.k, "Datasets per fitness evaluation")
      ->check(CLI::PositiveNumber);
  evolve->add_option("--m", evolve_args.m, "Trials per dataset")->check(CLI::PositiveNumber);
  evolve->add_option("--eta", evolve_args.eta, "Learning rate");
  evolve->add_option("--alpha", evolve_args.alpha, "Weight-norm regularizer strength");
  evolve->add_option("--out", evolve_args.out, "Output directory")->required();
  evolve->add_flag("--reseed-datasets", evolve_args.reseed_datasets,
                   "Draw a fresh dataset batch every generation");
  evolve->add_flag("--empirical-pc", evolve_args.empirical_pc,
                   "Score against the empirical PC of the samples instead of the "
                   "generating covariance");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score rules on held-out datasets per family");
  eval->add_option("--rule", eval_args.rules,
                   "Rule: builtin name, expr:SOURCE or file:PATH (repeatable)")
      ->required();
  eval->add_option("--family", eval_args.families, "Task family (repeatable; default all)")
      ->check(CLI::IsMember({"t0", "t1", "t2"}));
  eval->add_option("--n-eval", eval_args.n_eval, "Held-out datasets per family")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_args.seed, "Master seed for held-out datasets");
  eval->add_option("--out", eval_args.out, "Output CSV file")->required();

  PhasePlaneArgs pp_args;
  auto* pp = app.add_subcommand("phase-plane",
                                "Export the expected-update field, fixed points and "
                                "sample trajectories of a rule");
  pp->add_option("--rule", pp_args.rule, "Rule: builtin name, expr:SOURCE or file:PATH");
  pp->add_option("--var1", pp_args.var1, "Var[x1]");
  pp->add_option("--var2", pp_args.var2, "Var[x2]");
  pp->add_option("--cov", pp_args.cov, "Cov[x1, x2]");
  pp->add_option("--box", pp_args.box, "Half-width of the [-box, box]^2 window");
  pp->add_option("--grid", pp_args.grid, "Grid points per axis")->check(CLI::PositiveNumber);
  pp->add_option("--mc-samples", pp_args.mc_samples,
                 "Monte-Carlo samples for rules without a closed form");
  pp->add_option("--trajectory", pp_args.trajectories,
                 "Euler trajectory start 'w1,w2' (repeatable)");
  pp->add_option("--out", pp_args.out, "Output directory")->required();

  GenDataArgs gd_args;
  auto* gd = app.add_subcommand("gen-data", "Generate and save one dataset");
  gd->add_option("--family", gd_args.family, "Task family: t0, t1 or t2")
      ->check(CLI::IsMember({"t0", "t1", "t2"}));
  gd->add_option("--n", gd_args.n, "Input dimension")->check(CLI::PositiveNumber);
  gd->add_option("--m", gd_args.m, "Sample count")->check(CLI::PositiveNumber);
  gd->add_option("--seed", gd_args.seed, "Dataset seed");
  gd->add_option("--out", gd_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (evolve->parsed()) return cmd_evolve(evolve_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (pp->parsed()) return cmd_phase_plane(pp_args);
    if (gd->parsed()) return cmd_gen_data(gd_args);
    return 2;
  } catch (const plastigen::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
