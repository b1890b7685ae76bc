// Experiment runner: builds model channels, runs the verification and
// information-theoretic pipelines, and writes JSON/CSV reports.
//
// Exit codes: 0 success, 2 invalid configuration (message names the field),
// 3 numerical failure (partial report flagged when one can be written).

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdarwin/io.hpp"
#include "qdarwin/selftest.hpp"

using namespace qdarwin;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
  std::string format;
  std::optional<int> budget;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON experiment configuration");
  cmd->add_option("--seed", args.seed, "Override the config seed");
  cmd->add_option("--out", args.out, "Write the report to this path (default stdout)");
  cmd->add_option("--format", args.format, "Report format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--budget", args.budget, "Override the optimizer budget");
}

io::ExperimentConfig load_config(const CommonArgs& args) {
  io::json j = io::json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in)
      throw ValidationError("config: cannot open '" + args.config_path + "'");
    try {
      j = io::json::parse(in);
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
  }
  auto cfg = io::config_from_json(j);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.output_path = args.out;
  if (!args.format.empty()) cfg.format = args.format;
  if (args.budget) {
    cfg.optimizer_budget = *args.budget;
    cfg.restarts = std::max(1, *args.budget / 4);
  }
  io::apply_tolerances(cfg.tolerances);
  return cfg;
}

int run_verify(const io::ExperimentConfig& cfg, Index t) {
  SeededRng rng(cfg.seed);
  auto ch = io::build_model(cfg, rng);
  auto rep = verify_subsets(ch, t, cfg.delta, cfg.k, rng);
  rep.model = cfg.model;

  bool partial = false;
  for (const auto& rec : rep.per_fragment)
    if (!rec.solver_error.empty()) partial = true;

  if (cfg.format == "csv") {
    io::write_text(cfg.output_path, io::report_to_csv(rep));
  } else {
    auto j = io::report_to_json(rep);
    if (partial) j["partial"] = true;
    io::write_text(cfg.output_path, j.dump(2) + "\n");
  }
  return partial ? 3 : 0;
}

int run_agreement(const io::ExperimentConfig& cfg) {
  SeededRng rng(cfg.seed);
  auto ch = io::build_model(cfg, rng);
  auto ext = extract_pointer_povm(ch, cfg.k, ProbeStrategy{}, rng);
  auto maps = build_map_approximations(ext);

  std::vector<Index> observers;
  for (Index j = 0; j < ext.n_fragments && static_cast<Index>(observers.size()) <
                                               cfg.agreement_t; ++j) {
    if (std::find(ext.probed.begin(), ext.probed.end(), j) == ext.probed.end())
      observers.push_back(j);
  }
  if (observers.empty())
    throw ValidationError("config.agreement_t: no unprobed fragments left");

  std::vector<MeasurePrepareChannel> fragments;
  for (Index j : observers) fragments.push_back(maps.at(j));
  std::vector<DensityMatrix> joint;
  std::vector<Index> choi_factors;
  for (Index j : observers) choi_factors.push_back(j + 1);
  for (Index z = 0; z < ext.outcome_probs.size(); ++z)
    joint.push_back(ext.conditional_reduced(z, choi_factors));

  AgreementOptions opts;
  auto rep = outcome_agreement(fragments, joint, opts, rng);
  auto j = io::agreement_to_json(rep);
  j["model"] = cfg.model;
  j["observers"] = observers;
  j["seed"] = cfg.seed;
  io::write_text(cfg.output_path, j.dump(2) + "\n");
  return 0;
}

int run_discord(const io::ExperimentConfig& cfg) {
  SeededRng rng(cfg.seed);
  auto rho = io::build_state(cfg, rng);
  DiscordOptions opts;
  opts.outcomes = cfg.povm_outcomes;
  opts.restarts = cfg.restarts;
  auto res = discord(rho, opts, rng);
  auto j = io::discord_to_json(res, opts.outcomes ? opts.outcomes : 4, opts.restarts,
                               cfg.seed);
  j["state"] = cfg.state;
  io::write_text(cfg.output_path, j.dump(2) + "\n");
  return 0;
}

int run_broadcast(const io::ExperimentConfig& cfg) {
  SeededRng rng(cfg.seed);
  auto rho = io::build_state(cfg, rng);
  std::vector<Index> ns = cfg.ns;
  auto rep = corollary4_experiment(rho, ns, cfg.optimizer_budget, rng);
  auto j = io::broadcast_to_json(rep, cfg.seed);
  j["state"] = cfg.state;
  io::write_text(cfg.output_path, j.dump(2) + "\n");
  return 0;
}

int run_models(const io::ExperimentConfig& cfg) {
  SeededRng rng(cfg.seed);
  auto ch = io::build_model(cfg, rng);
  auto j = io::channel_to_json(ch);
  j["model"] = cfg.model;
  io::write_text(cfg.output_path, j.dump(2) + "\n");
  return 0;
}

int run_selftest(const std::vector<std::string>& suites, bool corrupt) {
  if (corrupt) tol().eig_residual = 1e-30;  // negative-control hook
  auto results = selftest::run_suites(suites);
  bool all_ok = true;
  for (const auto& suite : results) {
    int passed = 0;
    for (const auto& c : suite.checks) passed += c.passed ? 1 : 0;
    std::printf("[%s] %-13s %d/%zu checks\n", suite.passed() ? "PASS" : "FAIL",
                suite.module.c_str(), passed, suite.checks.size());
    for (const auto& c : suite.checks)
      if (!c.passed)
        std::printf("       failed: %s (%s)\n", c.name.c_str(), c.message.c_str());
    all_ok = all_ok && suite.passed();
  }
  return all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale verification toolkit for fragment channels, pointer "
               "measurements, outcome agreement and correlation redistribution"};
  app.require_subcommand(1);

  CommonArgs verify1_args, verify2_args, agree_args, discord_args, broadcast_args,
      models_args;
  std::vector<std::string> suites;
  bool corrupt = false;

  auto* verify1 = app.add_subcommand("verify-t1", "Per-fragment verification report");
  add_common(verify1, verify1_args);
  auto* verify2 = app.add_subcommand("verify-t2", "Subset verification report");
  add_common(verify2, verify2_args);
  auto* agree = app.add_subcommand("agreement", "Observer agreement report");
  add_common(agree, agree_args);
  auto* disc = app.add_subcommand("discord", "Discord upper bound for a named state");
  add_common(disc, discord_args);
  auto* bcast = app.add_subcommand("broadcast", "Correlation redistribution experiment");
  add_common(bcast, broadcast_args);
  auto* models = app.add_subcommand("models", "Serialize the configured model channel");
  add_common(models, models_args);
  auto* st = app.add_subcommand("selftest", "Run the module invariant suites");
  st->add_option("--suite", suites, "Run only the named suite(s)");
  st->add_flag("--inject-tolerance-corruption", corrupt,
               "Test hook: corrupt a tolerance so a suite must fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  try {
    if (verify1->parsed()) {
      auto cfg = load_config(verify1_args);
      return run_verify(cfg, 1);
    }
    if (verify2->parsed()) {
      auto cfg = load_config(verify2_args);
      return run_verify(cfg, cfg.t.value_or(2));
    }
    if (agree->parsed()) return run_agreement(load_config(agree_args));
    if (disc->parsed()) return run_discord(load_config(discord_args));
    if (bcast->parsed()) return run_broadcast(load_config(broadcast_args));
    if (models->parsed()) return run_models(load_config(models_args));
    if (st->parsed()) return run_selftest(suites, corrupt);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 2;
}
