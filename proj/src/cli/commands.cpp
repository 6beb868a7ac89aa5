// Copyright 2026 The modeflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modeflow/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "modeflow/cli/manifest.hpp"
#include "modeflow/cli/pipeline.hpp"
#include "modeflow/cli/verify.hpp"
#include "modeflow/tensorcore/error.hpp"

#ifndef MODEFLOW_VERSION
#define MODEFLOW_VERSION "0.0.0"
#endif

namespace modeflow::cli {

namespace fs = std::filesystem;

std::string policy_file(const std::string& kind) { return "policy-" + kind + ".mfck"; }
std::string losses_file(const std::string& kind) { return "losses-" + kind + ".csv"; }

const std::vector<std::string>& all_kinds() {
  static const std::vector<std::string> kinds{"pfdag", "bc", "cfm", "meanflow-single", "vq-only"};
  return kinds;
}

namespace {

// Flags shared by every verb that reads a config.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;

  ExperimentConfig config() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& s : sets) set_key(c, s);
    validate(c);
    return c;
  }
  std::string out_dir() const {
    if (!out.empty()) return out;
    if (const char* env = std::getenv(kOutEnv); env && *env) return env;
    return "modeflow-out";
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "flat JSON config file");
  app->add_option("--set", c.sets, "key=value override (repeatable)");
  app->add_option("--out", c.out, std::string("output directory (default $") + kOutEnv + ")");
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

class Run {
 public:
  Run(std::string command, std::string dir, const ExperimentConfig& c)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    m_.command = std::move(command);
    m_.config = config_json(c);
    m_.tool_version = MODEFLOW_VERSION;
  }
  void write(const std::string& name, std::string_view bytes) {
    write_artifact(m_, dir_, name, bytes);
    std::cout << "wrote " << path_in(dir_, name) << "\n";
  }
  // The manifest is named after the command so runs of different verbs in
  // one directory do not overwrite each other's records.
  void finish(const std::string& tag) {
    m_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file(path_in(dir_, "manifest-" + tag + ".json"), manifest_json(m_));
  }

 private:
  std::string dir_;
  RunManifest m_;
  std::chrono::steady_clock::time_point start_;
};

synthenv::Dataset load_data(const std::string& dir) {
  return synthenv::parse_dataset(read_file(path_in(dir, kDatasetFile)));
}

vqtok::Tokenizer load_tokenizer(const std::string& dir) {
  const std::string path = path_in(dir, kVqFile);
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing prerequisite " + path + ": run the vq stage first");
  }
  return vqtok::Tokenizer::read(nets::Checkpoint::parse(read_file(path)), "tok/");
}

policy::Policy load_policy(const std::string& dir, const std::string& kind) {
  const std::string path = path_in(dir, policy_file(kind));
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing artifact " + path + ": train kind '" + kind + "' first");
  }
  return policy::Policy::from_checkpoint(nets::Checkpoint::parse(read_file(path)),
                                         policy::parse_kind(kind));
}

int cmd_gen_data(const Common& o) {
  const ExperimentConfig c = o.config();
  // make_dataset validates before anything touches the disk.
  const synthenv::Dataset ds = make_dataset(c);
  Run run("gen-data", o.out_dir(), c);
  run.write(kDatasetFile, synthenv::serialize_dataset(ds));
  run.write("dataset.csv", synthenv::dataset_csv(ds));
  run.finish("gen-data");
  return kExitOk;
}

int cmd_train(const Common& o, const std::string& stage) {
  const ExperimentConfig c = o.config();
  const std::string dir = o.out_dir();
  const synthenv::Dataset ds = load_data(dir);
  Run run("train --stage " + stage, dir, c);
  std::optional<vqtok::Tokenizer> tok;
  if (stage == "vq" || stage == "all") {
    auto t = train_tokenizer(c, ds);
    nets::Checkpoint ck;
    ck.set_meta("artifact", "tokenizer");
    t.tokenizer.write(ck, "tok/");
    run.write(kVqFile, ck.serialize());
    if (!t.curve.empty()) run.write("vq-curve.csv", vq_curve_csv(t.curve));
    tok = std::move(t.tokenizer);
  }
  if (stage == "joint" || stage == "all") {
    // Stage order is enforced for every kind: the frozen tokenizer also
    // labels the modes of mode-less baselines at evaluation time.
    if (!tok) tok = load_tokenizer(dir);
    if (tok->modes() != c.codes) {
      throw ValidationError("train: vq artifact has " + std::to_string(tok->modes()) +
                            " codes, config asks for " + std::to_string(c.codes));
    }
    policy::EpochHook hook;
    if (c.checkpoint_every > 0) {
      hook = [&](std::size_t epoch, const policy::Policy& p) {
        if ((epoch + 1) % c.checkpoint_every != 0 || epoch + 1 == c.epochs) return;
        run.write("policy-" + c.kind + "-epoch" + std::to_string(epoch + 1) + ".mfck",
                  p.to_checkpoint().serialize());
      };
    }
    const auto res = train_bundle(c, ds, tok, hook);
    run.write(policy_file(c.kind), res.policy.to_checkpoint().serialize());
    run.write(losses_file(c.kind), policy::loss_csv(res.curve));
  }
  run.finish("train-" + stage + (stage == "vq" ? "" : "-" + c.kind));
  return kExitOk;
}

std::string report_csv(const std::vector<control::MetricReport>& reports) {
  std::string out = control::report_csv_header();
  for (const auto& r : reports) out += control::report_csv_row(r);
  return out;
}

policy::ActOptions act_options(const std::string& solver) {
  policy::ActOptions a;
  if (!solver.empty()) a.solver = policy::parse_solver(solver);
  return a;
}

int cmd_eval(const Common& o, bool compare, const std::string& replay, const std::string& solver) {
  const ExperimentConfig c = o.config();
  const std::string dir = o.out_dir();
  if (!replay.empty()) {
    // Metrics recomputed from a trajectory dump; nothing is simulated.
    const auto trajs = control::parse_trajectories_csv(read_file(replay), env_spec(c).dt);
    const auto report = control::summarize(trajs, c.kind, c.env, c.eval_seed);
    std::cout << control::report_csv_header() << control::report_csv_row(report);
    return kExitOk;
  }
  const vqtok::Tokenizer tok = load_tokenizer(dir);
  const std::vector<std::string> kinds = compare ? all_kinds() : std::vector{c.kind};
  // Load everything before running anything, so a missing bundle fails fast.
  std::vector<policy::Policy> policies;
  for (const auto& k : kinds) policies.push_back(load_policy(dir, k));
  Run run(compare ? "eval --compare" : "eval", dir, c);
  std::vector<control::MetricReport> reports;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto ev = evaluate_bundle(c, policies[i], &tok, policies[i].stats(), act_options(solver));
    std::cerr << control::report_summary(ev.report) << "\n";
    reports.push_back(ev.report);
    if (!compare) run.write("trajectories-" + kinds[i] + ".csv", control::trajectories_csv(ev.trajectories));
  }
  run.write(compare ? "compare.csv" : "metrics-" + c.kind + ".csv", report_csv(reports));
  run.finish(compare ? "eval-compare" : "eval-" + c.kind);
  return kExitOk;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// One full in-memory pipeline per value. Sweeps over evaluation-only keys
// (solver, exec_len) train once and reuse the bundle.
int cmd_ablate(const Common& o, const std::string& param, const std::string& values) {
  static const std::vector<std::string> allowed{"codes", "solver", "exec_len", "tokenizer"};
  if (std::find(allowed.begin(), allowed.end(), param) == allowed.end()) {
    throw ValidationError("ablate: --param must be one of codes, solver, exec_len, tokenizer");
  }
  const auto vals = split(values);
  if (vals.empty()) throw ValidationError("ablate: --values is empty");
  const ExperimentConfig base = o.config();
  std::vector<ExperimentConfig> configs;
  for (const auto& v : vals) {
    ExperimentConfig c = base;
    set_key(c, param + "=" + v);
    validate(c);
    configs.push_back(c);
  }
  const bool eval_only = param == "solver" || param == "exec_len";
  const synthenv::Dataset ds = make_dataset(base);
  std::optional<vqtok::Tokenizer> tok;
  std::optional<policy::Policy> pol;
  Run run("ablate --param " + param + " --values " + values, o.out_dir(), base);
  std::string csv = "value," + control::report_csv_header();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ExperimentConfig& c = configs[i];
    if (!eval_only || !pol) {
      tok = train_tokenizer(c, ds).tokenizer;
      pol = train_bundle(c, ds, tok).policy;
    }
    policy::ActOptions opts;
    if (param == "solver") opts.solver = policy::parse_solver(c.solver);
    const auto ev = evaluate_bundle(c, *pol, &*tok, pol->stats(), opts);
    std::cerr << param << "=" << vals[i] << ": " << control::report_summary(ev.report) << "\n";
    csv += vals[i] + "," + control::report_csv_row(ev.report);
  }
  run.write("ablate-" + param + ".csv", csv);
  run.finish("ablate-" + param);
  return kExitOk;
}

int cmd_verify(const VerifyOptions& v) {
  const VerifyReport r = run_verify(v);
  std::cout << r.text();
  if (r.ok()) {
    std::cout << "verify: all " << r.lines.size() << " checks passed\n";
    return kExitOk;
  }
  for (const auto& f : r.failures()) std::cerr << "verify: FAILED " << f << "\n";
  return kExitVerification;
}

int cmd_export_pca(const Common& o) {
  const ExperimentConfig c = o.config();
  const std::string dir = o.out_dir();
  const synthenv::Dataset ds = load_data(dir);
  const vqtok::Tokenizer tok = load_tokenizer(dir);
  Run run("export-pca", dir, c);
  run.write("pca.csv", pca_csv(ds, tok));
  run.finish("export-pca");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"modeflow: mode-selecting flow policies on synthetic tasks"};
  app.name("modeflow");
  app.require_subcommand(1);
  app.set_version_flag("--version", MODEFLOW_VERSION);

  Common common;
  auto* gen = app.add_subcommand("gen-data", "generate expert demonstrations");
  add_common(gen, common);

  std::string stage = "all";
  auto* train = app.add_subcommand("train", "train the tokenizer and/or a policy");
  add_common(train, common);
  train->add_option("--stage", stage, "vq | joint | all")
      ->check(CLI::IsMember({"vq", "joint", "all"}));

  bool compare = false;
  std::string replay, solver;
  auto* eval = app.add_subcommand("eval", "roll out a trained policy");
  add_common(eval, common);
  eval->add_flag("--compare", compare, "evaluate every kind on shared seeds into compare.csv");
  eval->add_option("--replay", replay, "recompute metrics from a trajectory dump");
  eval->add_option("--solver", solver, "override the cfm sampler (euler<N> | dopri5)");

  std::string param, values;
  auto* ablate = app.add_subcommand("ablate", "sweep one key through the full pipeline");
  add_common(ablate, common);
  ablate->add_option("--param", param, "codes | solver | exec_len | tokenizer")->required();
  ablate->add_option("--values", values, "comma-separated values")->required();

  VerifyOptions vopt;
  std::string fault;
  auto* verify = app.add_subcommand("verify", "gradient, variance and target identity checks");
  verify->add_option("--seed", vopt.seed);
  verify->add_option("--networks", vopt.networks, "random networks in the gradient suite");
  verify->add_option("--inject-fault", fault, "perturb the reverse rule of this op");

  auto* pca = app.add_subcommand("export-pca", "2-D PCA of chunks with their codes");
  add_common(pca, common);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common);
    if (train->parsed()) return cmd_train(common, stage);
    if (eval->parsed()) return cmd_eval(common, compare, replay, solver);
    if (ablate->parsed()) return cmd_ablate(common, param, values);
    if (verify->parsed()) {
      if (!fault.empty()) vopt.fault_op = fault;
      return cmd_verify(vopt);
    }
    if (pca->parsed()) return cmd_export_pca(common);
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace modeflow::cli
