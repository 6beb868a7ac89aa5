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

#include "modeflow/control/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "modeflow/tensorcore/error.hpp"
#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::control {

double total_jerk(std::span<const synthenv::Vec2> p, double dt) {
  const std::size_t n = p.size();
  if (n < 4) throw ValidationError("total_jerk needs at least 4 position samples");
  if (!(dt > 0)) throw ValidationError("total_jerk needs dt > 0");
  const double h3 = dt * dt * dt;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double j2 = 0.0;
    for (std::size_t d = 0; d < 2; ++d) {
      double j;
      if (i >= 2 && i + 2 < n) {
        j = (p[i + 2][d] - 2 * p[i + 1][d] + 2 * p[i - 1][d] - p[i - 2][d]) / (2 * h3);
      } else {
        // One-sided: the nearest four-sample window inside the path.
        const std::size_t s = std::min(i, n - 4);
        j = (p[s + 3][d] - 3 * p[s + 2][d] + 3 * p[s + 1][d] - p[s][d]) / h3;
      }
      j2 += j * j;
    }
    sum += j2 * dt;
  }
  return sum;
}

double total_jerk(const Trajectory& traj) { return total_jerk(traj.positions, traj.dt); }

double mode_switch_rate(std::span<const std::size_t> modes) {
  if (modes.size() < 2) throw ValidationError("mode_switch_rate needs at least 2 replans");
  std::size_t sw = 0;
  for (std::size_t i = 1; i < modes.size(); ++i) sw += modes[i] != modes[i - 1];
  return static_cast<double>(sw) / static_cast<double>(modes.size() - 1);
}

namespace {

std::vector<std::size_t> modes_of(const Trajectory& traj) {
  std::vector<std::size_t> out;
  for (const auto& r : traj.replans) {
    if (!r.mode) throw ValidationError("replan without a mode label");
    out.push_back(*r.mode);
  }
  return out;
}

}  // namespace

double mode_switch_rate(const Trajectory& traj) { return mode_switch_rate(modes_of(traj)); }

MetricReport summarize(const std::vector<Trajectory>& trajs, const std::string& policy,
                       const std::string& env, std::uint64_t seed) {
  if (trajs.empty()) throw ValidationError("summarize: no episodes");
  MetricReport r;
  r.policy = policy;
  r.env = env;
  r.seed = seed;
  r.episodes = trajs.size();
  double jerk_sum = 0.0, jerk_sq = 0.0, steps = 0.0;
  std::size_t constant = 0, labeled = 0;
  for (const auto& t : trajs) {
    r.successes += t.success;
    r.collisions += t.reason == Termination::kCollision;
    const double j = total_jerk(t);
    jerk_sum += j;
    jerk_sq += j * j;
    steps += static_cast<double>(t.actions.size());
    const bool has_modes = std::all_of(t.replans.begin(), t.replans.end(),
                                       [](const Replan& p) { return p.mode.has_value(); });
    if (has_modes && !t.replans.empty()) {
      const auto m = modes_of(t);
      ++labeled;
      std::size_t sw = 0;
      for (std::size_t i = 1; i < m.size(); ++i) sw += m[i] != m[i - 1];
      r.switches += sw;
      r.switch_pairs += m.size() - 1;
      constant += sw == 0;
    }
  }
  const double n = static_cast<double>(r.episodes);
  r.success_rate = static_cast<double>(r.successes) / n;
  r.jerk_mean = jerk_sum / n;
  r.jerk_std = r.episodes > 1 ? std::sqrt(std::max(0.0, (jerk_sq - n * r.jerk_mean * r.jerk_mean) /
                                                            (n - 1.0)))
                              : 0.0;
  r.switch_rate = r.switch_pairs > 0 ? static_cast<double>(r.switches) /
                                           static_cast<double>(r.switch_pairs)
                                     : 0.0;
  r.mode_constancy = labeled > 0 ? static_cast<double>(constant) / static_cast<double>(labeled) : 0.0;
  r.mean_steps = steps / n;
  return r;
}

Evaluation evaluate(const Controller& controller, const synthenv::EnvSpec& env,
                    const EvalConfig& config, const Labeler& labeler) {
  if (config.episodes == 0) throw ValidationError("evaluate: episodes must be >= 1");
  const std::size_t horizon = config.horizon > 0 ? config.horizon : env.horizon;
  std::size_t workers = config.workers > 0 ? config.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, config.episodes);

  Evaluation ev;
  ev.trajectories.resize(config.episodes);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < config.episodes; i = next++) {
      try {
        ev.trajectories[i] = rollout(controller, env, config.seed, i, horizon, labeler);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  ev.report = summarize(ev.trajectories, controller.name, env.name, config.seed);
  return ev;
}

TrackingError chunk_tracking_error(const policy::Policy& pfdag, const synthenv::Dataset& ds,
                                   std::size_t max_samples, Rng& rng) {
  if (pfdag.kind() != policy::PolicyKind::kPfdag) {
    throw ValidationError("chunk tracking error needs a pfdag policy");
  }
  const auto& tok = *pfdag.tokenizer();
  const Tensor chunks = vqtok::chunk_matrix(ds);
  const auto steps = synthenv::all_steps(ds);
  const std::size_t n = max_samples > 0 ? std::min(max_samples, steps.size()) : steps.size();
  if (n == 0) throw ValidationError("chunk tracking error: empty dataset");
  const auto labels = tok.assign(chunks);
  const Tensor protos = tok.prototypes();
  const std::size_t f = chunks.cols();
  TrackingError out;
  out.samples = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = ds.demos[steps[i].demo];
    const auto row = d.proprio.row_span(steps[i].t);
    const Tensor emb = pfdag.embedding(Tensor::row(std::vector<double>(row.begin(), row.end())));
    const Tensor delta = policy::sample_residual(pfdag, emb, labels[i], rng);
    const auto target = chunks.row_span(i);
    const auto proto = protos.row_span(labels[i]);
    for (std::size_t j = 0; j < f; ++j) {
      const double e0 = proto[j] - target[j];
      const double e1 = proto[j] + delta[j] - target[j];
      out.prototype += e0 * e0;
      out.policy += e1 * e1;
    }
  }
  const double denom = static_cast<double>(n * f);
  out.prototype /= denom;
  out.policy /= denom;
  return out;
}

std::string report_csv_header() {
  return "policy,env,seed,episodes,successes,collisions,success_rate,jerk_mean,jerk_std,"
         "switch_pairs,switches,switch_rate,mode_constancy,mean_steps\n";
}

std::string report_csv_row(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%llu,%zu,%zu,%zu,%.6f,%.10g,%.10g,%zu,%zu,%.6f,%.6f,%.4f\n",
                r.policy.c_str(), r.env.c_str(), static_cast<unsigned long long>(r.seed),
                r.episodes, r.successes, r.collisions, r.success_rate, r.jerk_mean, r.jerk_std,
                r.switch_pairs, r.switches, r.switch_rate, r.mode_constancy, r.mean_steps);
  return buf;
}

std::string report_summary(const MetricReport& r) {
  char buf[768];
  std::snprintf(buf, sizeof buf,
                "policy          %s\n"
                "env             %s (seed %llu, %zu episodes)\n"
                "success rate    %.3f (%zu/%zu, %zu collisions)\n"
                "total jerk      %.4g +- %.4g\n"
                "mode switches   %.3f (%zu of %zu replan pairs)\n"
                "mode constancy  %.3f\n"
                "mean steps      %.2f\n",
                r.policy.c_str(), r.env.c_str(), static_cast<unsigned long long>(r.seed),
                r.episodes, r.success_rate, r.successes, r.episodes, r.collisions, r.jerk_mean,
                r.jerk_std, r.switch_rate, r.switches, r.switch_pairs, r.mode_constancy,
                r.mean_steps);
  return buf;
}

std::string trajectories_csv(const std::vector<Trajectory>& trajs) {
  std::string out = "episode,t,x,y,ax,ay,replan,mode,outcome\n";
  char buf[256];
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    const auto& tr = trajs[e];
    std::map<std::size_t, const Replan*> at;
    for (const auto& r : tr.replans) at[r.t] = &r;
    const std::string outcome = termination_name(tr.reason);
    for (std::size_t t = 0; t < tr.positions.size(); ++t) {
      const bool has_action = t < tr.actions.size();
      const auto it = at.find(t);
      const bool replan = has_action && it != at.end();
      const long mode = replan && it->second->mode ? static_cast<long>(*it->second->mode) : -1;
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%d,%ld,%s\n", e, t,
                    tr.positions[t][0], tr.positions[t][1], has_action ? tr.actions[t][0] : 0.0,
                    has_action ? tr.actions[t][1] : 0.0, replan ? 1 : 0, mode, outcome.c_str());
      out += buf;
    }
  }
  return out;
}

std::vector<Trajectory> parse_trajectories_csv(const std::string& text, double dt) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "episode,t,x,y,ax,ay,replan,mode,outcome") {
    throw FormatError("trajectory csv: bad header");
  }
  std::vector<Trajectory> out;
  std::vector<std::size_t> rows_seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw FormatError("trajectory csv: expected 9 fields");
    try {
      const std::size_t e = std::stoul(f[0]), t = std::stoul(f[1]);
      if (e == out.size()) {
        out.emplace_back();
        out.back().dt = dt;
      }
      if (e + 1 != out.size() || t != out.back().positions.size()) {
        throw FormatError("trajectory csv: rows out of order");
      }
      Trajectory& tr = out.back();
      tr.positions.push_back({std::stod(f[2]), std::stod(f[3])});
      if (f[6] == "1") {
        const long m = std::stol(f[7]);
        tr.replans.push_back({t, m >= 0 ? std::optional<std::size_t>(m) : std::nullopt, Tensor()});
      }
      tr.actions.push_back({std::stod(f[4]), std::stod(f[5])});
      tr.success = f[8] == "success";
      tr.reason = f[8] == "success"     ? Termination::kSuccess
                  : f[8] == "collision" ? Termination::kCollision
                                        : Termination::kHorizon;
    } catch (const std::logic_error&) {
      throw FormatError("trajectory csv: malformed number in '" + line + "'");
    }
  }
  // The last row of each episode is the final position and has no action.
  for (auto& tr : out) {
    if (!tr.actions.empty()) tr.actions.pop_back();
  }
  return out;
}

}  // namespace modeflow::control
