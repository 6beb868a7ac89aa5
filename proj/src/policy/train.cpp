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

#include "modeflow/policy/train.hpp"

#include <cmath>
#include <cstdio>

#include "modeflow/nets/adamw.hpp"
#include "modeflow/nets/schedule.hpp"
#include "modeflow/tensorcore/error.hpp"
#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::policy {

using nets::BoundParams;

void validate(const TrainConfig& c) {
  if (c.epochs == 0 || c.batch == 0) throw ValidationError("train: epochs and batch must be positive");
  if (!(c.lr > 0)) throw ValidationError("train: learning rate must be positive");
  if (!(c.weight_decay >= 0)) throw ValidationError("train: weight decay must be >= 0");
  if (c.warmup_epochs >= c.epochs) throw ValidationError("train: warmup must be shorter than training");
  if (!(c.equal_prob >= 0 && c.equal_prob <= 1)) {
    throw ValidationError("train: equal_prob must lie in [0, 1]");
  }
}

namespace {

Tensor take_rows(const Tensor& src, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), src.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = src.row_span(rows[i]);
    std::copy(s.begin(), s.end(), out.row_span(i).begin());
  }
  return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& src, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(src[r]);
  return out;
}

// Normalized proprio of every step, [N, d_s].
Tensor proprio_matrix(const synthenv::Dataset& ds) {
  const auto steps = synthenv::all_steps(ds);
  const std::size_t d = ds.env.state_dim;
  Tensor out({steps.size(), d});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto n = synthenv::normalize_proprio(
        ds.stats, ds.demos[steps[i].demo].proprio.row_span(steps[i].t));
    std::copy(n.begin(), n.end(), out.row_span(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train_policy(const synthenv::Dataset& ds, const PolicyConfig& config,
                         std::optional<vqtok::Tokenizer> tokenizer, const TrainConfig& train,
                         Rng& rng, const EpochHook& hook) {
  validate(train);
  if (ds.chunk_len != config.chunk_len || ds.env.action_dim != config.action_dim) {
    throw ShapeError("train: dataset chunk shape differs from the policy config");
  }
  TrainResult res{Policy(config, std::move(tokenizer), ds.stats, ds.points, rng), {}};
  Policy& pol = res.policy;
  const PolicyConfig& c = pol.config();
  const bool modes = selects_mode(c);
  const bool flow = has_field(c);
  const bool meanflow = c.kind == PolicyKind::kPfdag || c.kind == PolicyKind::kMeanflowSingle;

  const Tensor obs = proprio_matrix(ds);
  const Tensor chunks = vqtok::chunk_matrix(ds);
  const std::size_t n = chunks.rows();
  if (n == 0) throw ValidationError("train: empty dataset");

  // Labels come from the frozen tokenizer; they do not change during
  // training, so they are computed once.
  std::vector<std::size_t> labels;
  Tensor targets = chunks;
  if (modes) {
    labels = pol.tokenizer()->assign(chunks);
    const Tensor protos = pol.tokenizer()->prototypes();
    for (std::size_t i = 0; i < n; ++i) {
      auto row = targets.row_span(i);
      auto p = protos.row_span(labels[i]);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] -= p[j];
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  nets::AdamW opt({0.9, 0.999, 1e-8, train.weight_decay}, pol.params());
  const std::size_t per_epoch = (n + train.batch - 1) / train.batch;
  const nets::ScheduleConfig sched{per_epoch * train.warmup_epochs, per_epoch * train.epochs,
                                   train.lr};
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLoss acc;
    for (std::size_t b = 0; b < n; b += train.batch) {
      const auto rows = std::span(order).subspan(b, std::min(train.batch, n - b));
      const std::size_t bs = rows.size();
      Graph g;
      BoundParams p(g, pol.params(), true);
      Var emb = pol.embed(p, pol.observe_normalized(take_rows(obs, rows)));
      const std::vector<std::size_t> y = modes ? take(labels, rows) : std::vector<std::size_t>{};
      std::optional<Var> ce, gen;
      std::size_t correct = 0;

      if (modes) {
        Var logits = pol.pm_logits(p, emb);
        ce = g.scale(g.sum(g.gather_cols(g.log_softmax(logits), y)), -1.0 / static_cast<double>(bs));
        const Tensor& lv = g.value(logits);
        for (std::size_t i = 0; i < bs; ++i) correct += pm_select(lv.row_span(i)) == y[i];
      }
      if (c.kind == PolicyKind::kBc) {
        gen = mean_sqdist(g, pol.regress(p, emb), take_rows(chunks, rows));
      }
      if (flow) {
        Tensor tau, r;
        if (meanflow) {
          std::tie(tau, r) = sample_intervals(bs, rng, train.equal_prob);
        } else {
          // Flow matching: tau = r, uniform.
          tau = Tensor({bs, 1});
          for (std::size_t i = 0; i < bs; ++i) tau[i] = rng.uniform();
          r = tau;
        }
        Tensor z0 = rng.normal_tensor({bs, c.flat()});
        const FlowSample s = make_flow_sample(take_rows(targets, rows), std::move(z0),
                                              std::move(tau), std::move(r));
        Var zv = g.input(s.z_r), tv = g.input(s.tau), rv = g.input(s.r);
        Var u = pol.field(p, zv, tv, rv, emb, y);
        Tensor target = s.v;
        if (meanflow) {
          g.jvp({{zv, s.v}, {rv, Tensor::full(s.r.shape(), 1.0)}});
          target = meanflow_target_from(s, g.tangent(u));
        }
        gen = mean_sqdist(g, u, target);
      }

      Var total = ce && gen ? g.add(*ce, *gen) : (ce ? *ce : *gen);
      g.backward(total);
      const double w = static_cast<double>(bs) / static_cast<double>(n);
      acc.total += w * g.value(total)[0];
      if (ce) acc.classify += w * g.value(*ce)[0];
      if (gen) acc.generate += w * g.value(*gen)[0];
      acc.accuracy += static_cast<double>(correct) / static_cast<double>(n);
      opt.step(pol.params(), p.grads(), nets::lr_at(++step, sched));
    }
    if (!std::isfinite(acc.total)) throw NonFiniteError("policy training: non-finite loss");
    res.curve.push_back(acc);
    if (hook) hook(epoch, pol);
  }
  return res;
}

std::string loss_csv(const std::vector<EpochLoss>& curve) {
  std::string out = "epoch,total,classify,generate,accuracy\n";
  char buf[160];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& e = curve[i];
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.6f\n", i, e.total, e.classify,
                  e.generate, e.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace modeflow::policy
