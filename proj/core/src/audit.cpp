#include "darcn/audit.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <utility>

#include "darcn/gradcheck.hpp"
#include "darcn/layers.hpp"
#include "darcn/model.hpp"
#include "darcn/ops.hpp"

namespace darcn {

namespace {

using Leaves = std::vector<std::pair<std::string, Tensor>>;

Tensor leaf(const Shape& shape, Rng& rng, double stddev = 1.0) {
  Tensor t = Tensor::randn(shape, rng, stddev);
  t.set_requires_grad(true);
  return t;
}

// keeps |x| away from the relu kink so central differences stay valid
Tensor kink_safe_leaf(const Shape& shape, Rng& rng) {
  Tensor t = Tensor::randn(shape, rng);
  for (double& v : t.data()) v = (v < 0.0 ? -1.0 : 1.0) * (0.2 + std::fabs(v));
  t.set_requires_grad(true);
  return t;
}

struct Audit {
  Rng rng;
  double tol;
  AuditReport report;

  Audit(std::uint64_t seed, double tol) : rng(seed), tol(tol) { report.tolerance = tol; }

  void run(const std::string& name, const std::function<Tensor()>& loss, const Leaves& leaves,
           std::size_t stride = 1) {
    GradCheckResult r = finite_diff_check(loss, leaves, 1e-5, stride);
    if (r.max_rel_err > tol) {
      // central differences straddling an activation kink are biased at the
      // default step; a genuinely wrong gradient fails at any step
      r = finite_diff_check(loss, leaves, 3e-7, stride);
    }
    report.rows.push_back({name, r.max_rel_err, r.checked, r.max_rel_err <= tol, r.worst});
  }
};

void collect_trainable(ParamList& params, Leaves& out) {
  for (NamedParam& p : params)
    if (p.trainable) out.emplace_back(p.name, p.tensor);
}

}  // namespace

bool AuditReport::all_pass() const {
  for (const AuditRow& r : rows)
    if (!r.pass) return false;
  return true;
}

std::string AuditReport::table() const {
  std::string out = "op                     max_rel_err   checked  status\n";
  char buf[96];
  for (const AuditRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s %11.3e %9zu  %s%s%s\n", r.name.c_str(), r.max_rel_err,
                  r.checked, r.pass ? "ok" : "FAIL", r.pass ? "" : "  worst ",
                  r.pass ? "" : r.worst.c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "tolerance %.1e, %s\n", tolerance,
                all_pass() ? "all ops within tolerance" : "TOLERANCE EXCEEDED");
  out += buf;
  return out;
}

AuditReport gradient_audit(std::uint64_t seed, std::size_t e2e_stride, double tol) {
  Audit a(seed, tol);
  Rng& rng = a.rng;

  {
    Tensor x = leaf({2, 3, 4}, rng), y = leaf({3, 1}, rng);
    Tensor w = Tensor::randn({2, 3, 4}, rng);
    a.run("add", [&] { return sum(mul(add(x, y), w)); }, {{"x", x}, {"y", y}});
  }
  {
    Tensor x = leaf({2, 3}, rng), y = leaf({2, 3}, rng);
    Tensor w = Tensor::randn({2, 3}, rng);
    a.run("sub", [&] { return sum(mul(sub(x, y), w)); }, {{"x", x}, {"y", y}});
  }
  {
    Tensor x = leaf({2, 3, 4}, rng), y = leaf({3, 4}, rng);
    Tensor w = Tensor::randn({2, 3, 4}, rng);
    a.run("mul", [&] { return sum(mul(mul(x, y), w)); }, {{"x", x}, {"y", y}});
  }
  {
    Tensor x = leaf({3, 4}, rng);
    Tensor w = Tensor::randn({3, 4}, rng);
    a.run("scalar_ops",
          [&] { return sum(mul(rsub_scalar(1.0, mul_scalar(add_scalar(x, 0.3), 1.7)), w)); },
          {{"x", x}});
  }
  {
    Tensor x = leaf({2, 5}, rng);
    Tensor w = Tensor::randn({2, 5}, rng);
    a.run("sigmoid", [&] { return sum(mul(sigmoid(x), w)); }, {{"x", x}});
    a.run("tanh", [&] { return sum(mul(tanh_act(x), w)); }, {{"x", x}});
    a.run("softplus", [&] { return sum(mul(softplus(x), w)); }, {{"x", x}});
  }
  {
    Tensor x = kink_safe_leaf({2, 6}, rng);
    Tensor w = Tensor::randn({2, 6}, rng);
    a.run("relu", [&] { return sum(mul(relu(x), w)); }, {{"x", x}});
    a.run("elu", [&] { return sum(mul(elu(x), w)); }, {{"x", x}});
  }
  {
    Tensor x = leaf({3, 4}, rng);
    a.run("sum", [&] { return sum(x); }, {{"x", x}});
    a.run("mean", [&] { return mean(x); }, {{"x", x}});
  }
  {
    Tensor x = leaf({2, 3, 4}, rng);
    Tensor w = Tensor::randn({4, 2, 3}, rng);
    a.run("reshape_permute",
          [&] { return sum(mul(permute(reshape(x, {2, 3, 4}), {2, 0, 1}), w)); }, {{"x", x}});
  }
  {
    Tensor x = leaf({2, 2, 3}, rng), y = leaf({2, 1, 3}, rng), z = leaf({2, 3, 3}, rng);
    Tensor w = Tensor::randn({2, 6, 3}, rng);
    a.run("concat", [&] { return sum(mul(concat({x, y, z}, 1), w)); },
          {{"x", x}, {"y", y}, {"z", z}});
  }
  {
    Tensor x = leaf({2, 5, 6}, rng);
    Tensor w = Tensor::randn({2, 3, 2}, rng);
    a.run("slice", [&] { return sum(mul(slice(x, {{0, 2}, {1, 4}, {2, 4}}), w)); }, {{"x", x}});
  }
  {
    Tensor x = leaf({2, 3, 5, 6}, rng);
    Tensor kw = leaf({4, 3, 2, 3}, rng, 0.3);
    Tensor kb = leaf({4}, rng, 0.3);
    Pad2 pad{1, 0, 1, 1};
    Tensor out_probe = conv2d(x, kw, kb, 1, 2, pad, 2, 1);
    Tensor w = Tensor::randn(out_probe.shape(), rng);
    a.run("conv2d", [&] { return sum(mul(conv2d(x, kw, kb, 1, 2, pad, 2, 1), w)); },
          {{"x", x}, {"w", kw}, {"b", kb}});
  }
  {
    Tensor x = leaf({2, 3, 4, 5}, rng);
    Tensor kw = leaf({3, 2, 2, 3}, rng, 0.3);
    Tensor kb = leaf({2}, rng, 0.3);
    Pad2 trim{0, 1, 1, 0};
    Tensor out_probe = conv_transpose2d(x, kw, kb, 1, 2, trim, 0, 1);
    Tensor w = Tensor::randn(out_probe.shape(), rng);
    a.run("conv_transpose2d",
          [&] { return sum(mul(conv_transpose2d(x, kw, kb, 1, 2, trim, 0, 1), w)); },
          {{"x", x}, {"w", kw}, {"b", kb}});
  }
  {
    Tensor x = leaf({2, 3, 4, 5}, rng);
    Tensor gamma = leaf({3}, rng, 0.2);
    Tensor beta = leaf({3}, rng, 0.2);
    for (double& v : gamma.data()) v += 1.0;
    Tensor w = Tensor::randn({2, 3, 4, 5}, rng);
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    a.run("batch_norm_train",
          [&] {
            std::vector<double> m = rm, v = rv;
            return sum(mul(batch_norm(x, gamma, beta, m, v, true), w));
          },
          {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    std::vector<double> fm = {0.1, -0.2, 0.3}, fv = {1.4, 0.6, 2.0};
    a.run("batch_norm_eval",
          [&] { return sum(mul(batch_norm(x, gamma, beta, fm, fv, false), w)); },
          {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  }
  {
    GluBlock block(4, 3, 3, 2, rng);
    Tensor x = leaf({2, 4, 6}, rng);
    Tensor w = Tensor::randn({2, 4, 6}, rng);
    Leaves leaves{{"x", x}};
    ParamList params;
    block.collect("glu", params);
    collect_trainable(params, leaves);
    a.run("glu_block", [&] { return sum(mul(block.forward(x), w)); }, leaves);
  }
  {
    ConvGruCell cell(3, rng);
    Tensor h_hat = leaf({2, 3, 4, 5}, rng);
    Tensor h_prev = leaf({2, 3, 4, 5}, rng);
    Tensor w = Tensor::randn({2, 3, 4, 5}, rng);
    Leaves leaves{{"h_hat", h_hat}, {"h_prev", h_prev}};
    ParamList params;
    cell.collect("gru", params);
    collect_trainable(params, leaves);
    a.run("conv_gru", [&] { return sum(mul(cell.step(h_hat, h_prev), w)); }, leaves);
  }
  {
    AttentionGate gate(6, 4, rng);
    Tensor p = leaf({2, 6, 3, 4}, rng);
    Tensor q = leaf({2, 4, 3, 4}, rng);
    Tensor w = Tensor::randn({2, 4, 3, 4}, rng);
    Leaves leaves{{"p", p}, {"q", q}};
    ParamList params;
    gate.collect("ag", params);
    collect_trainable(params, leaves);
    a.run("attention_gate", [&] { return sum(mul(gate.forward(p, q, true), w)); }, leaves);
  }
  {
    ArchConfig cfg = ArchConfig::tiny();
    cfg.stages = 2;
    Rng init = rng.fork(77);
    DarcnModel model(cfg, init);
    Tensor input = Tensor::uniform({1, 3, cfg.feature_len}, rng, 0.05, 1.0);
    Tensor target = Tensor::uniform({1, 3, cfg.feature_len}, rng, 0.05, 1.0);
    Tensor mask = Tensor::ones({1, 3});
    Leaves leaves;
    ParamList params = model.trainable_parameters();
    collect_trainable(params, leaves);
    a.run("end_to_end_two_stage",
          [&] {
            auto traces = model.forward(input, cfg.stages, true);
            return model.accumulated_loss(traces, target, mask);
          },
          leaves, e2e_stride);
  }

  return a.report;
}

}  // namespace darcn
