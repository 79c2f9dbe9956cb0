#pragma once
// Random small instances for every differentiable op and both losses. A
// non-scalar op is reduced to a scalar with a fixed random weighting so
// every output element contributes a distinct upstream gradient.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "segforge/losses.hpp"

namespace oracle {

struct GradInstance {
  std::vector<segforge::Tensor<double>> inputs;
  Builder build;
};

struct GradCase {
  std::string name;
  std::function<GradInstance(std::mt19937_64&)> make;
};

inline int pick(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<GradCase> grad_cases() {
  using segforge::Shape;
  using segforge::Tensor;
  using segforge::ad::Tape;
  using segforge::ad::Var;
  namespace ad = segforge::ad;
  using Leaves = std::vector<Var<double>>;

  // Weighted reduction of an op output into a scalar loss.
  auto reduce = [](Var<double> v, const Tensor<double>& w) { return ad::weighted_sum(v, w); };

  std::vector<GradCase> cases;
  auto conv_case = [&](const char* name, ad::Padding padding, bool fused = false) {
    cases.push_back({name, [=](std::mt19937_64& rng) {
                       const int n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
                       const int k = padding == ad::Padding::same ? (pick(rng, 0, 1) ? 3 : 1) : pick(rng, 1, 3);
                       const int h = pick(rng, std::max(k, 2), 6), w = pick(rng, std::max(k, 2), 6);
                       const int oh = padding == ad::Padding::same ? h : h - k + 1;
                       const int ow = padding == ad::Padding::same ? w : w - k + 1;
                       const auto weights = random_tensor<double>(Shape::nchw(n, co, oh, ow), rng);
                       GradInstance g;
                       g.inputs = {random_tensor<double>(Shape::nchw(n, ci, h, w), rng),
                                   random_tensor<double>(Shape::nchw(co, ci, k, k), rng),
                                   random_tensor<double>(Shape{co}, rng)};
                       g.build = [=](Tape<double>&, const Leaves& l) {
                         return reduce(fused ? ad::conv2d_relu(l[0], l[1], l[2], padding)
                                             : ad::conv2d(l[0], l[1], l[2], padding),
                                       weights);
                       };
                       return g;
                     }});
  };
  conv_case("conv2d_same", ad::Padding::same);
  conv_case("conv2d_valid", ad::Padding::valid);
  conv_case("conv2d_relu", ad::Padding::same, true);

  auto unary = [&](const char* name, auto op, int even, double lo, double hi) {
    cases.push_back({name, [=](std::mt19937_64& rng) {
                       const int n = pick(rng, 1, 2), c = pick(rng, 1, 3);
                       const int h = pick(rng, 1, 4) * (even ? 2 : 1), w = pick(rng, 1, 4) * (even ? 2 : 1);
                       const Shape s = Shape::nchw(n, c, h, w);
                       GradInstance g;
                       g.inputs = {random_tensor<double>(s, rng, lo, hi)};
                       Tape<double> probe;
                       const Shape out = op(probe.constant(g.inputs[0])).shape();
                       const auto weights = random_tensor<double>(out, rng);
                       g.build = [=](Tape<double>&, const Leaves& l) { return reduce(op(l[0]), weights); };
                       return g;
                     }});
  };
  unary("relu", [](Var<double> v) { return ad::relu(v); }, 0, -1.0, 1.0);
  unary("sigmoid", [](Var<double> v) { return ad::sigmoid(v); }, 0, -4.0, 4.0);
  unary("maxpool2x2", [](Var<double> v) { return ad::maxpool2x2(v); }, 1, -1.0, 1.0);
  unary("upsample_nearest2x", [](Var<double> v) { return ad::upsample_nearest2x(v); }, 0, -1.0, 1.0);
  unary("scale", [](Var<double> v) { return ad::scale(v, -1.75); }, 0, -1.0, 1.0);

  cases.push_back({"concat_channels", [](std::mt19937_64& rng) {
                     const int n = pick(rng, 1, 2), c1 = pick(rng, 1, 3), c2 = pick(rng, 1, 3);
                     const int h = pick(rng, 1, 5), w = pick(rng, 1, 5);
                     const auto weights = random_tensor<double>(Shape::nchw(n, c1 + c2, h, w), rng);
                     GradInstance g;
                     g.inputs = {random_tensor<double>(Shape::nchw(n, c1, h, w), rng),
                                 random_tensor<double>(Shape::nchw(n, c2, h, w), rng)};
                     g.build = [=](Tape<double>&, const Leaves& l) {
                       return ad::weighted_sum(ad::concat_channels(l[0], l[1]), weights);
                     };
                     return g;
                   }});
  cases.push_back({"add", [](std::mt19937_64& rng) {
                     const Shape s = Shape::nchw(pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5));
                     const auto weights = random_tensor<double>(s, rng);
                     GradInstance g;
                     g.inputs = {random_tensor<double>(s, rng), random_tensor<double>(s, rng)};
                     g.build = [=](Tape<double>&, const Leaves& l) {
                       return ad::weighted_sum(ad::add(l[0], l[1]), weights);
                     };
                     return g;
                   }});
  auto scalar_op = [&](const char* name, auto op) {
    cases.push_back({name, [=](std::mt19937_64& rng) {
                       const Shape s = Shape::nchw(pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5));
                       GradInstance g;
                       g.inputs = {random_tensor<double>(s, rng)};
                       g.build = [=](Tape<double>&, const Leaves& l) { return op(l[0]); };
                       return g;
                     }});
  };
  scalar_op("sum", [](Var<double> v) { return ad::sum(v); });
  scalar_op("mean", [](Var<double> v) { return ad::mean(v); });
  cases.push_back({"weighted_sum", [](std::mt19937_64& rng) {
                     const Shape s = Shape::nchw(pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5));
                     const auto weights = random_tensor<double>(s, rng);
                     GradInstance g;
                     g.inputs = {random_tensor<double>(s, rng)};
                     g.build = [=](Tape<double>&, const Leaves& l) { return ad::weighted_sum(l[0], weights); };
                     return g;
                   }});

  auto loss_case = [&](const char* name, auto loss) {
    cases.push_back({name, [=](std::mt19937_64& rng) {
                       const Shape s = Shape::nchw(pick(rng, 1, 3), 1, pick(rng, 2, 6), pick(rng, 2, 6));
                       Tensor<double> truth(s);
                       std::bernoulli_distribution bit(0.5);
                       for (auto& v : truth.storage()) v = bit(rng) ? 1.0 : 0.0;
                       GradInstance g;
                       // probabilities kept away from the BCE clamp
                       g.inputs = {random_tensor<double>(s, rng, 0.05, 0.95)};
                       g.build = [=](Tape<double>&, const Leaves& l) { return loss(l[0], truth); };
                       return g;
                     }});
  };
  loss_case("soft_dice_loss", [](Var<double> p, const Tensor<double>& t) { return segforge::soft_dice_loss(p, t); });
  loss_case("bce_loss", [](Var<double> p, const Tensor<double>& t) { return segforge::bce_loss(p, t); });
  return cases;
}

struct CaseSummary {
  std::string name;
  int passed = 0;
  int attempted = 0;
  int rejected_near_kink = 0;
  double worst = 0.0;
};

// Draws instances until `instances` of them clear the kink margin, then
// counts how many meet the tolerance.
inline CaseSummary run_case(const GradCase& c, int instances, double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CaseSummary s;
  s.name = c.name;
  while (s.attempted < instances) {
    if (s.rejected_near_kink > 50 * instances) break;
    const GradInstance g = c.make(rng);
    const GradCheck r = grad_check(g.inputs, g.build);
    if (r.near_kink) {
      ++s.rejected_near_kink;
      continue;
    }
    ++s.attempted;
    s.worst = std::max(s.worst, r.rel_error);
    if (r.rel_error <= tol) ++s.passed;
  }
  return s;
}

}  // namespace oracle
