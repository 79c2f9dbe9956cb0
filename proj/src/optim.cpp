#include "segforge/optim.hpp"

#include <cmath>

#include "segforge/kernels.hpp"

namespace segforge {

void TrainConfig::validate() const {
  if (epochs < 1) throw usage_error("epochs must be >= 1");
  if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw usage_error("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw usage_error("adam_beta1 must lie in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw usage_error("adam_beta2 must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw usage_error("adam_eps must be > 0");
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ModelParams<T>& params) {
  AdamState s;
  for (const auto& e : params.entries) {
    s.m.push_back(Tensor<T>::zeros(e.value.shape()));
    s.v.push_back(Tensor<T>::zeros(e.value.shape()));
  }
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& config) {
  const std::size_t n = params.entries.size();
  if (grads.size() != n) throw ShapeError("adam_step", "parameter_count", static_cast<long long>(n), static_cast<long long>(grads.size()));
  if (state.m.empty() && state.v.empty() && state.step == 0) state = AdamState<T>::zeros_like(params);
  if (state.m.size() != n || state.v.size() != n)
    throw ShapeError("adam_step", "state_count", static_cast<long long>(n), static_cast<long long>(state.m.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const Shape& s = params.entries[i].value.shape();
    if (grads[i].shape() != s)
      throw ShapeError("adam_step", params.entries[i].name, "gradient shape " + grads[i].shape().str() + " vs " + s.str());
    if (state.m[i].shape() != s || state.v[i].shape() != s)
      throw ShapeError("adam_step", params.entries[i].name, "moment shape does not match parameter");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const kernels::AdamCoeffs<T> c{
      static_cast<T>(config.adam_beta1),
      static_cast<T>(config.adam_beta2),
      static_cast<T>(config.adam_eps),
      static_cast<T>(config.learning_rate),
      static_cast<T>(1.0 - std::pow(config.adam_beta1, t)),
      static_cast<T>(1.0 - std::pow(config.adam_beta2, t)),
  };
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = params.entries[i].value;
    kernels::adam_update<T>(p.data(), grads[i].data(), state.m[i].data(), state.v[i].data(),
                            static_cast<std::size_t>(p.numel()), c);
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ModelParams<float>&, const std::vector<Tensor<float>>&,
                               AdamState<float>&, const TrainConfig&);
template void adam_step<double>(ModelParams<double>&, const std::vector<Tensor<double>>&,
                                AdamState<double>&, const TrainConfig&);

}  // namespace segforge
