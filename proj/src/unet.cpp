#include "segforge/unet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace segforge {

std::vector<std::string> UNetConfig::violations() const {
  std::vector<std::string> v;
  if (depth < 1) v.push_back("depth must be >= 1");
  if (depth > 12) v.push_back("depth must be <= 12");
  if (base_channels < 1) v.push_back("base_channels must be >= 1");
  if (convs_per_block < 1) v.push_back("convs_per_block must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) v.push_back("kernel_size must be a positive odd integer");
  if (in_channels != 1) v.push_back("in_channels must be 1 (grayscale)");
  if (out_channels != 1) v.push_back("out_channels must be 1 (lung probability)");
  if (input_h < 1 || input_w < 1) v.push_back("input size must be positive");
  if (depth >= 1 && depth <= 12) {
    const int div = 1 << depth;
    if (input_h % div != 0 || input_w % div != 0)
      v.push_back("input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                  " must be divisible by 2^depth = " + std::to_string(div));
  }
  return v;
}

void UNetConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid UNetConfig:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw usage_error(msg);
}

std::vector<ConvSpec> layer_plan(const UNetConfig& cfg) {
  std::vector<ConvSpec> plan;
  const int k = cfg.kernel_size;
  int ch = cfg.in_channels;
  for (int level = 0; level < cfg.depth; ++level) {
    const int out = cfg.channels_at(level);
    for (int j = 0; j < cfg.convs_per_block; ++j) {
      plan.push_back({"enc" + std::to_string(level) + ".conv" + std::to_string(j), ch, out, k, true});
      ch = out;
    }
  }
  const int bottom = cfg.channels_at(cfg.depth);
  for (int j = 0; j < cfg.convs_per_block; ++j) {
    plan.push_back({"bottleneck.conv" + std::to_string(j), ch, bottom, k, true});
    ch = bottom;
  }
  for (int level = cfg.depth - 1; level >= 0; --level) {
    const int out = cfg.channels_at(level);
    const std::string prefix = "dec" + std::to_string(level);
    plan.push_back({prefix + ".up", ch, out, k, true});
    ch = 2 * out;  // skip + upsampled
    for (int j = 0; j < cfg.convs_per_block; ++j) {
      plan.push_back({prefix + ".conv" + std::to_string(j), ch, out, k, true});
      ch = out;
    }
  }
  plan.push_back({"head", ch, cfg.out_channels, 1, false});
  return plan;
}

template <typename T>
const Tensor<T>& ModelParams<T>::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.value;
  throw runtime_error("ModelParams: no parameter named '" + name + "'");
}

template <typename T>
Tensor<T>& ModelParams<T>::at(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e.value;
  throw runtime_error("ModelParams: no parameter named '" + name + "'");
}

template <typename T>
std::int64_t ModelParams<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.value.numel();
  return n;
}

template <typename T>
ModelParams<T> build_unet(const UNetConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams<T> params{config, {}};
  std::mt19937_64 rng(seed);
  for (const auto& spec : layer_plan(config)) {
    const int fan_in = spec.in_channels * spec.kernel * spec.kernel;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    Tensor<T> w(Shape::nchw(spec.out_channels, spec.in_channels, spec.kernel, spec.kernel));
    for (auto& v : w.span()) v = static_cast<T>(dist(rng));
    params.entries.push_back({spec.name + ".weight", std::move(w)});
    params.entries.push_back({spec.name + ".bias", Tensor<T>(Shape{spec.out_channels})});
  }
  return params;
}

template <typename T>
std::vector<ad::Var<T>> attach(ad::Tape<T>& tape, const ModelParams<T>& params,
                               bool requires_grad) {
  std::vector<ad::Var<T>> vars;
  vars.reserve(params.entries.size());
  for (const auto& e : params.entries) vars.push_back(tape.leaf(e.value, requires_grad));
  return vars;
}

template <typename T>
ad::Var<T> unet_forward(const UNetConfig& config, const std::vector<ad::Var<T>>& params,
                        ad::Var<T> x) {
  const auto plan = layer_plan(config);
  if (params.size() != 2 * plan.size())
    throw runtime_error("unet_forward: expected " + std::to_string(2 * plan.size()) +
                        " parameter tensors, got " + std::to_string(params.size()));
  const Shape& xs = x.shape();
  require_rank4(xs, "unet_forward");
  if (xs.c() != config.in_channels) throw ShapeError("unet_forward", "channels", config.in_channels, xs.c());
  const std::int64_t div = std::int64_t{1} << config.depth;
  if (xs.h() % div) throw ShapeError("unet_forward", "height", "must be divisible by " + std::to_string(div));
  if (xs.w() % div) throw ShapeError("unet_forward", "width", "must be divisible by " + std::to_string(div));

  std::size_t layer = 0;
  auto conv = [&](ad::Var<T> in) {
    const auto& spec = plan[layer];
    const auto& w = params[2 * layer];
    const auto& b = params[2 * layer + 1];
    ++layer;
    return spec.relu ? ad::conv2d_relu(in, w, b) : ad::conv2d(in, w, b);
  };

  std::vector<ad::Var<T>> skips;
  ad::Var<T> h = x;
  for (int level = 0; level < config.depth; ++level) {
    for (int j = 0; j < config.convs_per_block; ++j) h = conv(h);
    skips.push_back(h);
    h = ad::maxpool2x2(h);
  }
  for (int j = 0; j < config.convs_per_block; ++j) h = conv(h);
  for (int level = config.depth - 1; level >= 0; --level) {
    h = conv(ad::upsample_nearest2x(h));
    const auto& skip = skips[static_cast<std::size_t>(level)];
    const Shape& a = skip.shape();
    const Shape& b = h.shape();
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
      throw ShapeError("unet_forward", "skip@" + std::to_string(level),
                       "encoder " + a.str() + " vs decoder " + b.str());
    h = ad::concat_channels(skip, h);
    for (int j = 0; j < config.convs_per_block; ++j) h = conv(h);
  }
  return ad::sigmoid(conv(h));
}

template <typename T>
Tensor<T> predict(const ModelParams<T>& params, const Tensor<T>& x) {
  ad::Tape<T> tape;
  auto vars = attach(tape, params, false);
  auto out = unet_forward(params.config, vars, tape.constant(x));
  return out.value();
}

// ---- serialization -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'E', 'G', 'F'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void value(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void value(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  void bytes(std::uint64_t v, int n) {
    char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os_.write(b, n);
  }
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
  std::uint64_t bytes(int n, const char* what) {
    unsigned char b[8];
    is_.read(reinterpret_cast<char*>(b), n);
    if (is_.gcount() != n) truncated(what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(bytes(4, what)); }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) truncated(what);
    return s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw data_error("model file " + path_ + ": " + msg);
  }

 private:
  [[noreturn]] void truncated(const char* what) const { fail(std::string("truncated while reading ") + what); }
  std::istream& is_;
  std::string path_;
};

}  // namespace

template <typename T>
void save_model(const ModelParams<T>& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw data_error("cannot open model file for writing: " + path.string());
  Writer w(os);
  w.raw(kMagic, 4);
  w.u32(kModelFormatVersion);
  const auto& c = params.config;
  for (int v : {c.depth, c.base_channels, c.convs_per_block, c.kernel_size, c.in_channels,
                c.out_channels, c.input_h, c.input_w})
    w.i32(v);
  w.u32(sizeof(T));
  w.u32(static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    const Shape& s = e.value.shape();
    w.u32(static_cast<std::uint32_t>(s.rank()));
    for (int i = 0; i < s.rank(); ++i) w.u64(static_cast<std::uint64_t>(s[i]));
    for (auto v : e.value.span()) w.value(v);
  }
  os.flush();
  if (!os) throw runtime_error("failed writing model file: " + path.string());
}

template <typename T>
ModelParams<T> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open model file: " + path.string());
  Reader r(is, path.string());
  if (r.str(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic bytes (not a segforge model)");
  const auto version = r.u32("version");
  if (version != kModelFormatVersion)
    r.fail("unsupported format version " + std::to_string(version) + " (expected " +
           std::to_string(kModelFormatVersion) + ")");
  UNetConfig c;
  c.depth = r.i32("config");
  c.base_channels = r.i32("config");
  c.convs_per_block = r.i32("config");
  c.kernel_size = r.i32("config");
  c.in_channels = r.i32("config");
  c.out_channels = r.i32("config");
  c.input_h = r.i32("config");
  c.input_w = r.i32("config");
  if (const auto v = c.violations(); !v.empty()) r.fail("embedded config invalid: " + v.front());
  const auto value_bytes = r.u32("value width");
  if (value_bytes != 4 && value_bytes != 8) r.fail("unsupported value width " + std::to_string(value_bytes));
  const auto count = r.u32("parameter count");
  const auto plan = layer_plan(c);
  if (count != 2 * plan.size())
    r.fail("config mismatch: expected " + std::to_string(2 * plan.size()) + " parameters, found " +
           std::to_string(count));

  ModelParams<T> params{c, {}};
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& spec = plan[i / 2];
    const bool is_weight = i % 2 == 0;
    const std::string expected_name = spec.name + (is_weight ? ".weight" : ".bias");
    const Shape expected_shape = is_weight ? Shape::nchw(spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
                                           : Shape{spec.out_channels};
    const auto name_len = r.u32("name length");
    if (name_len > 4096) r.fail("implausible name length");
    auto name = r.str(name_len, "name");
    if (name != expected_name) r.fail("config mismatch: parameter " + std::to_string(i) + " is '" + name + "', expected '" + expected_name + "'");
    const auto rank = r.u32("rank");
    if (rank != static_cast<std::uint32_t>(expected_shape.rank())) r.fail("config mismatch: rank of " + name);
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.bytes(8, "dims");
      if (dim != static_cast<std::uint64_t>(expected_shape[static_cast<int>(d)]))
        r.fail("config mismatch: shape of " + name);
    }
    Tensor<T> t(expected_shape);
    for (auto& v : t.span()) {
      if (value_bytes == 4)
        v = static_cast<T>(std::bit_cast<float>(static_cast<std::uint32_t>(r.bytes(4, "values"))));
      else
        v = static_cast<T>(std::bit_cast<double>(r.bytes(8, "values")));
    }
    params.entries.push_back({std::move(name), std::move(t)});
  }
  if (is.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after last parameter");
  return params;
}

#define SEGFORGE_INSTANTIATE_UNET(T)                                                         \
  template struct ModelParams<T>;                                                            \
  template ModelParams<T> build_unet<T>(const UNetConfig&, std::uint64_t);                   \
  template std::vector<ad::Var<T>> attach<T>(ad::Tape<T>&, const ModelParams<T>&, bool);     \
  template ad::Var<T> unet_forward<T>(const UNetConfig&, const std::vector<ad::Var<T>>&,     \
                                      ad::Var<T>);                                           \
  template Tensor<T> predict<T>(const ModelParams<T>&, const Tensor<T>&);                    \
  template void save_model<T>(const ModelParams<T>&, const std::filesystem::path&);          \
  template ModelParams<T> load_model<T>(const std::filesystem::path&);

SEGFORGE_INSTANTIATE_UNET(float)
SEGFORGE_INSTANTIATE_UNET(double)

#undef SEGFORGE_INSTANTIATE_UNET

}  // namespace segforge
