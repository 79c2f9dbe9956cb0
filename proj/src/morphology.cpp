#include "segforge/morphology.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace segforge {

StructuringElement::StructuringElement(int h, int w, std::vector<std::uint8_t> cells)
    : h_(h), w_(w), cells_(std::move(cells)) {
  if (h < 1 || w < 1 || h % 2 == 0 || w % 2 == 0)
    throw usage_error("structuring element sides must be odd and positive");
  if (cells_.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(w))
    throw usage_error("structuring element cell count does not match its size");
  for (auto& c : cells_) c = c ? 1 : 0;
  if (!get(0, 0)) throw usage_error("structuring element origin cell must be set");
}

StructuringElement StructuringElement::square(int side) {
  if (side < 1 || side % 2 == 0) throw usage_error("square SE side must be odd and positive");
  return StructuringElement(side, side, std::vector<std::uint8_t>(static_cast<std::size_t>(side * side), 1));
}

StructuringElement StructuringElement::cross(int side) {
  if (side < 1 || side % 2 == 0) throw usage_error("cross SE side must be odd and positive");
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(side * side), 0);
  const int r = side / 2;
  for (int i = 0; i < side; ++i) {
    cells[static_cast<std::size_t>(r * side + i)] = 1;
    cells[static_cast<std::size_t>(i * side + r)] = 1;
  }
  return StructuringElement(side, side, std::move(cells));
}

bool StructuringElement::get(int dy, int dx) const {
  const int y = dy + radius_y(), x = dx + radius_x();
  if (y < 0 || y >= h_ || x < 0 || x >= w_) return false;
  return cells_[static_cast<std::size_t>(y * w_ + x)] != 0;
}

StructuringElement StructuringElement::reflect() const {
  std::vector<std::uint8_t> r(cells_.rbegin(), cells_.rend());
  return StructuringElement(h_, w_, std::move(r));
}

bool StructuringElement::symmetric() const { return *this == reflect(); }

BinaryMask binarize(const Grid<float>& prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw usage_error("binarize: threshold must lie in (0,1)");
  BinaryMask m(prob.height(), prob.width());
  const auto t = static_cast<float>(threshold);
  for (int y = 0; y < prob.height(); ++y) {
    const float* p = prob.row(y);
    std::uint8_t* o = m.row(y);
    for (int x = 0; x < prob.width(); ++x) o[x] = p[x] >= t ? 1 : 0;
  }
  return m;
}

namespace {

// out(p) = OR_{b in B} m(p - b)
BinaryMask dilate_once(const BinaryMask& m, const StructuringElement& se) {
  const int h = m.height(), w = m.width();
  BinaryMask out(h, w);
  for (int dy = -se.radius_y(); dy <= se.radius_y(); ++dy)
    for (int dx = -se.radius_x(); dx <= se.radius_x(); ++dx) {
      if (!se.get(dy, dx)) continue;
      const int x_lo = std::max(0, dx), x_hi = std::min(w, w + dx);
      for (int y = std::max(0, dy); y < std::min(h, h + dy); ++y) {
        const std::uint8_t* src = m.row(y - dy);
        std::uint8_t* dst = out.row(y);
        for (int x = x_lo; x < x_hi; ++x) dst[x] |= src[x - dx];
      }
    }
  return out;
}

// out(p) = AND_{b in B} m(p + b), outside = 0
BinaryMask erode_once(const BinaryMask& m, const StructuringElement& se) {
  const int h = m.height(), w = m.width();
  BinaryMask out(h, w, true);
  for (int dy = -se.radius_y(); dy <= se.radius_y(); ++dy)
    for (int dx = -se.radius_x(); dx <= se.radius_x(); ++dx) {
      if (!se.get(dy, dx)) continue;
      for (int y = 0; y < h; ++y) {
        std::uint8_t* dst = out.row(y);
        const int sy = y + dy;
        if (sy < 0 || sy >= h) {
          std::fill(dst, dst + w, std::uint8_t{0});
          continue;
        }
        const std::uint8_t* src = m.row(sy);
        const int x_lo = std::clamp(-dx, 0, w), x_hi = std::clamp(w - dx, x_lo, w);
        std::fill(dst, dst + x_lo, std::uint8_t{0});
        for (int x = x_lo; x < x_hi; ++x) dst[x] &= src[x + dx];
        std::fill(dst + x_hi, dst + w, std::uint8_t{0});
      }
    }
  return out;
}

void check_iterations(int iterations, const char* op) {
  if (iterations < 0) throw usage_error(std::string(op) + ": iterations must be >= 0");
}

}  // namespace

BinaryMask dilate(const BinaryMask& m, const StructuringElement& se, int iterations) {
  check_iterations(iterations, "dilate");
  BinaryMask out = m;
  for (int i = 0; i < iterations; ++i) out = dilate_once(out, se);
  return out;
}

BinaryMask erode(const BinaryMask& m, const StructuringElement& se, int iterations) {
  check_iterations(iterations, "erode");
  BinaryMask out = m;
  for (int i = 0; i < iterations; ++i) out = erode_once(out, se);
  return out;
}

BinaryMask open(const BinaryMask& m, const StructuringElement& se, int iterations) {
  return dilate(erode(m, se, iterations), se, iterations);
}

BinaryMask close(const BinaryMask& m, const StructuringElement& se, int iterations) {
  return erode(dilate(m, se, iterations), se, iterations);
}

BinaryMask boundary(const BinaryMask& m) {
  const BinaryMask inner = erode(m, StructuringElement::square(3));
  BinaryMask out = m;
  for (int y = 0; y < m.height(); ++y) {
    std::uint8_t* o = out.row(y);
    const std::uint8_t* e = inner.row(y);
    for (int x = 0; x < m.width(); ++x) o[x] &= static_cast<std::uint8_t>(e[x] ^ 1);
  }
  return out;
}

Components connected_components(const BinaryMask& m) {
  const int h = m.height(), w = m.width();
  Grid<std::int32_t> raw(h, w, 0);
  std::vector<std::int64_t> sizes;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      if (!m.get(y0, x0) || raw.at(y0, x0) != 0) continue;
      const auto label = static_cast<std::int32_t>(sizes.size() + 1);
      std::int64_t size = 0;
      raw.at(y0, x0) = label;
      stack.emplace_back(y0, x0);
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        ++size;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            if (!m.get(ny, nx) || raw.at(ny, nx) != 0) continue;
            raw.at(ny, nx) = label;
            stack.emplace_back(ny, nx);
          }
      }
      sizes.push_back(size);
    }

  // Discovery order is row-major order of each component's first pixel, so a
  // stable sort by size yields the documented tie-break.
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  std::vector<std::int32_t> relabel(sizes.size() + 1, 0);
  Components out;
  out.sizes.reserve(sizes.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    relabel[order[rank] + 1] = static_cast<std::int32_t>(rank + 1);
    out.sizes.push_back(sizes[order[rank]]);
  }
  for (auto& v : raw.values()) v = relabel[static_cast<std::size_t>(v)];
  out.labels = std::move(raw);
  return out;
}

BinaryMask keep_largest(const BinaryMask& m, int k) {
  if (k < 1) throw usage_error("keep_largest: k must be >= 1");
  const Components cc = connected_components(m);
  if (cc.count() <= static_cast<std::size_t>(k)) return m;
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const auto label = cc.labels.at(y, x);
      if (label > 0 && label <= k) out.set(y, x, true);
    }
  return out;
}

std::string to_string(MorphOp op) {
  switch (op) {
    case MorphOp::open: return "open";
    case MorphOp::close: return "close";
    case MorphOp::dilate: return "dilate";
    case MorphOp::erode: return "erode";
  }
  return "?";
}

MorphOp parse_morph_op(const std::string& s) {
  if (s == "open") return MorphOp::open;
  if (s == "close") return MorphOp::close;
  if (s == "dilate") return MorphOp::dilate;
  if (s == "erode") return MorphOp::erode;
  throw usage_error("unknown morphology op '" + s + "' (expected open|close|dilate|erode)");
}

void PostprocessConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw usage_error("postprocess threshold must lie in (0,1)");
  if (keep_largest < 0) throw usage_error("keep_largest must be >= 0");
  if (pipeline.empty() && keep_largest == 0)
    throw usage_error("postprocess config needs a nonempty pipeline or keep_largest > 0");
  for (const auto& s : pipeline)
    if (s.iterations < 1) throw usage_error("morphology step iterations must be >= 1");
}

std::vector<MorphStep> parse_pipeline(const std::string& spec) {
  std::vector<MorphStep> steps;
  if (spec.empty() || spec == "none") return steps;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    std::string op, side, iters;
    std::getline(is, op, ':');
    std::getline(is, side, ':');
    std::getline(is, iters, ':');
    auto number = [&](const std::string& text, int fallback) {
      if (text.empty()) return fallback;
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(text, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != text.size()) throw usage_error("bad pipeline step '" + item + "' (expected op:side:iterations)");
      return v;
    };
    const int s = number(side, 3);
    const int n = number(iters, 1);
    if (n < 1) throw usage_error("pipeline step '" + item + "': iterations must be >= 1");
    steps.push_back({parse_morph_op(op), StructuringElement::square(s), n});
  }
  return steps;
}

std::string format_pipeline(const std::vector<MorphStep>& steps) {
  if (steps.empty()) return "none";
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += ',';
    const bool square = s.se.height() == s.se.width() && s.se == StructuringElement::square(s.se.height());
    out += to_string(s.op) + ':' + (square ? std::to_string(s.se.height()) : std::string("custom")) +
           ':' + std::to_string(s.iterations);
  }
  return out;
}

BinaryMask apply_step(const BinaryMask& m, const MorphStep& step) {
  switch (step.op) {
    case MorphOp::open: return open(m, step.se, step.iterations);
    case MorphOp::close: return close(m, step.se, step.iterations);
    case MorphOp::dilate: return dilate(m, step.se, step.iterations);
    case MorphOp::erode: return erode(m, step.se, step.iterations);
  }
  return m;
}

BinaryMask postprocess(const Grid<float>& prob, const PostprocessConfig& config) {
  config.validate();
  BinaryMask m = binarize(prob, config.threshold);
  for (const auto& step : config.pipeline) m = apply_step(m, step);
  if (config.keep_largest > 0) m = keep_largest(m, config.keep_largest);
  return m;
}

}  // namespace segforge
