#include "segforge/metrics.hpp"

namespace segforge {

Overlap overlap(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred, truth, "dice_binary");
  Overlap o;
  for (int y = 0; y < pred.height(); ++y) {
    const std::uint8_t* a = pred.row(y);
    const std::uint8_t* b = truth.row(y);
    for (int x = 0; x < pred.width(); ++x) {
      o.intersection += a[x] & b[x];
      o.pred += a[x];
      o.truth += b[x];
    }
  }
  return o;
}

double dice(const Overlap& o) {
  const std::int64_t denom = o.pred + o.truth;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(o.intersection) / static_cast<double>(denom);
}

double iou(const Overlap& o) {
  const std::int64_t u = o.union_size();
  if (u == 0) return 1.0;
  return static_cast<double>(o.intersection) / static_cast<double>(u);
}

double dice_binary(const BinaryMask& pred, const BinaryMask& truth) { return dice(overlap(pred, truth)); }

double iou_binary(const BinaryMask& pred, const BinaryMask& truth) { return iou(overlap(pred, truth)); }

std::string to_string(EvalStage stage) {
  return stage == EvalStage::raw ? "raw" : "postprocessed";
}

void ReportBuilder::add(const std::string& id, const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  pooled_ += o;
  report_.samples.push_back({id, dice(o), iou(o)});
}

EvalReport ReportBuilder::finish() const {
  EvalReport r = report_;
  r.count = r.samples.size();
  double d = 0.0, j = 0.0;
  for (const auto& s : r.samples) {
    d += s.dice;
    j += s.iou;
  }
  if (r.count > 0) {
    r.mean_dice = d / static_cast<double>(r.count);
    r.mean_iou = j / static_cast<double>(r.count);
  }
  r.pooled_dice = dice(pooled_);
  r.pooled_iou = iou(pooled_);
  return r;
}

}  // namespace segforge
