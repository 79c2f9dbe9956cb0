#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segforge/image.hpp"

namespace segforge {

struct Overlap {
  std::int64_t intersection = 0;
  std::int64_t pred = 0;
  std::int64_t truth = 0;

  std::int64_t union_size() const noexcept { return pred + truth - intersection; }
  Overlap& operator+=(const Overlap& o) {
    intersection += o.intersection;
    pred += o.pred;
    truth += o.truth;
    return *this;
  }
};

Overlap overlap(const BinaryMask& pred, const BinaryMask& truth);

// 2|A∩B| / (|A| + |B|); 1.0 when both are empty.
double dice(const Overlap& o);
// |A∩B| / |A∪B|; 1.0 when both are empty.
double iou(const Overlap& o);

double dice_binary(const BinaryMask& pred, const BinaryMask& truth);
double iou_binary(const BinaryMask& pred, const BinaryMask& truth);

enum class EvalStage { raw, postprocessed };
std::string to_string(EvalStage stage);

struct SampleScore {
  std::string id;
  double dice = 0.0;
  double iou = 0.0;
};

struct EvalReport {
  EvalStage stage = EvalStage::raw;
  std::vector<SampleScore> samples;
  double mean_dice = 0.0;
  double mean_iou = 0.0;
  std::size_t count = 0;
  // Dice/IoU over pixels pooled across every sample.
  double pooled_dice = 0.0;
  double pooled_iou = 0.0;
};

// Accumulates per-sample scores in insertion order.
class ReportBuilder {
 public:
  explicit ReportBuilder(EvalStage stage) { report_.stage = stage; }
  void add(const std::string& id, const BinaryMask& pred, const BinaryMask& truth);
  EvalReport finish() const;

 private:
  EvalReport report_;
  Overlap pooled_;
};

}  // namespace segforge
