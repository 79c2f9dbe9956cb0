#pragma once
// Turning probability maps into masks and scoring them against ground truth.
// Prediction and postprocessing happen at model resolution; the resulting
// masks are nearest-neighbour resized to the ground-truth size before
// scoring, so `eval` and `infer` see exactly the same masks.

#include <functional>
#include <vector>

#include "segforge/dataset.hpp"
#include "segforge/metrics.hpp"
#include "segforge/morphology.hpp"
#include "segforge/unet.hpp"

namespace segforge {

// Maps an input image to a per-pixel foreground probability map (any size).
using Predictor = std::function<Grid<float>(const Image&)>;

struct PredictedMasks {
  BinaryMask raw;   // thresholded only
  BinaryMask post;  // thresholded + postprocessed
};

// Both masks, resized to (h, w).
PredictedMasks masks_from_probability(const Grid<float>& prob, int h, int w, const PostprocessConfig& pp);

struct EvalResult {
  EvalReport raw;
  EvalReport post;
};

EvalResult evaluate(const std::vector<Sample>& samples, const Predictor& predictor,
                    const PostprocessConfig& pp);

// Resizes the input to the model's input size (bilinear) and runs predict.
template <typename T>
Predictor model_predictor(const ModelParams<T>& params);

// Probability map straight from the truth mask; scores a perfect model.
Predictor oracle_predictor(const std::vector<Sample>& samples);

}  // namespace segforge
