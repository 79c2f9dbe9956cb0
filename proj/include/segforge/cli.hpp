#pragma once
// Batch commands behind the `segforge` executable.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "segforge/config.hpp"
#include "segforge/metrics.hpp"
#include "segforge/train.hpp"

namespace segforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

int exit_code(ErrorKind kind);

// Parses argv and dispatches; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct SynthOptions {
  int count = 40;
  int height = 64;
  int width = 64;
};
void cmd_synth(const RunConfig& config, const SynthOptions& options, std::ostream& log);

// raw_dir layout: montgomery/{images,masks_left,masks_right}, shenzhen/{images,masks},
// synthetic/{images,masks}; files are matched by stem.
DatasetManifest cmd_prepare(const RunConfig& config, const std::filesystem::path& raw_dir, std::ostream& log);

// Writes model.segf (final), best.segf (best validation dice), history.csv.
TrainResult<float> cmd_train(const RunConfig& config, std::ostream& log);

struct InferOptions {
  std::vector<std::filesystem::path> inputs;  // files or directories of PNGs
  bool save_prob = false;
  bool save_raw = false;
};
// Returns the number of inputs that failed.
int cmd_infer(const RunConfig& config, const InferOptions& options, std::ostream& log);

// Writes report.csv and summary.txt into config.output.
EvalResult cmd_eval(const RunConfig& config, Split split, std::ostream& log);

inline constexpr const char* kHistoryHeader = "epoch,mean_loss,val_dice_raw,val_dice_post";
std::string format_history(const std::vector<EpochRecord>& history);
std::string format_report(const EvalResult& result, bool pooled);
std::string format_summary(const EvalResult& result, bool pooled);

}  // namespace segforge::cli
