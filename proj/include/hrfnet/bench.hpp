#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hrfnet/model.hpp"

namespace hrfnet {

struct MemoryReport {
  std::optional<double> megabytes;  // empty: "memory: unavailable"
  std::string mode;                 // "cpu-peak-rss" or "unavailable"
};

// Peak resident memory of `workload` above the pre-workload baseline. The
// workload runs once untimed first so one-off runtime caches land in the
// baseline. Benchmarks must run alone in the process (no concurrent work).
MemoryReport measure_peak_memory(const std::function<void()>& workload);

// Builds the model from cfg and runs a warm-up plus one gradient-free batch-1
// forward at `input` dims.
MemoryReport measure_memory(const ModelConfig& cfg, Extent input);

// iters / wall time over gradient-free batch-1 forwards after `warmup` passes.
// Requires iters >= 10, warmup >= 3.
double measure_fps(HRFNet& model, Extent input, int iters = 20, int warmup = 3);

struct BenchRow {
  std::string method;
  MemoryReport memory;
  double fps = 0.0;
};

// Method | Memory (MB) | FPS table.
std::string format_bench_table(const std::vector<BenchRow>& rows);

}  // namespace hrfnet
