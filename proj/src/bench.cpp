#include "hrfnet/bench.hpp"

#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace {

// VmRSS / VmHWM in kB from /proc/self/status; -1 when unavailable.
long status_kb(const char* field) {
  std::ifstream in("/proc/self/status");
  std::string line;
  const std::string key = std::string(field) + ":";
  while (std::getline(in, line)) {
    if (line.rfind(key, 0) == 0) return std::stol(line.substr(key.size()));
  }
  return -1;
}

bool reset_peak_rss() {
  std::ofstream out("/proc/self/clear_refs");
  if (!out) return false;
  out << "5";
  out.flush();
  return static_cast<bool>(out);
}

torch::Tensor bench_input(Extent input) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(0);
  return torch::empty({1, 3, input.height, input.width}).uniform_(0.0, 255.0, gen);
}

}  // namespace

MemoryReport measure_peak_memory(const std::function<void()>& workload) {
  // returned-to-OS frees keep later baselines honest
  mallopt(M_MMAP_THRESHOLD, 64 * 1024);
  mallopt(M_TRIM_THRESHOLD, 64 * 1024);
  if (workload) workload();
  malloc_trim(0);

  const long baseline = status_kb("VmRSS");
  if (baseline < 0 || !reset_peak_rss()) return {std::nullopt, "unavailable"};
  if (workload) workload();
  const long peak = status_kb("VmHWM");
  malloc_trim(0);
  if (peak < 0) return {std::nullopt, "unavailable"};
  return {std::max(0.0, static_cast<double>(peak - baseline) / 1024.0), "cpu-peak-rss"};
}

MemoryReport measure_memory(const ModelConfig& cfg, Extent input) {
  return measure_peak_memory([&] {
    torch::NoGradGuard guard;
    HRFNet model(cfg);
    model->eval();
    const auto x = bench_input(input);
    model->forward(x);  // warm-up
    model->forward(x);
  });
}

double measure_fps(HRFNet& model, Extent input, int iters, int warmup) {
  if (iters < 10) throw Error(ErrorKind::Usage, "measure_fps: iters must be >= 10");
  if (warmup < 3) throw Error(ErrorKind::Usage, "measure_fps: warmup must be >= 3");
  torch::NoGradGuard guard;
  const bool was_training = model->is_training();
  model->eval();
  const auto x = bench_input(input);
  for (int i = 0; i < warmup; ++i) model->forward(x);
  // CPU execution is synchronous; an accelerator build would synchronize here.
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) model->forward(x);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (was_training) model->train();
  return iters / secs;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%s | %s | %s\n", "Method", "Memory (MB)", "FPS");
  out << line;
  for (const auto& r : rows) {
    char mem[32] = "unavailable";
    if (r.memory.megabytes) std::snprintf(mem, sizeof(mem), "%.1f", *r.memory.megabytes);
    std::snprintf(line, sizeof(line), "%s | %s | %.2f\n", r.method.c_str(), mem, r.fps);
    out << line;
  }
  return out.str();
}

}  // namespace hrfnet
