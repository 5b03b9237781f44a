#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rexo/io.hpp"
#include "rexo/metrics.hpp"

namespace rexo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Worker pool size: REXO_NUM_WORKERS when set to a positive integer
// (clamped to 64), otherwise hardware concurrency capped at 16.
int num_workers();

// Render radar frames for each scene and run reverse diffusion over them.
// Frames are distributed over the worker pool; the result vector is ordered
// by frame regardless of scheduling, so outputs are seed-deterministic.
std::vector<std::vector<Detection>> infer_scenes(const io::RunConfig& cfg,
                                                 const std::vector<Scene>& scenes,
                                                 std::uint64_t seed);

// Subcommand bodies. They throw io::ConfigError for bad configs or missing
// inputs and std::exception for runtime failures; main_cli maps those to
// exit codes 2 and 1.
void cmd_simulate(const io::RunConfig& cfg);
void cmd_infer(const io::RunConfig& cfg, std::uint64_t seed);
EvalResult cmd_eval(const io::RunConfig& cfg);
void cmd_plot(const std::string& run_dir, const std::string& compare_dir,
              const std::string& out_dir);
EvalResult cmd_run(const io::RunConfig& cfg,
                   std::optional<std::uint64_t> seed = std::nullopt);

int main_cli(int argc, const char* const* argv);

}  // namespace rexo::cli
