/*
   Copyright 2024 The fishnet authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "fishnet/batching.hpp"
#include "fishnet/config.hpp"
#include "fishnet/geo.hpp"

namespace fishnet::pipeline {

/// Task status file next to the input rasters, written by the exporter (or by synth in its place).
inline constexpr std::string_view export_status_name = "export_status.csv";

/// Artifact locations inside the output directory.
struct artifact_paths {
    std::filesystem::path root;

    std::filesystem::path grid() const { return root / "grid.json"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path corrected_dir() const { return root / "corrected"; }
    std::filesystem::path corrected(std::int64_t batch_id, int year) const;
    std::filesystem::path composite_report() const { return root / "composite_report.csv"; }
    std::filesystem::path table() const { return root / "table.csv"; }
    std::filesystem::path sequences() const { return root / "sequences.csv"; }
    std::filesystem::path model() const { return root / "model.json"; }
    std::filesystem::path baseline() const { return root / "baseline.json"; }
    std::filesystem::path predictions() const { return root / "predictions.csv"; }
    std::filesystem::path eval() const { return root / "eval.csv"; }
    std::filesystem::path eval_baseline() const { return root / "eval_baseline.csv"; }
    std::filesystem::path lock() const { return root / ".fishnet.lock"; }
};

/// Exclusive advisory lock on an output directory; throws io_error when another process holds it.
class output_lock {
   public:
    explicit output_lock(const std::filesystem::path& dir);
    ~output_lock();
    output_lock(const output_lock&) = delete;
    output_lock& operator=(const output_lock&) = delete;

   private:
    int _fd = -1;
};

geo::fishnet_grid make_grid(const pipeline_config& c);
batching::batch_plan make_plan(const pipeline_config& c);

/// Names accepted by run_command, in pipeline order.
const std::vector<std::string_view>& command_names();

/// Runs one stage against the output directory of the config, holding its lock.
void run_command(std::string_view name, const pipeline_config& c);

void run_fishnet(const pipeline_config& c);
void run_plan(const pipeline_config& c);
void run_synth(const pipeline_config& c);
void run_correct(const pipeline_config& c);
void run_metrics(const pipeline_config& c);
void run_sequences(const pipeline_config& c);
void run_train(const pipeline_config& c);
void run_predict(const pipeline_config& c);
void run_evaluate(const pipeline_config& c);

}  // namespace fishnet::pipeline
