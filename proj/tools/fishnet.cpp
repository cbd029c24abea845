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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fishnet/config.hpp"
#include "fishnet/error.hpp"
#include "fishnet/pipeline.hpp"

namespace {

enum exit_code : int { ok = 0, validation = 1, unavailable = 2, io = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fishnet: tiling, composite correction and urbanization forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    for (auto name : fishnet::pipeline::command_names()) {
        auto* sub = app.add_subcommand(std::string(name));
        sub->add_option("--config", config_path, "pipeline config file (JSON)")->required();
        sub->add_option("--seed", seed, "overrides the seed of the config");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return validation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto config = fishnet::pipeline::load_config(config_path);
        if (seed) {
            config.seed = *seed;
            config.gbt.seed = *seed;
            config.synth.seed = *seed;
        }
        fishnet::pipeline::run_command(command, config);
    } catch (const fishnet::data_unavailable& e) {
        std::cerr << "fishnet " << command << ": data unavailable: " << e.what() << '\n';
        return unavailable;
    } catch (const fishnet::io_error& e) {
        std::cerr << "fishnet " << command << ": I/O error: " << e.what() << '\n';
        return io;
    } catch (const fishnet::error& e) {
        std::cerr << "fishnet " << command << ": " << e.what() << '\n';
        return validation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "fishnet " << command << ": I/O error: " << e.what() << '\n';
        return io;
    }
    return ok;
}
