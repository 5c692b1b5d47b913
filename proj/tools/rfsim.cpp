// SPDX-License-Identifier: Apache-2.0
//
// rfsim command-line entry point. Exit codes: 0 ok, 1 usage, 2 config, 3 runtime, 4 validation.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rfsim/commands.hpp"

namespace {

using namespace rfsim;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
  bool json = false;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig c = g.config_path.empty() ? great_msd_default() : load_run_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.threads) c.threads = *g.threads;
  if (g.output) c.output_dir = *g.output;
  return c;
}

void revalidate(const RunConfig& c) { c.validate(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic ray-tracing channel simulator and UAV CSI dataset generator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rfsim 1.0.0");

  GlobalFlags g;
  app.add_option("--config", g.config_path, "Run configuration (JSON)")->envname("RFSIM_CONFIG");
  app.add_option("--seed", g.seed, "Master seed")->envname("RFSIM_SEED");
  app.add_option("--threads", g.threads, "Worker threads (0 = logical cores)")
      ->envname("RFSIM_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--output", g.output, "Output directory or file prefix")->envname("RFSIM_OUTPUT");
  app.add_flag("--json", g.json, "Machine-readable output on stdout")->envname("RFSIM_JSON");

  auto* trace = app.add_subcommand("trace", "Solve propagation paths between two points");
  std::vector<double> rx, tx;
  trace->add_option("--rx", rx, "Receiver position x y z (m)")->expected(3)->required();
  trace->add_option("--tx", tx, "Transmitter position x y z (m); default: array position")->expected(3);

  auto* dataset = app.add_subcommand("dataset", "Generate a trajectory CSI dataset");
  std::optional<int> trajectories, samples, train_count;
  dataset->add_option("--trajectories", trajectories, "Trajectory count")
      ->envname("RFSIM_TRAJECTORIES")
      ->check(CLI::PositiveNumber);
  dataset->add_option("--samples", samples, "Samples per trajectory")
      ->envname("RFSIM_SAMPLES")
      ->check(CLI::PositiveNumber);
  dataset->add_option("--train-count", train_count, "Training trajectories (default: 90% rounded down)")
      ->check(CLI::NonNegativeNumber);

  auto* adp = app.add_subcommand("adp", "Export the angle-delay profile of one stored frame");
  std::string manifest;
  int trajectory = 0, frame = 0;
  adp->add_option("--manifest", manifest, "Dataset manifest")->required();
  adp->add_option("--trajectory", trajectory, "Trajectory id")->check(CLI::NonNegativeNumber);
  adp->add_option("--frame", frame, "Frame index")->check(CLI::NonNegativeNumber);

  auto* locate = app.add_subcommand("locate", "Nearest-neighbour fingerprint localization benchmark");
  std::string train_ids, test_ids;
  std::optional<int> k;
  locate->add_option("--manifest", manifest, "Dataset manifest")->required();
  locate->add_option("--train", train_ids, "Training ids, e.g. 0-89 (default: manifest split)");
  locate->add_option("--test", test_ids, "Test ids (default: manifest split)");
  locate->add_option("--k", k, "Neighbours")->envname("RFSIM_K")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Run the analytic oracle suite");
  bool fault = false;
  validate->add_flag("--inject-fresnel-fault", fault)->group("");

  auto* scene = app.add_subcommand("scene", "Export a built-in scene as OBJ + material bindings");
  std::string scene_name = "urban-demo";
  scene->add_option("name", scene_name, "Scene name")->check(CLI::IsMember(builtin_scene_names()));

  auto* config = app.add_subcommand("config", "Print the resolved configuration");
  auto* materials = app.add_subcommand("materials", "Print the material library in use as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    RunConfig c = resolve_config(g);
    if (dataset->parsed()) {
      if (trajectories) {
        c.trajectories.trajectory_count = *trajectories;
        if (!train_count) c.trajectories.train_count = std::max(0, std::min(*trajectories - 1, *trajectories * 9 / 10));
      }
      if (samples) c.trajectories.samples_per_trajectory = *samples;
      if (train_count) c.trajectories.train_count = *train_count;
    }
    if (k) c.adp.k = *k;
    revalidate(c);

    if (trace->parsed()) {
      std::optional<Vec3> tx_pos;
      if (!tx.empty()) tx_pos = Vec3(tx[0], tx[1], tx[2]);
      cmd_trace(c, tx_pos, Vec3(rx[0], rx[1], rx[2]), g.json, std::cout);
    } else if (dataset->parsed()) {
      cmd_dataset(c, g.json, std::cout, std::cerr);
    } else if (adp->parsed()) {
      const std::string prefix = g.output.value_or("adp_t" + std::to_string(trajectory) + "_f" + std::to_string(frame));
      cmd_adp(manifest, trajectory, frame, prefix, c.adp.angle_fft, c.adp.delay_fft, std::cout);
    } else if (locate->parsed()) {
      LocateRequest req;
      if (!train_ids.empty()) req.train = parse_id_list(train_ids);
      if (!test_ids.empty()) req.test = parse_id_list(test_ids);
      req.k = c.adp.k;
      req.angle_fft = c.adp.angle_fft;
      req.delay_fft = c.adp.delay_fft;
      req.threads = c.threads;
      cmd_locate(manifest, req, g.json, std::cout);
    } else if (validate->parsed()) {
      ValidationOptions opts;
      opts.inject_fresnel_fault = fault;
      cmd_validate(opts, g.json, std::cout);
    } else if (scene->parsed()) {
      cmd_scene_export(scene_name, g.output.value_or("."), std::cout);
    } else if (config->parsed()) {
      std::cout << serialize_run_config(c);
    } else if (materials->parsed()) {
      std::cout << material_library_to_json(c.materials());
    }
  } catch (const std::exception& e) {
    std::cerr << "rfsim: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
