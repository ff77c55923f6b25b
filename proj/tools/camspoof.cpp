// camspoof: simulate, replay and analyze camera-stream injection scenarios.
#include <iostream>

#include <CLI11.hpp>

#include "camspoof/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GigE Vision stream injection simulator and width-varying defense"};
  app.require_subcommand(1);

  camspoof::SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  double sim_fps = 0.0;
  auto* simulate = app.add_subcommand("simulate", "run a scenario; write capture, verdict CSVs and a summary");
  simulate->add_option("--scenario", sim.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out-dir", sim.out_dir, "output directory");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "override sim.seed and sim.scene.seed");
  auto* fps_opt = simulate->add_option("--fps", sim_fps, "override sim.fps");
  simulate->add_flag("--records-csv", sim.records_csv, "also write records.csv");
  simulate->add_flag("--export-frames", sim.export_frames, "also write every reassembled frame as .pxb");

  camspoof::ReplayOptions rep;
  std::string detectors;
  auto* replay = app.add_subcommand("replay", "recompute verdicts from a saved capture");
  replay->add_option("--capture", rep.capture, "capture file")->required()->check(CLI::ExistingFile);
  replay->add_option("--out-dir", rep.out_dir, "output directory");
  auto* det_opt = replay->add_option("--detectors", detectors, "JSON object of detector overrides")
                      ->check(CLI::ExistingFile);

  camspoof::AnalyzeOptions an;
  auto* analyze = app.add_subcommand("analyze", "probability, run-length, DET and protection reports");
  analyze->add_option("kind", an.kind, "prob | runs | det | protect")
      ->required()
      ->check(CLI::IsMember({"prob", "runs", "det", "protect"}));
  analyze->add_option("--out-dir", an.out_dir, "output directory");
  analyze->add_option("--b", an.b, "bits per frame, comma separated")->delimiter(',');
  analyze->add_option("--dmax", an.d_max, "verifier window d_max");
  analyze->add_option("--fps", an.fps, "frame rate");
  analyze->add_option("--tstop", an.t_stop, "stopping times in seconds, comma separated")->delimiter(',');
  analyze->add_option("--rmax", an.r_max, "largest run length r to tabulate");
  analyze->add_option("--frames", an.frames, "fabricated frames per Monte Carlo run");
  analyze->add_option("--trials", an.trials, "trials per bucket (det, protect)");
  analyze->add_option("--seed", an.seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      if (*seed_opt) sim.seed = sim_seed;
      if (*fps_opt) sim.fps = sim_fps;
      const auto sum = camspoof::cmd_simulate(sim);
      std::cout << "frames " << sum["frames"] << ", attack frames " << sum["attack_frames"] << ", alerts "
                << sum["alerts"]["combined"] << "\n";
    } else if (*replay) {
      if (*det_opt) rep.detectors = detectors;
      camspoof::cmd_replay(rep);
    } else if (*analyze) {
      const auto r = camspoof::cmd_analyze(an);
      std::cout << r["summary"].dump(2) << "\n";
    }
  } catch (const camspoof::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
