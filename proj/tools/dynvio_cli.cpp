// SPDX-License-Identifier: BSD-3-Clause
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynvio/pipeline/config.hpp"
#include "dynvio/pipeline/dataset.hpp"
#include "dynvio/pipeline/evaluation.hpp"
#include "dynvio/pipeline/session.hpp"
#include "dynvio/sim/scenarios.hpp"

namespace {

std::string readText(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<dynvio::ErrorSample> seriesFromJson(const nlohmann::json& a) {
  std::vector<dynvio::ErrorSample> out;
  for (const auto& r : a) out.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
  return out;
}

// An evaluation report yields errors.csv; a run report yields camera.csv,
// object_<id>.csv and runtime.csv from whatever it contains.
int exportPlots(const std::string& report_path, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto j = nlohmann::json::parse(readText(report_path));
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  int files = 0;
  if (j.contains("ate_rmse_m")) {
    const auto r = dynvio::evaluationFromJson(j.dump());
    dynvio::writeErrorCsv((root / "errors.csv").string(), r.series);
    ++files;
  } else {
    if (!j.contains("frames")) throw std::runtime_error(report_path + ": not a report");
    if (j.contains("evaluation")) {
      const auto& ev = j.at("evaluation");
      if (ev.contains("camera") && ev.at("camera").contains("series")) {
        dynvio::writeErrorCsv((root / "camera.csv").string(), seriesFromJson(ev.at("camera").at("series")));
        ++files;
      }
      for (const auto& o : ev.value("objects", nlohmann::json::array())) {
        dynvio::writeErrorCsv(
            (root / ("object_" + std::to_string(o.at("id").get<int>()) + ".csv")).string(),
            seriesFromJson(o.at("series")));
        ++files;
      }
    }
    if (j.contains("runtime")) {
      std::ofstream os(root / "runtime.csv");
      os << "category,total_ms,samples,mean_ms\n";
      for (const auto& c : j.at("runtime").at("categories"))
        os << c.at("name").get<std::string>() << ',' << c.at("total_ms").get<double>() << ','
           << c.at("samples").get<long>() << ',' << c.at("mean_ms").get<double>() << '\n';
      if (!os) throw std::runtime_error("cannot write runtime.csv");
      ++files;
    }
  }
  std::printf("wrote %d file(s) to %s\n", files, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynvio: visual-inertial multi-object dynamic SLAM"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "render a built-in scenario to a dataset directory");
  std::string scenario, sim_out;
  std::uint64_t seed = 0;
  dynvio::sim::ScenarioOptions sim_opts;
  sim->add_option("--scenario", scenario, "scenario name")
      ->required()
      ->check(CLI::IsMember(dynvio::sim::scenarioNames()));
  sim->add_option("--seed", seed, "noise seed");
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_flag("--noise", sim_opts.noise, "sensor noise (depth, intensity, IMU)");
  sim->add_flag("--texture-free", sim_opts.texture_free, "flat albedo everywhere");
  sim->add_option("--duration", sim_opts.duration, "override duration [s]");

  auto* run = app.add_subcommand("run", "run the estimator over a dataset");
  std::string dataset, config_path, run_out;
  bool timing = false;
  int max_frames = 0;
  run->add_option("--dataset", dataset, "dataset directory")->required();
  run->add_option("--config", config_path, "INI configuration file")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_flag("--timing", timing, "include the runtime table in the report");
  run->add_option("--max-frames", max_frames, "stop after this many frames (0 = all)");

  auto* eval = app.add_subcommand("evaluate", "ATE RMSE of a TUM trajectory");
  std::string est, gt, align = "rigid", eval_out;
  eval->add_option("--est", est, "estimated trajectory (TUM)")->required();
  eval->add_option("--gt", gt, "ground-truth trajectory (TUM)")->required();
  eval->add_option("--align", align, "rigid|none")->check(CLI::IsMember({"rigid", "none"}));
  eval->add_option("--out", eval_out, "output JSON")->required();

  auto* plots = app.add_subcommand("plots", "CSV error series from a report");
  std::string report, plots_out;
  plots->add_option("--report", report, "evaluation or run report JSON")->required();
  plots->add_option("--out", plots_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (*sim) {
      const auto s = dynvio::sim::makeScenario(scenario, sim_opts);
      const auto r = dynvio::sim::generateDataset(s, seed, sim_out);
      std::printf("wrote %d frames, %d IMU samples to %s\n", r.frames, r.imu_rows, sim_out.c_str());
    } else if (*run) {
      const dynvio::SessionConfig cfg = dynvio::loadConfig(config_path);
      const dynvio::Dataset ds(dataset);
      dynvio::Session session(ds, cfg);
      while (!session.done() &&
             (max_frames <= 0 || session.nextFrame() < static_cast<std::size_t>(max_frames)))
        session.step();
      session.writeOutputs(run_out, timing);
      std::printf("processed %zu frames, %zu object model(s), %zu degenerate\n",
                  session.cameraTrajectory().size(), session.objects().size(),
                  session.degenerateFrames().size());
      if (timing) {
        const auto& rt = session.runtime();
        std::printf("%-16s %10s %8s %10s\n", "category", "total_ms", "samples", "mean_ms");
        for (int c = 0; c < dynvio::kTimingCategories; ++c) {
          const auto& row = rt.rows[static_cast<std::size_t>(c)];
          std::printf("%-16s %10.1f %8ld %10.3f\n",
                      dynvio::toString(static_cast<dynvio::TimingCategory>(c)), row.total_ms,
                      row.samples, row.meanMs());
        }
        std::printf("%-16s %10.1f %8d %10.3f\n", "frame_total", rt.frame_total_ms, rt.frames,
                    rt.frames ? rt.frame_total_ms / rt.frames : 0.0);
      }
    } else if (*eval) {
      const auto r = dynvio::evaluateTrajectory(
          dynvio::readTum(est), dynvio::readTum(gt),
          align == "rigid" ? dynvio::Alignment::Rigid : dynvio::Alignment::None);
      std::ofstream os(eval_out);
      os << dynvio::toJson(r) << '\n';
      if (!os) throw std::runtime_error("cannot write " + eval_out);
      std::printf("ate_rmse_m %.9f over %d pairs\n", r.ate_rmse_m, r.pairs);
    } else if (*plots) {
      return exportPlots(report, plots_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
