#pragma once

// Full-pipeline mode: replay a directory of numbered frames through
// undistortion, marker tracking, depth reconstruction, slip analysis, and
// force estimation. Frames are independent, so a bounded worker pool
// processes them in any order while records land in frame order; the
// result is byte-identical for any worker count. Timing never enters the
// records, only the separate throughput log.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tactus/config.hpp"
#include "tactus/core.hpp"
#include "tactus/distortion.hpp"
#include "tactus/fem.hpp"
#include "tactus/image_io.hpp"
#include "tactus/markers.hpp"
#include "tactus/photostereo.hpp"
#include "tactus/poisson.hpp"
#include "tactus/slip.hpp"

namespace tactus::pipeline {

struct FrameResult {
  int index = 0;
  std::string file;
  double peak_depth_mm = 0.0;
  double peak_x_px = 0.0;
  double peak_y_px = 0.0;
  double mean_contact_depth_mm = 0.0;
  int contact_pixels = 0;
  double clamped_fraction = 0.0;
  double fallback_fraction = 0.0;
  int detected_markers = 0;
  int matched_markers = 0;
  slip::SlipReport slip;
  double total_fx_n = 0.0;
  double total_fy_n = 0.0;
  double total_fz_n = 0.0;
  double max_normal_n = 0.0;
};

inline config::json frame_record(const FrameResult& r) {
  config::json j;
  j["frame"] = r.index;
  j["file"] = r.file;
  j["depth"] = {{"peak_mm", r.peak_depth_mm},
                {"peak_x_px", r.peak_x_px},
                {"peak_y_px", r.peak_y_px},
                {"mean_contact_mm", r.mean_contact_depth_mm},
                {"contact_pixels", r.contact_pixels},
                {"clamped_fraction", r.clamped_fraction},
                {"fallback_fraction", r.fallback_fraction}};
  j["markers"] = {{"detected", r.detected_markers},
                  {"matched", r.matched_markers}};
  j["slip"] = config::json_of(r.slip);
  j["force"] = {{"total_fx_n", r.total_fx_n},
                {"total_fy_n", r.total_fy_n},
                {"total_fz_n", r.total_fz_n},
                {"max_normal_n", r.max_normal_n}};
  return j;
}

/// Frames are the image files of the directory in name order; numbered
/// names (frame_000000.png, ...) therefore replay in sequence.
inline std::vector<std::string> list_frames(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no frames found in " + dir);
  return files;
}

class Pipeline {
 public:
  explicit Pipeline(const config::PipelineConfig& cfg) : cfg_(cfg) {
    table_ = stereo::CalibrationTable::load(cfg.table_path);
    if (!cfg.warp_path.empty())
      warp_ = distortion::WarpMap::load(cfg.warp_path);

    reference_ = load_frame(cfg.reference_path);
    const auto& geom = cfg.analysis.geometry;
    if (reference_.width != geom.width || reference_.height != geom.height)
      throw InputError("reference frame does not match the sensor geometry");
    reference_markers_ = distortion::detect_markers(reference_);

    mesh_ = fem::HexMesh::centered(geom, cfg.analysis.mesh_nx,
                                   cfg.analysis.mesh_ny);
    stiffness_ = fem::assemble(mesh_, cfg.analysis.material);
  }

  const TactileImage& reference() const { return reference_; }
  const distortion::MarkerSet& reference_markers() const {
    return reference_markers_;
  }

  /// One frame through the whole stack. Pure: shared state is read-only,
  /// the Poisson solver is caller-supplied so each worker owns its plans.
  FrameResult process(const TactileImage& frame, PoissonSolver& solver,
                      int index, const std::string& name) const {
    const auto& geom = cfg_.analysis.geometry;
    if (frame.width != geom.width || frame.height != geom.height)
      throw InputError(name + ": frame size does not match the geometry");

    FrameResult r;
    r.index = index;
    r.file = name;

    const auto detected = distortion::detect_markers(frame);
    r.detected_markers = static_cast<int>(detected.size());
    const bool trackable =
        !reference_markers_.markers.empty() && !detected.markers.empty();
    const auto motion = trackable
                            ? markers::track(reference_markers_, detected)
                            : markers::MotionField{};
    r.matched_markers = static_cast<int>(motion.matches.size());

    stereo::ReconstructionStats stats;
    const DepthMap depth =
        stereo::reconstruct(frame, reference_, table_, solver, &stats);
    r.clamped_fraction = stats.clamped_fraction;
    r.fallback_fraction = stats.fallback_fraction;
    double peak = 0.0;
    int px = 0, py = 0;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x)
        if (depth.z(x, y) > peak) {
          peak = depth.z(x, y);
          px = x;
          py = y;
        }
    r.peak_depth_mm = peak;
    r.peak_x_px = px;
    r.peak_y_px = py;

    r.slip = slip::detect_slip(motion, depth, cfg_.analysis.slip);
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x)
        if (r.slip.mask(x, y)) {
          sum += depth.z(x, y);
          ++n;
        }
    r.contact_pixels = n;
    r.mean_contact_depth_mm = n > 0 ? sum / n : 0.0;

    const auto disp = fem::displacement_field(motion, depth, mesh_, geom,
                                              cfg_.analysis.camera);
    const auto forces = fem::compute_forces(stiffness_, disp, mesh_);
    r.total_fx_n = forces.total_fx_n;
    r.total_fy_n = forces.total_fy_n;
    r.total_fz_n = forces.total_fz_n;
    for (const auto& f : forces.top_nodes)
      r.max_normal_n = std::max(r.max_normal_n, std::abs(f.fz_n));
    return r;
  }

  TactileImage load_frame(const std::string& path) const {
    TactileImage img = read_image(path);
    if (warp_) {
      if (img.width != warp_->src_x.width() ||
          img.height != warp_->src_x.height())
        throw InputError(path + ": frame size does not match the warp map");
      return distortion::apply_warp(img, *warp_);
    }
    return img;
  }

  struct RunSummary {
    int frames = 0;
    double wall_seconds = 0.0;
    double frames_per_second = 0.0;
    std::vector<FrameResult> results;
  };

  /// Replays the configured frame directory. Per-frame records and
  /// summary.json are deterministic; wall time goes to throughput.log.
  RunSummary run() const {
    const auto files = list_frames(cfg_.frames_dir);
    std::filesystem::create_directories(cfg_.out_dir);

    std::vector<FrameResult> results(files.size());
    const int jobs =
        std::max(1, std::min<int>(cfg_.jobs, static_cast<int>(files.size())));

    const auto t0 = std::chrono::steady_clock::now();
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      PoissonSolver solver(cfg_.analysis.geometry.width,
                           cfg_.analysis.geometry.height,
                           cfg_.analysis.geometry.pixel_pitch_mm);
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= files.size()) return;
        try {
          results[i] = process(load_frame(files[i]), solver,
                               static_cast<int>(i),
                               std::filesystem::path(files[i])
                                   .filename()
                                   .string());
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(files.size());
          return;
        }
      }
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(jobs));
      for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    const auto t1 = std::chrono::steady_clock::now();

    RunSummary s;
    s.frames = static_cast<int>(files.size());
    s.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    s.frames_per_second =
        s.wall_seconds > 0.0 ? s.frames / s.wall_seconds : 0.0;

    for (const auto& r : results) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06d.json", r.index);
      config::write_json_file(
          (std::filesystem::path(cfg_.out_dir) / name).string(),
          frame_record(r));
    }

    config::json summary;
    summary["frames"] = s.frames;
    int stiction = 0, slipping = 0, no_contact = 0;
    double peak_sum = 0.0;
    for (const auto& r : results) {
      switch (r.slip.state) {
        case slip::SlipState::stiction: ++stiction; break;
        case slip::SlipState::incipient_slip: ++slipping; break;
        case slip::SlipState::no_contact: ++no_contact; break;
      }
      peak_sum += r.peak_depth_mm;
    }
    summary["states"] = {{"stiction", stiction},
                         {"incipient_slip", slipping},
                         {"no_contact", no_contact}};
    summary["mean_peak_depth_mm"] = s.frames > 0 ? peak_sum / s.frames : 0.0;
    config::write_json_file(
        (std::filesystem::path(cfg_.out_dir) / "summary.json").string(),
        summary);

    std::ofstream log(std::filesystem::path(cfg_.out_dir) / "throughput.log");
    log << "frames " << s.frames << "\n"
        << "wall_seconds " << s.wall_seconds << "\n"
        << "frames_per_second " << s.frames_per_second << "\n";

    s.results = std::move(results);
    return s;
  }

 private:
  config::PipelineConfig cfg_;
  stereo::CalibrationTable table_{32, 3.0, 0};
  std::optional<distortion::WarpMap> warp_;
  TactileImage reference_;
  distortion::MarkerSet reference_markers_;
  fem::HexMesh mesh_;
  Eigen::SparseMatrix<double> stiffness_;
};

}  // namespace tactus::pipeline
