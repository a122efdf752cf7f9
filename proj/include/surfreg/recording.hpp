#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "surfreg/sensor.hpp"

namespace surfreg {

/// On-disk recording:
///   <dir>/manifest.jsonl      one JSON object per frame
///   <dir>/pv/NNNNNN.png       8-bit RGB
///   <dir>/depth/NNNNNN.png    16-bit gray, millimetres, 0 = invalid
///   <dir>/label/NNNNNN.png    optional 8-bit, 0/255
///
/// Manifest keys: timestamp, pv_timestamp, pose_ref_to_world,
/// extr_depth_to_ref, extr_pv_to_ref (row-major 4x4, 16 numbers),
/// intr_depth, intr_pv ({fx, fy, cx, cy, width, height}), pv, depth,
/// label (relative paths), gt_model_pose (optional 4x4).
class Recording {
 public:
  /// Parses and validates the manifest; rasters are loaded on demand.
  explicit Recording(const std::filesystem::path& dir);

  std::size_t size() const { return entries_.size(); }
  SensorFrame frame(std::size_t index) const;
  std::vector<SensorFrame> load_all() const;

 private:
  struct Entry {
    SensorFrame meta;  // everything except rasters
    std::string pv;
    std::string depth;
    std::string label;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
};

std::vector<SensorFrame> load_recording(const std::filesystem::path& dir);

/// Writes into a sibling temporary directory and renames it over `dir`.
/// Depth is stored in whole millimetres.
void save_recording(std::span<const SensorFrame> frames, const std::filesystem::path& dir);

}  // namespace surfreg
