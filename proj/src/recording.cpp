#include "surfreg/recording.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "surfreg/error.hpp"
#include "surfreg/image_io.hpp"

namespace surfreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(std::size_t index) {
  std::ostringstream s;
  s << std::setw(6) << std::setfill('0') << index << ".png";
  return s.str();
}

json matrix_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  json arr = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
  }
  return arr;
}

json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

[[noreturn]] void bad_field(std::size_t line, const std::string& field, const std::string& why) {
  std::ostringstream msg;
  msg << "manifest line " << line + 1 << ": field '" << field << "' " << why;
  throw Error(ErrorKind::Format, msg.str());
}

const json& require(const json& obj, const char* field, std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) bad_field(line, field, "is missing");
  return *it;
}

double number(const json& obj, const char* field, std::size_t line) {
  const json& v = require(obj, field, line);
  if (!v.is_number()) bad_field(line, field, "must be a number");
  return v.get<double>();
}

RigidTransform matrix_field(const json& obj, const char* field, std::size_t line) {
  const json& v = require(obj, field, line);
  if (!v.is_array() || v.size() != 16) bad_field(line, field, "must be 16 numbers");
  Mat4 m;
  for (int i = 0; i < 16; ++i) {
    if (!v[i].is_number()) bad_field(line, field, "must be 16 numbers");
    m(i / 4, i % 4) = v[i].get<double>();
  }
  try {
    return RigidTransform::from_matrix(m);
  } catch (const Error& e) {
    bad_field(line, field, std::string("is not a rigid transform: ") + e.what());
  }
}

CameraIntrinsics intrinsics_field(const json& obj, const char* field, std::size_t line) {
  const json& v = require(obj, field, line);
  if (!v.is_object()) bad_field(line, field, "must be an object");
  CameraIntrinsics k;
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!v.contains(key) || !v[key].is_number()) {
      bad_field(line, std::string(field) + "." + key, "is missing or not a number");
    }
  }
  k.fx = v["fx"].get<double>();
  k.fy = v["fy"].get<double>();
  k.cx = v["cx"].get<double>();
  k.cy = v["cy"].get<double>();
  k.width = v["width"].get<int>();
  k.height = v["height"].get<int>();
  try {
    k.validate();
  } catch (const Error& e) {
    bad_field(line, field, e.what());
  }
  return k;
}

std::string path_field(const json& obj, const char* field, std::size_t line) {
  const json& v = require(obj, field, line);
  if (!v.is_string() || v.get<std::string>().empty()) bad_field(line, field, "must be a path");
  return v.get<std::string>();
}

}  // namespace

Recording::Recording(const fs::path& dir) : dir_(dir) {
  const fs::path manifest = dir / "manifest.jsonl";
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Format, "recording: cannot open " + manifest.string());
  std::string text;
  std::size_t line = 0;
  double last = -std::numeric_limits<double>::infinity();
  for (; std::getline(in, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      std::ostringstream msg;
      msg << "manifest line " << line + 1 << ": not valid JSON (" << e.what() << ")";
      throw Error(ErrorKind::Format, msg.str());
    }
    if (!obj.is_object()) bad_field(line, "<line>", "must be a JSON object");
    Entry e;
    e.meta.timestamp = number(obj, "timestamp", line);
    if (!(e.meta.timestamp > last)) bad_field(line, "timestamp", "must strictly increase");
    last = e.meta.timestamp;
    e.meta.pv_timestamp =
        obj.contains("pv_timestamp") ? number(obj, "pv_timestamp", line) : e.meta.timestamp;
    e.meta.pose_ref_to_world = matrix_field(obj, "pose_ref_to_world", line);
    e.meta.extr_depth_to_ref = matrix_field(obj, "extr_depth_to_ref", line);
    e.meta.extr_pv_to_ref = matrix_field(obj, "extr_pv_to_ref", line);
    e.meta.intr_depth = intrinsics_field(obj, "intr_depth", line);
    e.meta.intr_pv = intrinsics_field(obj, "intr_pv", line);
    if (obj.contains("gt_model_pose") && !obj["gt_model_pose"].is_null()) {
      e.meta.gt_model_pose = matrix_field(obj, "gt_model_pose", line);
    }
    e.pv = path_field(obj, "pv", line);
    e.depth = path_field(obj, "depth", line);
    if (obj.contains("label") && !obj["label"].is_null()) e.label = path_field(obj, "label", line);
    entries_.push_back(std::move(e));
  }
}

SensorFrame Recording::frame(std::size_t index) const {
  if (index >= entries_.size()) throw Error(ErrorKind::InvalidParameter, "recording: bad index");
  const Entry& e = entries_[index];
  SensorFrame f = e.meta;
  auto load = [&](const std::string& rel, const char* what) {
    const fs::path p = dir_ / rel;
    if (!fs::exists(p)) {
      std::ostringstream msg;
      msg << "recording frame " << index << ": missing " << what << " file " << p.string();
      throw Error(ErrorKind::Io, msg.str());
    }
    return read_file_bytes(p);
  };
  f.pv_image = decode_png_rgb8(load(e.pv, "pv"));
  const Raster<std::uint16_t> mm = decode_png_gray16(load(e.depth, "depth"));
  f.depth_map = DepthMap(mm.width(), mm.height());
  for (std::size_t i = 0; i < mm.size(); ++i) f.depth_map.data()[i] = mm.data()[i] / 1000.0;
  if (!e.label.empty()) {
    Raster<std::uint8_t> raw = decode_png_gray8(load(e.label, "label"));
    for (auto& v : raw.data()) v = v != 0 ? 1 : 0;
    f.gt_label_map = std::move(raw);
  }
  try {
    f.validate();
  } catch (const Error& err) {
    std::ostringstream msg;
    msg << "recording frame " << index << ": " << err.what();
    throw Error(ErrorKind::Format, msg.str());
  }
  return f;
}

std::vector<SensorFrame> Recording::load_all() const {
  std::vector<SensorFrame> frames;
  frames.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) frames.push_back(frame(i));
  return frames;
}

std::vector<SensorFrame> load_recording(const fs::path& dir) { return Recording(dir).load_all(); }

void save_recording(std::span<const SensorFrame> frames, const fs::path& dir) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path parent = target.parent_path();
  const std::string tag = std::to_string(::getpid());
  const fs::path tmp = parent / (target.filename().string() + ".tmp-" + tag);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp / "pv", ec) || !fs::create_directories(tmp / "depth", ec)) {
    throw Error(ErrorKind::Io, "recording: cannot create " + tmp.string());
  }
  try {
    std::ofstream manifest(tmp / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw Error(ErrorKind::Io, "recording: cannot write manifest in " + tmp.string());
    double last = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const SensorFrame& f = frames[i];
      f.validate();
      if (!(f.timestamp > last)) {
        throw Error(ErrorKind::Ordering, "recording: timestamps must strictly increase");
      }
      last = f.timestamp;
      const std::string name = frame_name(i);
      json obj = {
          {"timestamp", f.timestamp},
          {"pv_timestamp", f.pv_timestamp},
          {"pose_ref_to_world", matrix_json(f.pose_ref_to_world)},
          {"extr_depth_to_ref", matrix_json(f.extr_depth_to_ref)},
          {"extr_pv_to_ref", matrix_json(f.extr_pv_to_ref)},
          {"intr_depth", intrinsics_json(f.intr_depth)},
          {"intr_pv", intrinsics_json(f.intr_pv)},
          {"pv", "pv/" + name},
          {"depth", "depth/" + name},
      };
      write_file_bytes(tmp / "pv" / name, encode_png_rgb8(f.pv_image));
      Raster<std::uint16_t> mm(f.depth_map.width(), f.depth_map.height());
      for (std::size_t k = 0; k < mm.size(); ++k) {
        mm.data()[k] = static_cast<std::uint16_t>(
            std::min(std::round(f.depth_map.data()[k] * 1000.0), 65535.0));
      }
      write_file_bytes(tmp / "depth" / name, encode_png_gray16(mm));
      if (f.gt_label_map) {
        fs::create_directories(tmp / "label");
        Raster<std::uint8_t> label = *f.gt_label_map;
        for (auto& v : label.data()) v = v != 0 ? 255 : 0;
        write_file_bytes(tmp / "label" / name, encode_png_gray8(label));
        obj["label"] = "label/" + name;
      }
      if (f.gt_model_pose) obj["gt_model_pose"] = matrix_json(*f.gt_model_pose);
      manifest << obj.dump() << '\n';
    }
    manifest.close();
    if (!manifest) throw Error(ErrorKind::Io, "recording: manifest write failed");

    const fs::path old = parent / (target.filename().string() + ".old-" + tag);
    const bool existed = fs::exists(target);
    if (existed) fs::rename(target, old);
    fs::rename(tmp, target);
    if (existed) fs::remove_all(old, ec);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw Error(ErrorKind::Io, std::string("recording: ") + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

}  // namespace surfreg
