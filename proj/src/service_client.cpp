#include "surfreg/service_client.hpp"

#include <httplib.h>

#include <json.hpp>

#include "surfreg/error.hpp"
#include "surfreg/image_io.hpp"

namespace surfreg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::Segmenter, msg); }

httplib::Client make_client(const std::string& url, double timeout) {
  httplib::Client cli(url);
  const auto secs = static_cast<time_t>(timeout);
  const auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  return cli;
}

}  // namespace

std::string encode_segment_request(const RgbImage& image, std::span<const Prompt> prompts) {
  json body;
  body["image"] = base64_encode(encode_png_rgb8(image));
  body["prompts"] = json::array();
  for (const Prompt& p : prompts) {
    body["prompts"].push_back({{"x", p.col}, {"y", p.row}, {"positive", p.positive}});
  }
  return body.dump();
}

SegmentResult decode_segment_response(const std::string& body, int width, int height) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    fail(std::string("segment response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("mask") || !j["mask"].is_string()) {
    fail("segment response: missing string field 'mask'");
  }
  if (!j.contains("confidence") || !j["confidence"].is_number()) {
    fail("segment response: missing numeric field 'confidence'");
  }
  Raster<std::uint8_t> raw;
  try {
    raw = decode_png_gray8(base64_decode(j["mask"].get<std::string>()));
  } catch (const Error& e) {
    fail(std::string("segment response: bad mask payload: ") + e.what());
  }
  if (raw.width() != width || raw.height() != height) {
    fail("segment response: mask is " + std::to_string(raw.width()) + "x" +
         std::to_string(raw.height()) + ", expected " + std::to_string(width) + "x" +
         std::to_string(height));
  }
  SegmentResult out;
  out.mask = BinaryMask(width, height);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::uint8_t v = raw.data()[i];
    if (v != 0 && v != 255) fail("segment response: mask values must be 0 or 255");
    out.mask.data()[i] = v ? 1 : 0;
  }
  out.confidence = j["confidence"].get<double>();
  if (!(out.confidence >= 0.0 && out.confidence <= 1.0)) {
    fail("segment response: confidence outside [0, 1]");
  }
  return out;
}

ServiceSegmenter::ServiceSegmenter(std::string url, double timeout_seconds)
    : url_(std::move(url)), timeout_(timeout_seconds) {
  if (url_.empty()) throw Error(ErrorKind::Config, "service segmenter: empty url");
  if (!(timeout_ > 0.0)) throw Error(ErrorKind::Config, "service segmenter: timeout must be > 0");
}

ServiceHealth ServiceSegmenter::health() const {
  auto cli = make_client(url_, timeout_);
  const auto res = cli.Get("/health");
  if (!res) fail("GET " + url_ + "/health: " + httplib::to_string(res.error()));
  if (res->status != 200) fail("GET /health returned HTTP " + std::to_string(res->status));
  try {
    const json j = json::parse(res->body);
    return {j.at("status").get<std::string>(), j.at("backend").get<std::string>(),
            j.at("version").get<std::string>()};
  } catch (const json::exception& e) {
    fail(std::string("GET /health: malformed body: ") + e.what());
  }
}

SegmentResult ServiceSegmenter::segment(const SensorFrame& frame, std::span<const Prompt> prompts) {
  auto cli = make_client(url_, timeout_);
  const auto res =
      cli.Post("/segment", encode_segment_request(frame.pv_image, prompts), "application/json");
  if (!res) fail("POST " + url_ + "/segment: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    fail("POST /segment returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  return decode_segment_response(res->body, frame.pv_image.width(), frame.pv_image.height());
}

}  // namespace surfreg
