#pragma once

#include <string>

#include "surfreg/segmentation.hpp"

namespace surfreg {

/// Wire format of the promptable-segmenter service (see interface/segment_protocol.md).
std::string encode_segment_request(const RgbImage& image, std::span<const Prompt> prompts);
/// Parses a response body and checks it against the expected image size.
SegmentResult decode_segment_response(const std::string& body, int width, int height);

struct ServiceHealth {
  std::string status;
  std::string backend;
  std::string version;
};

/// HTTP client for an external segmenter. `url` is "http://host:port".
class ServiceSegmenter final : public Segmenter {
 public:
  explicit ServiceSegmenter(std::string url, double timeout_seconds = 10.0);

  /// GET /health. Throws Segmenter on transport or schema errors.
  ServiceHealth health() const;

  SegmentResult segment(const SensorFrame& frame, std::span<const Prompt> prompts) override;
  std::string name() const override { return "service:" + url_; }

 private:
  std::string url_;
  double timeout_;
};

}  // namespace surfreg
