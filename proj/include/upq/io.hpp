#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "upq/baselines.hpp"
#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/raster.hpp"

namespace upq::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct Dims {
  int width = 0;
  int height = 0;
};

// ---------------------------------------------------------------------------
// PNG

enum class PngLayout { kGray8, kGray16, kRgb8 };

/// Decoded samples, interleaved per pixel, widened to 16 bits.
struct PngImage {
  int width = 0;
  int height = 0;
  PngLayout layout = PngLayout::kGray8;
  std::vector<std::uint16_t> samples;

  int channels() const { return layout == PngLayout::kRgb8 ? 3 : 1; }
};

namespace detail {

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message != nullptr) *message = msg;
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline const char* layout_name(PngLayout l) {
  switch (l) {
    case PngLayout::kGray8: return "8-bit grayscale";
    case PngLayout::kGray16: return "16-bit grayscale";
    case PngLayout::kRgb8: return "8-bit RGB";
  }
  return "?";
}

// setjmp-protected decode. No object with a nontrivial destructor is
// created between setjmp and the last libpng call.
inline bool decode_png(std::FILE* fp, png_uint_32& width, png_uint_32& height, int& bit_depth, int& color_type,
                       std::vector<png_byte>& bytes, std::string& message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  bytes.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = bytes.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool encode_png(std::FILE* fp, png_uint_32 width, png_uint_32 height, int bit_depth, int color_type,
                       std::vector<png_byte>& bytes, std::size_t rowbytes, std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = bytes.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline PngImage read_png(const fs::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<png_byte> bytes;
  std::string message;
  if (!detail::decode_png(fp.get(), width, height, bit_depth, color_type, bytes, message)) {
    throw Error(ErrorKind::kFormat, path.string() + ": not a readable PNG (" + message + ")");
  }
  PngImage img;
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth == 8) {
    img.layout = PngLayout::kGray8;
  } else if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth == 16) {
    img.layout = PngLayout::kGray16;
  } else if (color_type == PNG_COLOR_TYPE_RGB && bit_depth == 8) {
    img.layout = PngLayout::kRgb8;
  } else {
    throw Error(ErrorKind::kBitDepth, path.string() + ": unsupported PNG (color type " + std::to_string(color_type) +
                                          ", bit depth " + std::to_string(bit_depth) + ")");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height * img.channels();
  img.samples.resize(n);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      img.samples[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) img.samples[i] = bytes[i];
  }
  return img;
}

inline void write_png(const fs::path& path, const PngImage& img) {
  const int channels = img.channels();
  const int bit_depth = img.layout == PngLayout::kGray16 ? 16 : 8;
  const int color_type = img.layout == PngLayout::kRgb8 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  const std::size_t bytes_per_sample = bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width) * channels * bytes_per_sample;
  std::vector<png_byte> bytes(rowbytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bit_depth == 16) {
      bytes[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      bytes[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xFF);
    } else {
      bytes[i] = static_cast<png_byte>(img.samples[i]);
    }
  }
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  std::string message;
  if (!detail::encode_png(fp.get(), static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                          bit_depth, color_type, bytes, rowbytes, message)) {
    throw Error(ErrorKind::kIo, path.string() + ": PNG encoding failed (" + message + ")");
  }
}

namespace detail {

inline PngImage read_expecting(const fs::path& path, PngLayout layout, std::optional<Dims> expect) {
  PngImage img = read_png(path);
  if (img.layout != layout) {
    throw Error(ErrorKind::kBitDepth, path.string() + ": expected " + layout_name(layout) + ", found " +
                                          layout_name(img.layout));
  }
  if (expect && (img.width != expect->width || img.height != expect->height)) {
    throw Error(ErrorKind::kDimension, path.string() + ": expected " + std::to_string(expect->width) + "x" +
                                           std::to_string(expect->height) + ", found " + std::to_string(img.width) +
                                           "x" + std::to_string(img.height));
  }
  return img;
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

inline void check_schema(const json& j, const fs::path& path) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorKind::kFormat, path.string() + ": missing schema_version");
  }
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw Error(ErrorKind::kSchema, path.string() + ": unsupported schema_version " + j.at("schema_version").dump());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Panoptic rasters

enum class PanopticEncoding {
  kIdRgb,      // 8-bit RGB id = R + 256 G + 65536 B, sidecar segment table
  kClass1000,  // 16-bit gray id = class * 1000 + instance
};

inline constexpr std::uint16_t kClass1000Unknown = 65535;
inline constexpr std::uint16_t kClass1000Other = 65534;
inline constexpr std::uint32_t kClass1000UnknownInstance = 999;

/// Sidecar path of an id-RGB raster: same stem, ".json".
inline fs::path sidecar_path(const fs::path& png) {
  fs::path p = png;
  p.replace_extension(".json");
  return p;
}

/// Writes an id-RGB raster. Ids are assigned 1.. in sorted segment-key
/// order; id 0 is unknown class and has no sidecar entry.
inline void save_panoptic_rgb(const fs::path& path, const PanopticRaster& raster) {
  validate_panoptic(raster);
  std::map<std::pair<ClassId, SegmentId>, std::uint32_t> ids;
  auto entry_of = [](PanopticLabel l) -> std::optional<std::pair<ClassId, SegmentId>> {
    if (l.cls == kUnknownClass) return std::nullopt;
    if (l.cls == kOtherClass) return std::pair{kOtherClass, kUnknownInstance};
    return std::pair{l.cls, l.segment};
  };
  for (const auto& px : raster.pixels()) {
    if (auto e = entry_of(px)) ids.emplace(*e, 0);
  }
  if (ids.size() >= (1u << 24)) throw Error(ErrorKind::kArgument, "too many segments for id-RGB encoding");
  json segments = json::array();
  std::uint32_t next = 1;
  for (auto& [key, id] : ids) {
    id = next++;
    segments.push_back({{"id", id},
                        {"class", key.first},
                        {"segment", key.second},
                        {"is_thing", is_thing(key.first)}});
  }
  PngImage img{raster.width(), raster.height(), PngLayout::kRgb8, std::vector<std::uint16_t>(raster.size() * 3)};
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const auto e = entry_of(raster[i]);
    const std::uint32_t id = e ? ids.at(*e) : 0;
    img.samples[3 * i] = id & 0xFF;
    img.samples[3 * i + 1] = (id >> 8) & 0xFF;
    img.samples[3 * i + 2] = (id >> 16) & 0xFF;
  }
  write_png(path, img);
  detail::write_text_file(sidecar_path(path), json{{"schema_version", kSchemaVersion}, {"segments", segments}}.dump(2) + "\n");
}

inline PanopticRaster load_panoptic_rgb(const fs::path& path, std::optional<Dims> expect = std::nullopt) {
  const PngImage img = detail::read_expecting(path, PngLayout::kRgb8, expect);
  const fs::path side = sidecar_path(path);
  const json table = detail::read_json_file(side);
  detail::check_schema(table, side);
  std::map<std::uint32_t, PanopticLabel> lookup;
  try {
    for (const auto& s : table.at("segments")) {
      const auto id = s.at("id").get<std::uint32_t>();
      const int cls = s.at("class").get<int>();
      const auto segment = s.at("segment").get<std::uint32_t>();
      const bool thing = s.at("is_thing").get<bool>();
      if (id == 0 || id >= (1u << 24)) throw Error(ErrorKind::kFormat, side.string() + ": id out of range");
      if (!(is_valid_class(static_cast<ClassId>(cls)) || cls == kOtherClass) || cls < 0 || cls > 255) {
        throw Error(ErrorKind::kFormat, side.string() + ": invalid class " + std::to_string(cls));
      }
      if (thing != is_thing(static_cast<ClassId>(cls))) {
        throw Error(ErrorKind::kFormat, side.string() + ": is_thing disagrees with class " + std::to_string(cls));
      }
      if (!lookup.emplace(id, PanopticLabel{static_cast<ClassId>(cls), segment}).second) {
        throw Error(ErrorKind::kFormat, side.string() + ": duplicate id " + std::to_string(id));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, side.string() + ": " + e.what());
  }
  PanopticRaster out(img.width, img.height, PanopticLabel::unknown());
  std::uint32_t last_id = 0;
  PanopticLabel last = PanopticLabel::unknown();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t id = img.samples[3 * i] | (img.samples[3 * i + 1] << 8) | (img.samples[3 * i + 2] << 16);
    if (id == 0) continue;
    if (id != last_id) {
      auto it = lookup.find(id);
      if (it == lookup.end()) {
        throw Error(ErrorKind::kFormat, path.string() + ": pixel id " + std::to_string(id) + " has no sidecar entry");
      }
      last_id = id;
      last = it->second;
    }
    out[i] = last;
  }
  try {
    validate_panoptic(out);
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return out;
}

/// class * 1000 + instance; stuff uses instance 0, unknown instance 999,
/// unknown class 65535, other class 65534.
inline std::uint16_t encode_class1000(PanopticLabel l) {
  if (l.cls == kUnknownClass) return kClass1000Unknown;
  if (l.cls == kOtherClass) return kClass1000Other;
  if (!is_valid_class(l.cls)) throw Error(ErrorKind::kArgument, "invalid class for class*1000 encoding");
  if (is_stuff(l.cls)) return static_cast<std::uint16_t>(l.cls * 1000);
  if (l.segment == kUnknownInstance) return static_cast<std::uint16_t>(l.cls * 1000 + kClass1000UnknownInstance);
  if (l.segment == kNoSegment || l.segment >= kClass1000UnknownInstance) {
    throw Error(ErrorKind::kArgument, "instance id " + std::to_string(l.segment) +
                                          " not representable in class*1000 encoding (1..998)");
  }
  return static_cast<std::uint16_t>(l.cls * 1000 + l.segment);
}

inline PanopticLabel decode_class1000(std::uint16_t id) {
  if (id == kClass1000Unknown) return PanopticLabel::unknown();
  if (id == kClass1000Other) return PanopticLabel::other();
  const int cls = id / 1000;
  const std::uint32_t inst = id % 1000;
  if (cls >= kNumClasses) throw Error(ErrorKind::kFormat, "id " + std::to_string(id) + " has no valid class");
  const auto c = static_cast<ClassId>(cls);
  if (is_stuff(c)) {
    if (inst != 0) throw Error(ErrorKind::kFormat, "stuff id " + std::to_string(id) + " carries an instance");
    return PanopticLabel::stuff(c);
  }
  if (inst == 0) throw Error(ErrorKind::kFormat, "things id " + std::to_string(id) + " has no instance");
  if (inst == kClass1000UnknownInstance) return PanopticLabel::unknown_instance(c);
  return PanopticLabel::thing(c, inst);
}

inline void save_panoptic_class1000(const fs::path& path, const PanopticRaster& raster) {
  validate_panoptic(raster);
  PngImage img{raster.width(), raster.height(), PngLayout::kGray16, std::vector<std::uint16_t>(raster.size())};
  for (std::size_t i = 0; i < raster.size(); ++i) img.samples[i] = encode_class1000(raster[i]);
  write_png(path, img);
}

inline PanopticRaster load_panoptic_class1000(const fs::path& path, std::optional<Dims> expect = std::nullopt) {
  const PngImage img = detail::read_expecting(path, PngLayout::kGray16, expect);
  PanopticRaster out(img.width, img.height);
  try {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decode_class1000(img.samples[i]);
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return out;
}

inline void save_panoptic(const fs::path& path, const PanopticRaster& raster, PanopticEncoding enc) {
  enc == PanopticEncoding::kIdRgb ? save_panoptic_rgb(path, raster) : save_panoptic_class1000(path, raster);
}

inline PanopticRaster load_panoptic(const fs::path& path, PanopticEncoding enc,
                                    std::optional<Dims> expect = std::nullopt) {
  return enc == PanopticEncoding::kIdRgb ? load_panoptic_rgb(path, expect) : load_panoptic_class1000(path, expect);
}

// ---------------------------------------------------------------------------
// Difficulty and confidence rasters

inline void save_difficulty(const fs::path& path, const DifficultyRaster& raster) {
  PngImage img{raster.width(), raster.height(), PngLayout::kGray8, std::vector<std::uint16_t>(raster.size())};
  for (std::size_t i = 0; i < raster.size(); ++i) img.samples[i] = static_cast<std::uint16_t>(raster[i]);
  write_png(path, img);
}

inline DifficultyRaster load_difficulty(const fs::path& path, std::optional<Dims> expect = std::nullopt) {
  const PngImage img = detail::read_expecting(path, PngLayout::kGray8, expect);
  DifficultyRaster out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (img.samples[i] > 2) {
      throw Error(ErrorKind::kFormat, path.string() + ": difficulty value " + std::to_string(img.samples[i]) +
                                          " at pixel " + std::to_string(i));
    }
    out[i] = static_cast<Difficulty>(img.samples[i]);
  }
  return out;
}

/// score = value / 65535, exact at 0 and 1.
inline std::uint16_t quantize_confidence(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(ErrorKind::kArgument, "confidence score " + std::to_string(score) + " outside [0, 1]");
  }
  return static_cast<std::uint16_t>(std::lround(score * 65535.0));
}

inline void save_confidence(const fs::path& path, const ConfidenceRaster& conf) {
  PngImage img{conf.width(), conf.height(), PngLayout::kGray16, std::vector<std::uint16_t>(conf.scores.size())};
  for (std::size_t i = 0; i < conf.scores.size(); ++i) img.samples[i] = quantize_confidence(conf.scores[i]);
  write_png(path, img);
}

inline ConfidenceRaster load_confidence(const fs::path& path, ConfidenceKind kind,
                                        std::optional<Dims> expect = std::nullopt) {
  const PngImage img = detail::read_expecting(path, PngLayout::kGray16, expect);
  ConfidenceRaster out{kind, Raster<double>(img.width, img.height)};
  for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i] = img.samples[i] / 65535.0;
  return out;
}

// ---------------------------------------------------------------------------
// Mask-classification outputs: a JSON pair list whose soft masks are
// stored as 16-bit confidence PNGs next to it.

inline void save_mask_classification(const fs::path& path, const MaskClassificationOutput& mc) {
  mc.validate();
  json pairs = json::array();
  for (std::size_t i = 0; i < mc.pairs(); ++i) {
    fs::path mask = path;
    mask.replace_filename(path.stem().string() + "_mask" + std::to_string(i) + ".png");
    save_confidence(mask, ConfidenceRaster{ConfidenceKind::kClass, mc.masks[i]});
    pairs.push_back({{"probs", mc.probs[i]}, {"mask", mask.filename().string()}});
  }
  detail::write_text_file(path, json{{"schema_version", kSchemaVersion},
                                     {"width", mc.width},
                                     {"height", mc.height},
                                     {"pairs", pairs}}
                                    .dump(2) +
                                    "\n");
}

inline MaskClassificationOutput load_mask_classification(const fs::path& path, std::optional<Dims> expect = std::nullopt) {
  const json j = detail::read_json_file(path);
  detail::check_schema(j, path);
  MaskClassificationOutput mc;
  try {
    mc.width = j.at("width").get<int>();
    mc.height = j.at("height").get<int>();
    if (expect && (mc.width != expect->width || mc.height != expect->height)) {
      throw Error(ErrorKind::kDimension, path.string() + ": mask-classification size differs");
    }
    for (const auto& p : j.at("pairs")) {
      const auto probs = p.at("probs").get<std::vector<double>>();
      if (probs.size() != MaskClassificationOutput::Distribution{}.size()) {
        throw Error(ErrorKind::kFormat, path.string() + ": distribution must have 20 entries");
      }
      MaskClassificationOutput::Distribution d{};
      std::copy(probs.begin(), probs.end(), d.begin());
      mc.probs.push_back(d);
      const fs::path mask = path.parent_path() / p.at("mask").get<std::string>();
      mc.masks.push_back(load_confidence(mask, ConfidenceKind::kClass, Dims{mc.width, mc.height}).scores);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  try {
    mc.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return mc;
}

// ---------------------------------------------------------------------------
// Dataset manifest

inline const std::set<std::string>& condition_tags() {
  static const std::set<std::string> tags = {"clear", "fog", "rain", "snow", "day", "night"};
  return tags;
}

struct SampleRecord {
  std::string sample_id;
  std::optional<fs::path> prediction;
  std::optional<fs::path> ground_truth;
  std::optional<fs::path> difficulty;
  std::optional<fs::path> class_conf;
  std::optional<fs::path> inst_conf;
  std::optional<fs::path> h1;
  std::optional<fs::path> h2;
  std::optional<fs::path> semantic_prediction;
  std::optional<fs::path> mask_classification;
  std::vector<std::string> conditions;
};

struct DatasetManifest {
  PanopticEncoding encoding = PanopticEncoding::kIdRgb;
  std::vector<SampleRecord> samples;
};

inline const char* encoding_name(PanopticEncoding e) { return e == PanopticEncoding::kIdRgb ? "id_rgb" : "class1000"; }

inline PanopticEncoding parse_encoding(const std::string& s) {
  if (s == "id_rgb") return PanopticEncoding::kIdRgb;
  if (s == "class1000") return PanopticEncoding::kClass1000;
  throw Error(ErrorKind::kArgument, "unknown panoptic encoding '" + s + "' (id_rgb | class1000)");
}

namespace detail {

inline constexpr std::array<std::pair<const char*, std::optional<fs::path> SampleRecord::*>, 9> kPathFields = {{
    {"prediction", &SampleRecord::prediction},
    {"ground_truth", &SampleRecord::ground_truth},
    {"difficulty", &SampleRecord::difficulty},
    {"class_conf", &SampleRecord::class_conf},
    {"inst_conf", &SampleRecord::inst_conf},
    {"h1", &SampleRecord::h1},
    {"h2", &SampleRecord::h2},
    {"semantic_prediction", &SampleRecord::semantic_prediction},
    {"mask_classification", &SampleRecord::mask_classification},
}};

}  // namespace detail

/// Parses a manifest; relative paths resolve against its directory. File
/// existence is not checked here.
inline DatasetManifest load_manifest(const fs::path& path) {
  const json j = detail::read_json_file(path);
  detail::check_schema(j, path);
  const fs::path base = path.parent_path();
  DatasetManifest m;
  std::set<std::string> seen;
  try {
    if (j.contains("panoptic_encoding")) m.encoding = parse_encoding(j.at("panoptic_encoding").get<std::string>());
    for (const auto& s : j.at("samples")) {
      SampleRecord r;
      r.sample_id = s.at("sample_id").get<std::string>();
      if (!seen.insert(r.sample_id).second) {
        throw Error(ErrorKind::kFormat, path.string() + ": duplicate sample_id '" + r.sample_id + "'");
      }
      for (const auto& [name, field] : detail::kPathFields) {
        if (s.contains(name) && !s.at(name).is_null()) {
          fs::path p = s.at(name).get<std::string>();
          r.*field = p.is_absolute() ? p : base / p;
        }
      }
      if (s.contains("conditions")) {
        for (const auto& t : s.at("conditions")) {
          const auto tag = t.get<std::string>();
          if (!condition_tags().contains(tag)) {
            throw Error(ErrorKind::kFormat, path.string() + ": sample '" + r.sample_id + "' has unknown condition '" +
                                                tag + "'");
          }
          r.conditions.push_back(tag);
        }
      }
      m.samples.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kArgument) throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
    throw;
  }
  return m;
}

/// Writes paths relative to the manifest directory when they lie under it.
inline void save_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path base = path.parent_path();
  json samples = json::array();
  for (const auto& r : m.samples) {
    json s{{"sample_id", r.sample_id}, {"conditions", r.conditions}};
    for (const auto& [name, field] : detail::kPathFields) {
      if (!(r.*field)) continue;
      const fs::path rel = (r.*field)->lexically_relative(base);
      s[name] = (rel.empty() || *rel.begin() == "..") ? (r.*field)->string() : rel.string();
    }
    samples.push_back(std::move(s));
  }
  detail::write_text_file(path, json{{"schema_version", kSchemaVersion},
                                     {"panoptic_encoding", encoding_name(m.encoding)},
                                     {"samples", samples}}
                                    .dump(2) +
                                    "\n");
}

// ---------------------------------------------------------------------------
// Deterministic report text: sorted keys, two-space indent, every float
// printed with six decimals.

namespace detail {

inline void escape_into(std::string& out, const std::string& s) { out += json(s).dump(); }

inline void emit(std::string& out, const json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close(static_cast<std::size_t>(depth) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        escape_into(out, it.key());
        out += ": ";
        emit(out, it.value(), depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t k = 0; k < j.size(); ++k) {
          if (k) out += ", ";
          emit(out, j[k], depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        emit(out, j[k], depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string format_report(const json& report) {
  std::string out;
  detail::emit(out, report, 0);
  out += "\n";
  return out;
}

inline void save_report(const fs::path& path, const json& report) { detail::write_text_file(path, format_report(report)); }

inline json load_report(const fs::path& path) {
  json j = detail::read_json_file(path);
  detail::check_schema(j, path);
  return j;
}

}  // namespace upq::io
