#include "vqa/video.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace vqa {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error(std::string(what) + ": cannot open " + path.string());
  }
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string(what) + ": bad JSON in " + path.string() + ": " +
                             e.what());
  }
  return j;
}

}  // namespace

RawVideo load_raw_video(const std::filesystem::path& path,
                        const std::filesystem::path& sidecar) {
  const json j = read_json_file(sidecar, "video sidecar");
  RawVideo v;
  try {
    v.width = j.at("width").get<std::int64_t>();
    v.height = j.at("height").get<std::int64_t>();
    v.frames = j.at("frames").get<std::int64_t>();
    if (j.contains("bitdepth") && j.at("bitdepth").get<int>() != 8) {
      throw std::runtime_error("video sidecar: only 8-bit luma is supported");
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("video sidecar " + sidecar.string() + ": " + e.what());
  }
  if (v.width < 1 || v.height < 1 || v.frames < 1) {
    throw std::runtime_error("video sidecar " + sidecar.string() +
                             ": extents must be positive");
  }
  const std::uintmax_t expected = static_cast<std::uintmax_t>(v.width) *
                                  static_cast<std::uintmax_t>(v.height) *
                                  static_cast<std::uintmax_t>(v.frames);
  std::error_code ec;
  const std::uintmax_t actual = std::filesystem::file_size(path, ec);
  if (ec) throw std::runtime_error("video: cannot stat " + path.string());
  if (actual != expected) {
    throw std::runtime_error("video " + path.string() + ": file holds " +
                             std::to_string(actual) + " bytes, sidecar implies " +
                             std::to_string(expected));
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("video: cannot open " + path.string());
  v.luma.resize(static_cast<std::size_t>(expected));
  is.read(reinterpret_cast<char*>(v.luma.data()), static_cast<std::streamsize>(expected));
  if (!is) throw std::runtime_error("video: short read from " + path.string());
  return v;
}

RawVideo load_raw_video(const std::filesystem::path& path) {
  return load_raw_video(path, std::filesystem::path(path.string() + ".json"));
}

void save_raw_video(const std::filesystem::path& path, const RawVideo& video) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("video: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(video.luma.data()),
             static_cast<std::streamsize>(video.luma.size()));
    if (!os) throw std::runtime_error("video: write failed for " + path.string());
  }
  json j{{"width", video.width},
         {"height", video.height},
         {"frames", video.frames},
         {"bitdepth", 8}};
  std::ofstream os(path.string() + ".json");
  if (!os) throw std::runtime_error("video: cannot open sidecar for " + path.string());
  os << j.dump(2) << "\n";
}

// --- sampling -----------------------------------------------------------------

namespace {

void check_sampling_pre(const RawVideo& reference, const RawVideo& distorted,
                        std::int64_t d, std::int64_t window) {
  if (reference.width != distorted.width || reference.height != distorted.height ||
      reference.frames != distorted.frames) {
    throw std::invalid_argument("sampling: reference and distorted videos are not congruent");
  }
  if (d < 1 || window < 1) throw std::invalid_argument("sampling: bad segment geometry");
  if (distorted.frames < d) {
    throw std::invalid_argument("sampling: video has " + std::to_string(distorted.frames) +
                                " frames, segment needs " + std::to_string(d));
  }
  if (distorted.width < window || distorted.height < window) {
    throw std::invalid_argument("sampling: frame smaller than the sampling window");
  }
}

}  // namespace

ClipPair cut_clip(const RawVideo& reference, const RawVideo& distorted, std::int64_t d,
                  std::int64_t window, const SegmentAnchor& anchor, float label,
                  const std::string& video_id) {
  check_sampling_pre(reference, distorted, d, window);
  if (anchor.frame_offset < 0 || anchor.frame_offset + d > distorted.frames ||
      anchor.row < 0 || anchor.row + window > distorted.height || anchor.col < 0 ||
      anchor.col + window > distorted.width) {
    throw std::invalid_argument("cut_clip: anchor leaves the video bounds");
  }
  const std::int64_t n = d * window * window;
  std::vector<float> dist_data(static_cast<std::size_t>(n));
  std::vector<float> res_data(static_cast<std::size_t>(n));
  std::size_t w_idx = 0;
  for (std::int64_t f = 0; f < d; ++f) {
    for (std::int64_t y = 0; y < window; ++y) {
      for (std::int64_t x = 0; x < window; ++x, ++w_idx) {
        const double dv = distorted.at(anchor.frame_offset + f, anchor.row + y,
                                       anchor.col + x) / 255.0;
        const double rv = reference.at(anchor.frame_offset + f, anchor.row + y,
                                       anchor.col + x) / 255.0;
        dist_data[w_idx] = static_cast<float>(dv);
        res_data[w_idx] = static_cast<float>(rv - dv);
      }
    }
  }
  ClipPair clip;
  clip.distorted = Tensor::from_data({1, d, window, window}, std::move(dist_data));
  clip.residual = Tensor::from_data({1, d, window, window}, std::move(res_data));
  clip.label = label;
  clip.video_id = video_id;
  clip.frame_offset = anchor.frame_offset;
  clip.row = anchor.row;
  clip.col = anchor.col;
  return clip;
}

std::vector<ClipPair> sample_training_clips(const RawVideo& reference,
                                            const RawVideo& distorted, std::int64_t d,
                                            std::int64_t window, Rng& rng, float label,
                                            const std::string& video_id) {
  check_sampling_pre(reference, distorted, d, window);
  const std::int64_t max_offset = distorted.frames - d;
  const std::int64_t offset =
      max_offset > 0 ? static_cast<std::int64_t>(rng.uniform_int(
                           static_cast<std::uint64_t>(max_offset + 1)))
                     : 0;
  const std::int64_t tiles_y = distorted.height / window;
  const std::int64_t tiles_x = distorted.width / window;
  std::vector<ClipPair> clips;
  clips.reserve(static_cast<std::size_t>(tiles_y * tiles_x));
  for (std::int64_t ty = 0; ty < tiles_y; ++ty) {
    for (std::int64_t tx = 0; tx < tiles_x; ++tx) {
      clips.push_back(cut_clip(reference, distorted, d, window,
                               {offset, ty * window, tx * window}, label, video_id));
    }
  }
  return clips;
}

std::vector<SegmentAnchor> sample_eval_segments(const RawVideo& video, std::int64_t d,
                                                std::int64_t window) {
  if (d < 1 || window < 1) throw std::invalid_argument("sampling: bad segment geometry");
  if (video.frames < d) {
    throw std::invalid_argument("sampling: video has " + std::to_string(video.frames) +
                                " frames, segment needs " + std::to_string(d));
  }
  if (video.width < window || video.height < window) {
    throw std::invalid_argument("sampling: frame smaller than the sampling window");
  }
  std::vector<SegmentAnchor> anchors;
  for (std::int64_t t = 0; t + d <= video.frames; t += d) {
    for (std::int64_t ty = 0; ty < video.height / window; ++ty) {
      for (std::int64_t tx = 0; tx < video.width / window; ++tx) {
        anchors.push_back({t, ty * window, tx * window});
      }
    }
  }
  return anchors;
}

// --- manifest ------------------------------------------------------------------

const ReferenceEntry& DatasetManifest::reference_by_id(const std::string& id) const {
  for (const auto& r : references) {
    if (r.id == id) return r;
  }
  throw std::runtime_error("manifest: unknown reference id " + id);
}

std::vector<const DistortedEntry*> DatasetManifest::distorted_of(
    const std::string& reference_id) const {
  std::vector<const DistortedEntry*> out;
  for (const auto& d : distorted) {
    if (d.reference_id == reference_id) out.push_back(&d);
  }
  return out;
}

namespace {

ScorePolarity parse_polarity(const std::string& s) {
  if (s == "higher_is_better") return ScorePolarity::kHigherIsBetter;
  if (s == "lower_is_better") return ScorePolarity::kLowerIsBetter;
  throw std::runtime_error("manifest: score_polarity must be higher_is_better or lower_is_better");
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const json j = read_json_file(path, "manifest");
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  DatasetManifest m;
  try {
    m.polarity = parse_polarity(j.at("score_polarity").get<std::string>());
    for (const auto& r : j.at("references")) {
      ReferenceEntry e;
      e.id = r.at("id").get<std::string>();
      e.file = base / r.at("file").get<std::string>();
      m.references.push_back(std::move(e));
    }
    for (const auto& d : j.at("distorted")) {
      DistortedEntry e;
      e.id = d.at("id").get<std::string>();
      e.reference_id = d.at("reference_id").get<std::string>();
      e.file = base / d.at("file").get<std::string>();
      e.score = d.at("score").get<double>();
      if (d.contains("distortion")) e.distortion = d.at("distortion").get<std::string>();
      m.distorted.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  // Invariants: every reference id resolves, scores are finite.
  for (const auto& d : m.distorted) {
    m.reference_by_id(d.reference_id);
    if (!std::isfinite(d.score)) {
      throw std::runtime_error("manifest: non-finite score for " + d.id);
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  json j;
  j["score_polarity"] = manifest.polarity == ScorePolarity::kHigherIsBetter
                            ? "higher_is_better"
                            : "lower_is_better";
  j["references"] = json::array();
  for (const auto& r : manifest.references) {
    j["references"].push_back({{"id", r.id}, {"file", r.file.filename().string()}});
  }
  j["distorted"] = json::array();
  for (const auto& d : manifest.distorted) {
    json e{{"id", d.id},
           {"reference_id", d.reference_id},
           {"file", d.file.filename().string()},
           {"score", d.score}};
    if (!d.distortion.empty()) e["distortion"] = d.distortion;
    j["distorted"].push_back(std::move(e));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("manifest: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

// --- split ----------------------------------------------------------------------

SplitPlan make_split(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  const std::size_t n = manifest.references.size();
  if (n < 2) throw std::invalid_argument("make_split: need at least two references");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("make_split: fraction must be in (0,1)");
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& r : manifest.references) ids.push_back(r.id);

  // Seeded Fisher-Yates; std::shuffle is not pinned across stdlib versions.
  Rng rng = Rng(seed).fork(fnv1a64("split"));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
    std::swap(ids[i], ids[j]);
  }

  std::size_t train_count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  train_count = std::clamp<std::size_t>(train_count, 1, n - 1);

  SplitPlan plan;
  plan.seed = seed;
  plan.train_references.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_count));
  plan.test_references.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_count), ids.end());
  return plan;
}

// --- labels ---------------------------------------------------------------------

double orient_score(double raw_score, ScorePolarity polarity) {
  return polarity == ScorePolarity::kHigherIsBetter ? raw_score : -raw_score;
}

LabelScale fit_label_scale(const std::vector<const DistortedEntry*>& entries,
                           ScorePolarity polarity) {
  if (entries.empty()) throw std::invalid_argument("fit_label_scale: no entries");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto* e : entries) {
    lo = std::min(lo, e->score);
    hi = std::max(hi, e->score);
  }
  LabelScale s;
  if (hi <= lo) {
    s.slope = 0.0;
    s.offset = 0.5;
    return s;
  }
  if (polarity == ScorePolarity::kHigherIsBetter) {
    s.slope = 1.0 / (hi - lo);
    s.offset = -lo / (hi - lo);
  } else {
    // 1 = best, so the smallest (best) raw score maps to 1.
    s.slope = -1.0 / (hi - lo);
    s.offset = hi / (hi - lo);
  }
  return s;
}

}  // namespace vqa
