#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "xrayforge/align.hpp"
#include "xrayforge/compositing.hpp"
#include "xrayforge/core.hpp"
#include "xrayforge/image_io.hpp"
#include "xrayforge/landmarks.hpp"
#include "xrayforge/mask.hpp"
#include "xrayforge/xray.hpp"

namespace xrayforge {

inline constexpr const char* kManifestVersion = "xrayforge/1";
inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr int kDonorRetries = 3;
// Quantization slack used when judging persisted X-rays.
inline constexpr double kTrivialTol = 2.0 / 255.0;

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Parameter (de)serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const GenerationParams& p) {
  return {{"global_seed", p.global_seed},
          {"output_size", p.output_size},
          {"nn_pool_size", p.nn_pool_size},
          {"nn_top_k", p.nn_top_k},
          {"deform_grid", p.deform_grid},
          {"deform_max_offset_frac", p.deform_max_offset_frac},
          {"blur_kernels", p.blur_kernels},
          {"blend_mode", to_string(p.blend_mode)},
          {"color_correct", p.color_correct},
          {"real_fraction", p.real_fraction}};
}

/// Overlays the keys present in `j` onto `p`; unknown keys are ignored.
inline void merge_params(GenerationParams& p, const nlohmann::json& j) {
  try {
    if (j.contains("global_seed")) p.global_seed = j["global_seed"].get<std::uint64_t>();
    if (j.contains("output_size")) p.output_size = j["output_size"].get<int>();
    if (j.contains("nn_pool_size")) p.nn_pool_size = j["nn_pool_size"].get<int>();
    if (j.contains("nn_top_k")) p.nn_top_k = j["nn_top_k"].get<int>();
    if (j.contains("deform_grid")) p.deform_grid = j["deform_grid"].get<int>();
    if (j.contains("deform_max_offset_frac")) p.deform_max_offset_frac = j["deform_max_offset_frac"].get<double>();
    if (j.contains("blur_kernels")) p.blur_kernels = j["blur_kernels"].get<std::vector<int>>();
    if (j.contains("blend_mode")) p.blend_mode = parse_blend_mode(j["blend_mode"].get<std::string>());
    if (j.contains("color_correct")) p.color_correct = j["color_correct"].get<bool>();
    if (j.contains("real_fraction")) p.real_fraction = j["real_fraction"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidParams, e.what());
  }
}

inline GenerationParams params_from_json(const nlohmann::json& j) {
  GenerationParams p;
  merge_params(p, j);
  return p;
}

// ---------------------------------------------------------------------------
// Corpus ingestion
// ---------------------------------------------------------------------------

inline bool is_supported_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Pairs `<root>/<id>.<ext>` with `<root>/<id>.<ext>.landmarks.json`.
/// Images without a landmark file are skipped and reported in warnings().
inline Corpus load_corpus(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) fail(Errc::NoEntries, "corpus directory '" + root.string() + "' does not exist");
  std::vector<fs::path> images;
  for (const auto& de : fs::directory_iterator(root))
    if (de.is_regular_file() && is_supported_image(de.path())) images.push_back(de.path());
  std::sort(images.begin(), images.end());

  std::vector<CorpusEntry> entries;
  std::vector<std::string> warnings;
  for (const auto& img_path : images) {
    const fs::path lm_path = img_path.string() + ".landmarks.json";
    if (!fs::exists(lm_path)) {
      warnings.push_back("skipped " + img_path.filename().string() + ": no landmark file");
      continue;
    }
    LandmarkFile lm = read_landmarks(lm_path);
    const Image img = read_image(img_path);
    if (!landmarks_in_bounds(lm.landmarks, img.width(), img.height()))
      fail(Errc::MalformedLandmarks, lm_path.string() + ": landmark outside image bounds");
    if (!validate_image(img)) fail(Errc::UnreadableFile, img_path.string() + ": image smaller than 16x16");
    CorpusEntry e;
    e.id = img_path.stem().string();
    e.image_path = img_path;
    e.landmarks = std::move(lm.landmarks);
    e.source = std::move(lm.source);
    e.width = img.width();
    e.height = img.height();
    entries.push_back(std::move(e));
  }
  if (entries.empty()) fail(Errc::NoEntries, "no usable (image, landmarks) pairs in '" + root.string() + "'");
  return Corpus(std::move(entries), std::move(warnings));
}

// ---------------------------------------------------------------------------
// Sample synthesis
// ---------------------------------------------------------------------------

/// Output of the compositing stage, at the background's resolution.
struct BlendResult {
  Image blended;
  SoftMask mask;
  Image aligned_fg;
};

/// Aligns the donor onto the background by landmark similarity, builds the
/// mask (hull -> deform -> feather), color-corrects and blends.
inline BlendResult synthesize_blend(const Image& bg, const LandmarkSet& bg_landmarks, const Image& fg,
                                    const LandmarkSet& fg_landmarks, const GenerationParams& params,
                                    RandomStream& rng) {
  const AffineMap2D to_bg = estimate_similarity(fg_landmarks, bg_landmarks);
  BlendResult r;
  r.aligned_fg = warp_image(fg, to_bg, bg.width(), bg.height());

  SoftMask mask = hull_mask(bg_landmarks, bg.width(), bg.height());
  mask = deform_mask(mask, params, rng);
  r.mask = feather_mask(mask, params, rng);

  const Image donor = params.color_correct ? color_transfer_means(r.aligned_fg, bg, r.mask) : r.aligned_fg;
  r.blended = params.blend_mode == BlendMode::alpha ? alpha_blend(donor, bg, r.mask) : poisson_blend(donor, bg, r.mask);
  return r;
}

/// Whether sample `index` takes the real branch. Reals are spread evenly so
/// that any prefix of n samples holds floor(n * real_fraction) of them.
inline bool is_real_index(std::uint64_t index, double real_fraction) {
  const auto before = static_cast<std::uint64_t>(std::floor(static_cast<double>(index) * real_fraction));
  const auto after = static_cast<std::uint64_t>(std::floor(static_cast<double>(index + 1) * real_fraction));
  return after > before;
}

inline std::string sample_id(std::uint64_t index) {
  std::ostringstream os;
  os << "sample_" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

/// Background drawn for sample `index`: a uniform corpus entry from a stream
/// keyed by splitmix64 of the sample seed, independent of the sample's own stream.
inline const CorpusEntry& background_for(const Corpus& corpus, const GenerationParams& params, std::uint64_t index) {
  if (corpus.empty()) fail(Errc::NoEntries, "empty corpus");
  RandomStream pick(splitmix64(derive_seed(params.global_seed, index)));
  return corpus.entries()[pick.index(corpus.size())];
}

struct GeneratedSample {
  Sample sample;
  Image blended;
  FaceXray xray;
  SoftMask mask;
  std::vector<std::string> failures;  // donors that were tried and rejected
};

/// Builds sample `sample_index` for background `bg_id`; a pure function of
/// (corpus, params, bg_id, sample_index). Failed donors are retried up to
/// three more times before the last error propagates.
inline GeneratedSample generate_sample(const std::string& bg_id, const Corpus& corpus, const GenerationParams& params,
                                       std::uint64_t sample_index) {
  validate_params(params);
  const CorpusEntry& bg_entry = corpus.at(bg_id);
  const std::uint64_t seed = derive_seed(params.global_seed, sample_index);
  RandomStream rng(seed);
  const int size = params.output_size;

  GeneratedSample out;
  Sample& s = out.sample;
  s.id = sample_id(sample_index);
  s.blended_path = "images/" + s.id + ".png";
  s.xray_path = "xrays/" + s.id + ".png";
  s.mask_path = "masks/" + s.id + ".png";
  s.bg_source = bg_id;
  s.params = params;
  s.seed = seed;

  const Image bg = read_image(bg_entry.image_path);
  if (is_real_index(sample_index, params.real_fraction)) {
    s.label = Label::real;
    s.fg_source = bg_id;
    out.blended = resize_bilinear(bg, size, size);
    out.mask = SoftMask(size, size);
    out.xray = FaceXray(size, size);
    return out;
  }

  s.label = Label::blended;
  std::set<std::string> rejected;
  for (int attempt = 0;; ++attempt) {
    std::string fg_id;
    try {
      fg_id = find_foreground(bg_id, corpus, params, rng, rejected);
      const CorpusEntry& fg_entry = corpus.at(fg_id);
      const Image fg = read_image(fg_entry.image_path);
      BlendResult blend = synthesize_blend(bg, bg_entry.landmarks, fg, fg_entry.landmarks, params, rng);
      out.mask = resize_bilinear(blend.mask, size, size);
      out.xray = compute_xray(out.mask);
      if (is_trivial(out.xray, kTrivialTol)) fail(Errc::EmptyMask, "blend produced a trivial X-ray");
      out.blended = resize_bilinear(blend.blended, size, size);
      s.fg_source = fg_id;
      return out;
    } catch (const Error& e) {
      // Corpus-level failures are not donor-specific.
      if (e.code() == Errc::EmptyPool || e.code() == Errc::UnknownId) throw;
      out.failures.push_back((fg_id.empty() ? std::string("<none>") : fg_id) + ": " + e.what());
      if (attempt >= kDonorRetries) throw;
      if (!fg_id.empty()) rejected.insert(fg_id);
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct Manifest {
  std::string version = kManifestVersion;
  GenerationParams params;
  std::vector<Sample> samples;

  bool operator==(const Manifest&) const = default;
};

inline nlohmann::json to_json(const Sample& s) {
  return {{"version", kManifestVersion}, {"id", s.id},
          {"label", to_string(s.label)}, {"blended_path", s.blended_path},
          {"xray_path", s.xray_path},    {"mask_path", s.mask_path},
          {"fg_source", s.fg_source},    {"bg_source", s.bg_source},
          {"seed", s.seed},              {"params", to_json(s.params)}};
}

inline std::string manifest_to_jsonl(const Manifest& m) {
  std::string out;
  for (const auto& s : m.samples) out += to_json(s).dump() + "\n";
  return out;
}

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  const auto label = j.at("label").get<std::string>();
  if (label == "real") s.label = Label::real;
  else if (label == "blended") s.label = Label::blended;
  else fail(Errc::Corrupt, "unknown label '" + label + "'");
  s.blended_path = j.at("blended_path").get<std::string>();
  s.xray_path = j.at("xray_path").get<std::string>();
  s.mask_path = j.value("mask_path", std::string{});
  s.fg_source = j.at("fg_source").get<std::string>();
  s.bg_source = j.at("bg_source").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.params = params_from_json(j.at("params"));
  return s;
}

/// Parses and validates a JSON-lines manifest. Referenced files are
/// resolved against `base_dir`; pass an empty path to skip the file checks.
inline Manifest parse_manifest(std::istream& in, const fs::path& base_dir) {
  Manifest m;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    Sample s;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto version = j.at("version").get<std::string>();
      if (version != kManifestVersion) fail(Errc::VersionMismatch, where + ": version '" + version + "'");
      s = sample_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::Corrupt, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::VersionMismatch) throw;
      fail(Errc::Corrupt, where + ": " + e.what());
    }
    if (!ids.insert(s.id).second) fail(Errc::Corrupt, where + ": duplicate id '" + s.id + "'");
    if (s.label == Label::real && s.fg_source != s.bg_source)
      fail(Errc::Corrupt, where + ": real sample with distinct fg/bg sources");
    if (m.samples.empty()) m.params = s.params;
    else if (!(s.params == m.params)) fail(Errc::Corrupt, where + ": parameters differ from earlier records");
    if (!base_dir.empty())
      for (const auto* rel : {&s.blended_path, &s.xray_path, &s.mask_path})
        if (!rel->empty() && !fs::exists(base_dir / *rel)) fail(Errc::MissingFile, where + ": missing " + *rel);
    m.samples.push_back(std::move(s));
  }
  if (m.samples.empty()) fail(Errc::Corrupt, "manifest has no records");
  return m;
}

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

inline const Sample& find_sample(const Manifest& m, const std::string& id) {
  for (const auto& s : m.samples)
    if (s.id == id) return s;
  fail(Errc::UnknownId, "no sample '" + id + "' in manifest");
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

inline void write_sample_files(const fs::path& out_dir, const GeneratedSample& g) {
  write_png(out_dir / g.sample.blended_path, g.blended);
  write_png8(out_dir / g.sample.xray_path, g.xray);
  // 16-bit so that X-rays recomputed from the stored mask stay within one 8-bit step.
  write_png16(out_dir / g.sample.mask_path, g.mask);
}

struct SkippedSample {
  std::uint64_t index = 0;
  std::string bg_source;
  std::string reason;
};

struct DatasetReport {
  Manifest manifest;
  std::vector<SkippedSample> skipped;
  std::size_t real_count = 0;
  std::size_t blended_count = 0;
};

struct DatasetOptions {
  int workers = 1;
  bool dry_run = false;
};

inline void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(Errc::IoError, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(Errc::IoError, "cannot finalize " + path.string());
  }
}

/// Generates samples 0..n-1 over `workers` threads, writes their rasters
/// under `out_dir` and finalizes `out_dir/manifest.jsonl` (plus a metadata
/// sidecar). Output is independent of the worker count.
inline DatasetReport generate_dataset(const Corpus& corpus, std::size_t n, const GenerationParams& params,
                                      const fs::path& out_dir, const DatasetOptions& opt = {}) {
  if (n == 0) fail(Errc::InvalidParams, "generate_dataset: n must be >= 1");
  if (corpus.empty()) fail(Errc::NoEntries, "generate_dataset: empty corpus");
  validate_params(params);
  if (!opt.dry_run) {
    std::error_code ec;
    for (const char* sub : {"images", "xrays", "masks"}) fs::create_directories(out_dir / sub, ec);
    if (ec) fail(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  }

  std::vector<std::optional<Sample>> results(n);
  std::vector<std::optional<SkippedSample>> skips(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (std::size_t i; !abort && (i = next.fetch_add(1)) < n;) {
      const CorpusEntry& bg = background_for(corpus, params, i);
      try {
        GeneratedSample g;
        try {
          g = generate_sample(bg.id, corpus, params, i);
        } catch (const Error& e) {
          if (e.code() == Errc::IoError) throw;
          skips[i] = SkippedSample{i, bg.id, e.what()};
          continue;
        }
        if (!opt.dry_run) write_sample_files(out_dir, g);
        results[i] = std::move(g.sample);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        abort = true;
      }
    }
  };
  const int workers = std::max(1, opt.workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  DatasetReport report;
  report.manifest.params = params;
  for (std::size_t i = 0; i < n; ++i) {
    if (skips[i]) report.skipped.push_back(*skips[i]);
    if (!results[i]) continue;
    (results[i]->label == Label::real ? report.real_count : report.blended_count) += 1;
    report.manifest.samples.push_back(std::move(*results[i]));
  }
  if (opt.dry_run) return report;

  nlohmann::json meta{{"tool", "xrayforge"},
                      {"version", kManifestVersion},
                      {"params", to_json(params)},
                      {"requested", n},
                      {"real", report.real_count},
                      {"blended", report.blended_count},
                      {"skipped", nlohmann::json::array()}};
  for (const auto& sk : report.skipped)
    meta["skipped"].push_back({{"index", sk.index}, {"bg_source", sk.bg_source}, {"reason", sk.reason}});
  const fs::path manifest_path = out_dir / kManifestName;
  write_atomically(manifest_path, manifest_to_jsonl(report.manifest));
  write_atomically(manifest_path.string() + ".meta.json", meta.dump(2) + "\n");
  return report;
}

/// X-ray recomputed from the persisted mask vs the persisted X-ray:
/// largest per-pixel absolute difference.
inline double stored_xray_deviation(const fs::path& base_dir, const Sample& s) {
  const auto stored = read_field<XrayTag>(base_dir / s.xray_path);
  const auto mask = read_field<MaskTag>(base_dir / s.mask_path);
  const FaceXray recomputed = compute_xray(mask);
  require_same_size(stored, recomputed, "stored X-ray and mask differ in size");
  double dev = 0.0;
  for (std::size_t i = 0; i < stored.size(); ++i) dev = std::max(dev, std::abs(stored[i] - recomputed[i]));
  return dev;
}

}  // namespace xrayforge
