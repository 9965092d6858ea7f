#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xrayforge/forensics.hpp"
#include "xrayforge/metrics.hpp"
#include "xrayforge/pipeline.hpp"

namespace xrayforge::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

inline constexpr const char* kToolVersion = "xrayforge 1.0.0";

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::UnreadableFile, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Parameters of `generate`, resolved from defaults < config file <
/// environment < command-line flags.
struct RunConfig {
  GenerationParams params;
  fs::path corpus;
  fs::path out_dir = "xrayforge_out";
  std::size_t count = 100;
  int workers = 1;
  bool dry_run = false;
};

inline void apply_config_file(RunConfig& rc, const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidParams, path.string() + ": " + e.what());
  }
  merge_params(rc.params, j);
  try {
    if (j.contains("corpus")) rc.corpus = j["corpus"].get<std::string>();
    if (j.contains("out")) rc.out_dir = j["out"].get<std::string>();
    if (j.contains("n")) rc.count = j["n"].get<std::size_t>();
    if (j.contains("workers")) rc.workers = j["workers"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidParams, path.string() + ": " + e.what());
  }
}

inline void apply_environment(RunConfig& rc) {
  if (const char* dir = std::getenv("XRAYFORGE_OUTPUT_DIR"); dir && *dir) rc.out_dir = dir;
  if (const char* seed = std::getenv("XRAYFORGE_SEED"); seed && *seed) {
    try {
      rc.params.global_seed = std::stoull(seed);
    } catch (const std::exception&) {
      fail(Errc::InvalidParams, "XRAYFORGE_SEED is not an unsigned integer");
    }
  }
}

inline void write_sidecar(const fs::path& output, nlohmann::json meta) {
  meta["tool"] = kToolVersion;
  write_atomically(output.string() + ".meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code and throws xrayforge::Error on data errors.
// ---------------------------------------------------------------------------

inline int cmd_generate(const RunConfig& rc, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const Corpus corpus = load_corpus(rc.corpus);
  for (const auto& w : corpus.warnings()) out << "warning: " << w << "\n";
  DatasetOptions opt;
  opt.workers = rc.workers;
  opt.dry_run = rc.dry_run;
  const DatasetReport report = generate_dataset(corpus, rc.count, rc.params, rc.out_dir, opt);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& sk : report.skipped) out << "skipped: index=" << sk.index << " bg=" << sk.bg_source << " reason=" << sk.reason << "\n";
  out << (rc.dry_run ? "dry run: " : "generated ") << report.manifest.samples.size() << " samples (" << report.real_count
      << " real, " << report.blended_count << " blended, " << report.skipped.size() << " skipped) from "
      << corpus.size() << " corpus entries in " << std::fixed << std::setprecision(2) << elapsed << " s\n";
  out << "manifest hash: " << hex64(fnv1a64(manifest_to_jsonl(report.manifest))) << "\n";
  if (!rc.dry_run) out << "manifest: " << (rc.out_dir / kManifestName).string() << "\n";
  return kExitOk;
}

struct ForensicsOptions {
  fs::path image;
  ForensicKind kind = ForensicKind::noise;
  double amplification = 1.0;
  int quality = kDefaultElaQuality;
  double scale = kDefaultElaScale;
  std::optional<fs::path> output;
};

inline fs::path forensic_output_path(const ForensicsOptions& o) {
  if (o.output) return *o.output;
  return o.image.parent_path() / (o.image.stem().string() + "." + to_string(o.kind) + ".png");
}

inline int cmd_forensics(const ForensicsOptions& o, std::ostream& out) {
  const Image img = read_image(o.image);
  const ForensicMap map =
      o.kind == ForensicKind::noise ? noise_residual(img, o.amplification) : error_level_analysis(img, o.quality, o.scale);
  const fs::path dest = forensic_output_path(o);
  write_png8(dest, map.values);
  nlohmann::json meta{{"input", o.image.string()}, {"kind", to_string(o.kind)}};
  if (o.kind == ForensicKind::noise) meta["amplification"] = o.amplification;
  else meta["quality"] = o.quality, meta["scale"] = o.scale;
  write_sidecar(dest, meta);

  double mean = 0.0;
  for (double v : map.values.data()) mean += v;
  mean /= static_cast<double>(map.values.size());
  out << to_string(o.kind) << " map: " << dest.string() << " (mean " << std::setprecision(6) << mean << ", max "
      << map.values.max_value() << ")\n";
  return kExitOk;
}

struct EvalOptions {
  fs::path scores;
  std::optional<fs::path> csv;
  std::optional<fs::path> roc_csv;
  double threshold = 0.5;
};

struct MetricsRow {
  std::string level;
  std::size_t n = 0;
  double auc = 0.0, ap = 0.0, eer = 0.0, eer_threshold = 0.0, accuracy = 0.0;
};

inline MetricsRow evaluate(const std::string& level, const ScoredSet& s, double threshold) {
  MetricsRow r;
  r.level = level;
  r.n = s.size();
  r.auc = roc_auc(s);
  r.ap = average_precision(s);
  const EerResult e = equal_error_rate(s);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  r.accuracy = accuracy_at(s, threshold);
  return r;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  std::ifstream in(o.scores);
  if (!in) fail(Errc::UnreadableFile, "cannot open " + o.scores.string());
  const auto records = parse_score_records(in);
  if (records.empty()) fail(Errc::MalformedRecord, "no score records in " + o.scores.string());

  std::vector<MetricsRow> rows{evaluate("frame", to_scored_set(records), o.threshold)};
  const bool grouped = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.group.has_value(); });
  if (grouped) rows.push_back(evaluate("group", group_scores(records), o.threshold));

  std::ostringstream csv;
  csv << "level,n,auc,ap,eer,eer_threshold,accuracy\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.level << ": n=" << r.n << std::fixed << std::setprecision(4) << " AUC=" << r.auc << " AP=" << r.ap
        << " EER=" << r.eer << " (threshold " << r.eer_threshold << ") ACC@" << o.threshold << "=" << r.accuracy << "\n";
    out.unsetf(std::ios::floatfield);
    csv << r.level << "," << r.n << "," << r.auc << "," << r.ap << "," << r.eer << "," << r.eer_threshold << ","
        << r.accuracy << "\n";
  }
  if (o.csv) {
    write_atomically(*o.csv, csv.str());
    write_sidecar(*o.csv, {{"input", o.scores.string()}, {"threshold", o.threshold}});
  }
  if (o.roc_csv) {
    std::ostringstream roc;
    roc << "threshold,fpr,tpr\n" << std::setprecision(10);
    for (const auto& p : roc_curve(to_scored_set(records))) roc << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
    write_atomically(*o.roc_csv, roc.str());
    write_sidecar(*o.roc_csv, {{"input", o.scores.string()}});
  }
  return kExitOk;
}

inline int cmd_inspect(const fs::path& manifest_path, const std::string& id, std::ostream& out) {
  const Manifest m = read_manifest(manifest_path);
  const Sample& s = find_sample(m, id);
  const fs::path base = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  const auto xray = read_field<XrayTag>(base / s.xray_path);

  out << "id: " << s.id << "\n"
      << "label: " << to_string(s.label) << "\n"
      << "background: " << s.bg_source << "\n"
      << "foreground: " << s.fg_source << "\n"
      << "seed: " << s.seed << "\n"
      << "blended: " << s.blended_path << "\n"
      << "xray: " << s.xray_path << "\n"
      << "params: " << to_json(s.params).dump() << "\n"
      << "trivial X-ray: " << (is_trivial(xray, kTrivialTol) ? "true" : "false") << "\n"
      << "xray max: " << std::setprecision(6) << xray.max_value() << "\n";
  if (!s.mask_path.empty()) {
    const double dev = stored_xray_deviation(base, s);
    out << "recomputed-vs-stored max deviation: " << dev << " (" << dev * 255.0 << "/255)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

inline void print_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << "error: code=" << code << " message=" << nlohmann::json(std::string(message)).dump() << "\n";
}

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blended-face training data, face X-rays, forensic maps and detector metrics", "xrayforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunConfig rc;
  std::optional<fs::path> config_path;
  std::optional<fs::path> corpus, out_dir;
  std::optional<std::size_t> count;
  std::optional<int> workers, output_size, pool_size, top_k, grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> offset_frac, real_fraction;
  std::optional<std::string> blend_mode;
  std::optional<std::vector<int>> blur_kernels;
  bool no_color = false, dry_run = false;

  auto* gen = app.add_subcommand("generate", "Synthesize a blended-face dataset from a real-face corpus");
  gen->add_option("--config", config_path, "JSON config file (flags override it)");
  gen->add_option("--corpus", corpus, "Corpus directory of <id>.<png|jpg> + landmark files");
  gen->add_option("--out", out_dir, "Output directory (env XRAYFORGE_OUTPUT_DIR)");
  gen->add_option("-n,--count", count, "Number of samples");
  gen->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Global seed (env XRAYFORGE_SEED)");
  gen->add_option("--output-size", output_size, "Output side length in pixels");
  gen->add_option("--pool-size", pool_size, "Random donor pool size");
  gen->add_option("--top-k", top_k, "Donor choice among this many nearest");
  gen->add_option("--grid", grid, "Deformation control grid per axis");
  gen->add_option("--offset-frac", offset_frac, "Max control offset as a fraction of the bbox diagonal");
  gen->add_option("--blur-kernels", blur_kernels, "Odd feathering kernel sizes")->delimiter(',');
  gen->add_option("--blend-mode", blend_mode, "alpha | poisson")->check(CLI::IsMember({"alpha", "poisson"}));
  gen->add_flag("--no-color-correct", no_color, "Skip mean color transfer");
  gen->add_option("--real-fraction", real_fraction, "Fraction of real pass-through samples");
  gen->add_flag("--dry-run", dry_run, "Generate in memory only; write nothing");

  ForensicsOptions fo;
  std::string kind = "noise";
  std::optional<fs::path> forensic_out;
  auto* forensics = app.add_subcommand("forensics", "Noise-residual or error-level map of an image");
  forensics->add_option("image", fo.image, "Input image")->required();
  forensics->add_option("--kind", kind, "noise | ela")->check(CLI::IsMember({"noise", "ela"}));
  forensics->add_option("--amplification", fo.amplification, "Noise residual gain")->check(CLI::PositiveNumber);
  forensics->add_option("--quality", fo.quality, "ELA JPEG quality")->check(CLI::Range(1, 100));
  forensics->add_option("--scale", fo.scale, "ELA gain")->check(CLI::PositiveNumber);
  forensics->add_option("--out", forensic_out, "Output PNG (default: beside input)");

  EvalOptions eo;
  std::optional<fs::path> csv, roc_csv;
  auto* eval = app.add_subcommand("eval", "AUC / AP / EER of a JSON-lines score file");
  eval->add_option("scores", eo.scores, "Score records {id, score, label, group?}")->required();
  eval->add_option("--csv", csv, "Write the metrics table as CSV");
  eval->add_option("--roc-csv", roc_csv, "Write ROC operating points as CSV");
  eval->add_option("--threshold", eo.threshold, "Decision threshold for accuracy");

  fs::path manifest;
  std::string sample;
  auto* inspect = app.add_subcommand("inspect", "Provenance and X-ray checks for one sample");
  inspect->add_option("manifest", manifest, "manifest.jsonl")->required();
  inspect->add_option("id", sample, "Sample id")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      if (config_path) apply_config_file(rc, *config_path);
      apply_environment(rc);
      if (corpus) rc.corpus = *corpus;
      if (out_dir) rc.out_dir = *out_dir;
      if (count) rc.count = *count;
      if (workers) rc.workers = *workers;
      if (seed) rc.params.global_seed = *seed;
      if (output_size) rc.params.output_size = *output_size;
      if (pool_size) rc.params.nn_pool_size = *pool_size;
      if (top_k) rc.params.nn_top_k = *top_k;
      if (grid) rc.params.deform_grid = *grid;
      if (offset_frac) rc.params.deform_max_offset_frac = *offset_frac;
      if (blur_kernels) rc.params.blur_kernels = *blur_kernels;
      if (blend_mode) rc.params.blend_mode = parse_blend_mode(*blend_mode);
      if (no_color) rc.params.color_correct = false;
      if (real_fraction) rc.params.real_fraction = *real_fraction;
      rc.dry_run = dry_run;
      if (rc.corpus.empty()) {
        print_error(err, "Usage", "generate needs --corpus or a config file with \"corpus\"");
        return kExitUsage;
      }
      return cmd_generate(rc, out);
    }
    if (*forensics) {
      fo.kind = kind == "ela" ? ForensicKind::ela : ForensicKind::noise;
      fo.output = forensic_out;
      return cmd_forensics(fo, out);
    }
    if (*eval) {
      eo.csv = csv;
      eo.roc_csv = roc_csv;
      return cmd_eval(eo, out);
    }
    if (*inspect) return cmd_inspect(manifest, sample, out);
  } catch (const Error& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    print_error(err, to_string(e.code()), colon == std::string::npos ? what : what.substr(colon + 2));
    return kExitData;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace xrayforge::cli
