// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "support/test_util.hpp"
#include "support/textures.hpp"
#include "xrayforge/xrayforge.hpp"

namespace xf = xrayforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void xray_algebra() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> side(16, 256);
  double max_err = 0.0;
  bool symmetric = true, zero_on_binary = true;
  const auto t0 = Clock::now();
  for (int t = 0; t < 1000; ++t) {
    const int w = side(rng), h = side(rng);
    const auto m = xf::testing::random_mask(w, h, rng);
    xf::SoftMask flipped(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) flipped.data()[i] = 1.0 - m.data()[i];
    const auto b = xf::compute_xray(m), bf = xf::compute_xray(flipped);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      max_err = std::max(max_err, std::abs(b.data()[i] - 4.0 * v * (1.0 - v)));
    }
    if (!(b == bf)) symmetric = false;
    if (xf::compute_xray(xf::testing::random_binary_mask(w, h, rng)).max_value() != 0.0) zero_on_binary = false;
  }
  const double secs = seconds_since(t0);
  report("xray_algebra", max_err <= 1e-9 && symmetric && zero_on_binary && secs < 10.0,
         fmt("1000 masks, max |B-4M(1-M)|=%.3g, symmetry exact=%s, binary zero=%s, %.2f s", max_err,
             symmetric ? "yes" : "no", zero_on_binary ? "yes" : "no", secs));
}

void blend_identities() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> side(8, 96);
  bool exact = true;
  double max_dual = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int w = side(rng), h = side(rng);
    const auto fg = xf::testing::random_image(w, h, rng), bg = xf::testing::random_image(w, h, rng);
    const auto bin = xf::testing::random_binary_mask(w, h, rng);
    const auto out = xf::alpha_blend(fg, bg, bin);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          if (out.at(x, y, c) != (bin.at(x, y) == 1.0 ? fg.at(x, y, c) : bg.at(x, y, c))) exact = false;
    const auto m = xf::testing::random_mask(w, h, rng);
    xf::SoftMask comp(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) comp.data()[i] = 1.0 - m.data()[i];
    const auto a = xf::alpha_blend(fg, bg, m), b = xf::alpha_blend(bg, fg, comp);
    for (std::size_t i = 0; i < a.data().size(); ++i) max_dual = std::max(max_dual, std::abs(a.data()[i] - b.data()[i]));
  }
  report("blend_identities", exact && max_dual <= 1e-12,
         fmt("binary masks exact=%s, complement duality max diff=%.3g over 100 triples", exact ? "yes" : "no", max_dual));
}

void metrics_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(2, 8), grid(0, 6), coin(0, 1);
  double auc_err = 0, ap_err = 0, eer_err = 0, thr_err = 0;
  for (int t = 0; t < 500; ++t) {
    xf::ScoredSet s;
    const int n = size(rng);
    do {
      s.scores.clear();
      s.labels.clear();
      for (int i = 0; i < n; ++i) {
        // Coarse grid scores so ties are common.
        s.scores.push_back(t % 2 ? grid(rng) / 6.0 : std::uniform_real_distribution<double>(0, 1)(rng));
        s.labels.push_back(coin(rng));
      }
    } while (s.positives() == 0 || s.negatives() == 0);
    auc_err = std::max(auc_err, std::abs(xf::roc_auc(s) - xf::oracle::auc_pairs(s.scores, s.labels)));
    ap_err = std::max(ap_err, std::abs(xf::average_precision(s) - xf::oracle::ap_ranks(s.scores, s.labels)));
    const auto e = xf::equal_error_rate(s);
    const auto o = xf::oracle::eer_sweep(s.scores, s.labels);
    eer_err = std::max(eer_err, std::abs(e.eer - o.eer));
    thr_err = std::max(thr_err, std::abs(e.threshold - o.threshold));
  }
  const bool oracle_ok = auc_err <= 1e-9 && ap_err <= 1e-9 && eer_err <= 1e-9 && thr_err <= 1e-9;

  int invariant = 0;
  for (int t = 0; t < 100; ++t) {
    xf::ScoredSet s, g;
    const int n = 20 + static_cast<int>(rng() % 180);
    for (int i = 0; i < n; ++i) {
      s.scores.push_back(static_cast<double>(rng() % 64) / 64.0);
      s.labels.push_back(i % 2);
    }
    g.labels = s.labels;
    const double k = 0.5 + (rng() % 100) / 10.0;
    for (double v : s.scores) g.scores.push_back(std::exp(k * v) + v * v * v - 7.0);
    invariant += xf::roc_auc(s) == xf::roc_auc(g);
  }
  report("metrics_oracle", oracle_ok && invariant == 100,
         fmt("500 sets: max err AUC=%.3g AP=%.3g EER=%.3g thr=%.3g; monotone invariance %d/100", auc_err, ap_err,
             eer_err, thr_err, invariant));
}

void poisson_solver() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> corner(2, 42);
  double worst_residual = 0.0, worst_time = 0.0, worst_violation = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto bg = xf::testing::texture(64, 64, rng), fg = xf::testing::texture(64, 64, rng);
    const int x0 = corner(rng), y0 = corner(rng);
    const auto m = xf::testing::box_mask(64, 64, x0, y0, x0 + 19, y0 + 19);
    auto t0 = Clock::now();
    const auto res = xf::solve_poisson(fg, bg, m);
    worst_time = std::max(worst_time, seconds_since(t0));
    auto inside = [&](int x, int y) { return m.at(x, y) > 0.5; };
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        if (!inside(x, y)) continue;
        for (int c = 0; c < 3; ++c) {
          // 4 f_p - sum_q f_q = sum_q (g_p - g_q), with f_q = bg_q outside the region.
          double lhs = 4.0 * res.raw.at(x, y, c), rhs = 0.0;
          for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            lhs -= inside(x + dx, y + dy) ? res.raw.at(x + dx, y + dy, c) : bg.at(x + dx, y + dy, c);
            rhs += fg.at(x, y, c) - fg.at(x + dx, y + dy, c);
          }
          worst_residual = std::max(worst_residual, std::abs(lhs - rhs));
        }
      }

    // Zero guidance: constant foreground, so values stay within the boundary range.
    t0 = Clock::now();
    const auto flat = xf::solve_poisson(xf::Image(64, 64, 0.5), bg, m);
    worst_time = std::max(worst_time, seconds_since(t0));
    for (int c = 0; c < 3; ++c) {
      double lo = 1e9, hi = -1e9;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
          if (!inside(x, y) && ((x < 63 && inside(x + 1, y)) || (x > 0 && inside(x - 1, y)) ||
                                (y < 63 && inside(x, y + 1)) || (y > 0 && inside(x, y - 1))))
            lo = std::min(lo, bg.at(x, y, c)), hi = std::max(hi, bg.at(x, y, c));
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
          if (inside(x, y)) {
            const double v = flat.raw.at(x, y, c);
            worst_violation = std::max({worst_violation, lo - v, v - hi});
          }
    }
  }
  report("poisson_solver", worst_residual <= 1e-6 && worst_violation <= 1e-6 && worst_time < 2.0,
         fmt("50 cases: max residual=%.3g, max-principle violation=%.3g, slowest solve=%.3f s", worst_residual,
             worst_violation, worst_time));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = xf::testing::slurp(e.path());
  return files;
}

void pipeline_determinism(const xf::Corpus& corpus) {
  xf::testing::TempDir a("xf_acc_a"), b("xf_acc_b"), c("xf_acc_c");
  xf::GenerationParams p;
  p.global_seed = 2024;
  const auto t0 = Clock::now();
  xf::generate_dataset(corpus, 50, p, a.path(), {1, false});
  xf::generate_dataset(corpus, 50, p, b.path(), {1, false});
  xf::generate_dataset(corpus, 50, p, c.path(), {4, false});
  const auto sa = snapshot(a.path()), sb = snapshot(b.path()), sc = snapshot(c.path());
  report("pipeline_determinism", sa.size() > 100 && sa == sb && sa == sc,
         fmt("n=50: %zu files; rerun identical=%s, workers 1 vs 4 identical=%s, %.1f s", sa.size(),
             sa == sb ? "yes" : "no", sa == sc ? "yes" : "no", seconds_since(t0)));
}

void generated_validity_and_separation(const xf::Corpus& corpus) {
  xf::testing::TempDir out("xf_acc_valid");
  xf::GenerationParams p;
  p.global_seed = 77;
  const auto t0 = Clock::now();
  const auto rep = xf::generate_dataset(corpus, 200, p, out.path(), {2, false});
  const auto manifest = xf::read_manifest(out / std::string(xf::kManifestName));
  int wrong = 0;
  double worst_dev = 0.0;
  xf::ScoredSet scored;
  for (const auto& s : manifest.samples) {
    const auto xray = xf::read_field<xf::XrayTag>(out / s.xray_path);
    const bool trivial = xf::is_trivial(xray, 2.0 / 255.0);
    wrong += trivial != (s.label == xf::Label::real);
    worst_dev = std::max(worst_dev, xf::stored_xray_deviation(out.path(), s));
    scored.scores.push_back(xf::xray_to_score(xray));
    scored.labels.push_back(s.label == xf::Label::blended ? 1 : 0);
  }
  const bool complete = manifest.samples.size() == 200 && rep.skipped.empty();
  report("generated_validity", complete && wrong == 0 && worst_dev <= 1.0 / 255.0,
         fmt("%zu samples (%zu real, %zu blended, %zu skipped): triviality mismatches=%d, max deviation=%.4f/255, %.1f s",
             manifest.samples.size(), rep.real_count, rep.blended_count, rep.skipped.size(), wrong, worst_dev * 255.0,
             seconds_since(t0)));
  const double auc = scored.positives() && scored.negatives() ? xf::roc_auc(scored) : 0.0;
  report("separation_sanity", complete && auc == 1.0, fmt("xray_to_score AUC over %zu samples = %.6f", scored.size(), auc));
}

void ela_discriminability() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> pos(16, 80);
  int wins = 0;
  for (int t = 0; t < 20; ++t) {
    const auto host = xf::jpeg_roundtrip(xf::testing::texture(160, 160, rng), 95);
    const auto donor = xf::jpeg_roundtrip(xf::testing::texture(160, 160, rng), 60);
    const int x0 = pos(rng), y0 = pos(rng), side = 64;
    xf::Image composite = host;
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x)
        for (int c = 0; c < 3; ++c) composite.at(x, y, c) = donor.at(x, y, c);
    const auto ela = xf::error_level_analysis(composite, 95);
    double in = 0, out = 0;
    long nin = 0, nout = 0;
    for (int y = 0; y < 160; ++y)
      for (int x = 0; x < 160; ++x) {
        const bool inside = x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
        (inside ? in : out) += ela.values.at(x, y);
        ++(inside ? nin : nout);
      }
    wins += in / nin > out / nout;
  }
  report("ela_discriminability", wins >= 18, fmt("patch mean above host mean in %d/20 composites", wins));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  xray_algebra();
  blend_identities();
  metrics_oracle();
  poisson_solver();

  xf::testing::TempDir corpus_dir("xf_acc_corpus");
  xf::synthetic::write_corpus(corpus_dir.path(), 40, 256, 9, 10);
  const auto corpus = xf::load_corpus(corpus_dir.path());
  pipeline_determinism(corpus);
  generated_validity_and_separation(corpus);
  ela_discriminability();

  std::printf("%s: %d failing criteria, %.1f s total\n", failures ? "FAIL" : "PASS", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
