#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xrayforge/core.hpp"

namespace xrayforge {

/// Detector scores with binary ground truth (1 = blended / fake).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const noexcept { return scores.size(); }
  std::size_t positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)); }
  std::size_t negatives() const { return size() - positives(); }
};

inline void validate(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) fail(Errc::MalformedRecord, "scores and labels differ in length");
  for (int l : s.labels)
    if (l != 0 && l != 1) fail(Errc::MalformedRecord, "labels must be 0 or 1");
  for (double v : s.scores)
    if (!std::isfinite(v)) fail(Errc::MalformedRecord, "non-finite score");
}

inline void require_both_classes(const ScoredSet& s) {
  validate(s);
  if (s.positives() == 0 || s.negatives() == 0) fail(Errc::OneClassOnly, "both classes are required");
}

/// Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg), via mid-ranks.
inline double roc_auc(const ScoredSet& s) {
  require_both_classes(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Twice the 1-based mid-rank keeps the tie sums integral.
  std::int64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const auto mid_x2 = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (s.labels[order[k]] == 1) rank_sum_x2 += mid_x2;
    i = j;
  }
  const auto n1 = static_cast<std::int64_t>(s.positives());
  const auto n0 = static_cast<std::int64_t>(s.negatives());
  const std::int64_t u_x2 = rank_sum_x2 - n1 * (n1 + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(n1) * static_cast<double>(n0));
}

/// Mean over positives of the precision at each positive's rank, ranking by
/// descending score with ties broken by original index.
inline double average_precision(const ScoredSet& s) {
  validate(s);
  if (s.positives() == 0) fail(Errc::NoPositives, "average precision needs a positive");
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    if (s.labels[order[rank]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  return sum / static_cast<double>(hits);
}

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Sweeps every distinct score t (positive iff score >= t) and returns the
/// operating point minimizing |FPR - FNR|, reported as (FPR + FNR) / 2.
/// Ties go to the lowest threshold.
inline EerResult equal_error_rate(const ScoredSet& s) {
  require_both_classes(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  const auto n1 = static_cast<std::int64_t>(s.positives());
  const auto n0 = static_cast<std::int64_t>(s.negatives());

  // Walking thresholds upward: everything below the current threshold is predicted negative.
  std::int64_t fn = 0, tn = 0;
  std::optional<std::int64_t> best_gap;
  EerResult best;
  for (std::size_t i = 0; i < n;) {
    const double t = s.scores[order[i]];
    const std::int64_t fp = n0 - tn;
    // |FPR - FNR| scaled by n0 * n1, kept in integers so ties are exact.
    const std::int64_t gap = std::llabs(fp * n1 - fn * n0);
    if (!best_gap || gap < *best_gap) {
      best_gap = gap;
      best.threshold = t;
      best.eer = 0.5 * (static_cast<double>(fp) / n0 + static_cast<double>(fn) / n1);
    }
    for (; i < n && s.scores[order[i]] == t; ++i) (s.labels[order[i]] == 1 ? fn : tn) += 1;
  }
  return best;
}

inline double accuracy_at(const ScoredSet& s, double threshold = 0.5) {
  validate(s);
  if (s.size() == 0) fail(Errc::MalformedRecord, "empty scored set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < s.size(); ++i) correct += (s.scores[i] >= threshold) == (s.labels[i] == 1);
  return static_cast<double>(correct) / static_cast<double>(s.size());
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// ROC operating points at every distinct score, highest threshold first.
inline std::vector<RocPoint> roc_curve(const ScoredSet& s) {
  require_both_classes(s);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  const double n1 = static_cast<double>(s.positives()), n0 = static_cast<double>(s.negatives());
  std::vector<RocPoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = s.scores[order[i]];
    for (; i < order.size() && s.scores[order[i]] == t; ++i) (s.labels[order[i]] == 1 ? tp : fp) += 1;
    pts.push_back({t, fp / n0, tp / n1});
  }
  return pts;
}

/// -(1/N) sum[gt log(p) + (1 - gt) log(1 - p)], p clipped to [eps, 1 - eps].
template <class TagA, class TagB>
double pixel_cross_entropy(const Field<TagA>& pred, const Field<TagB>& gt, double eps = 1e-7) {
  require_same_size(pred, gt, "pixel_cross_entropy: size mismatch");
  if (pred.size() == 0) fail(Errc::DimensionMismatch, "pixel_cross_entropy: empty maps");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], eps, 1.0 - eps);
    acc += gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(pred.size());
}

/// Detector-free score of an X-ray: its mean pixel value.
inline double xray_to_score(const FaceXray& xray) {
  if (xray.size() == 0) return 0.0;
  double acc = 0.0;
  for (double v : xray.data()) acc += v;
  return acc / static_cast<double>(xray.size());
}

// ---------------------------------------------------------------------------
// Score files: JSON-lines {"id", "score", "label", "group"?}
// ---------------------------------------------------------------------------

struct ScoreRecord {
  std::string id;
  double score = 0.0;
  int label = 0;
  std::optional<std::string> group;
};

inline std::vector<ScoreRecord> parse_score_records(std::istream& in) {
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      ScoreRecord r;
      r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      if (!j.at("score").is_number()) fail(Errc::MalformedRecord, where + ": score is not a number");
      r.score = j.at("score").get<double>();
      const auto& lab = j.at("label");
      if (lab.is_boolean()) {
        r.label = lab.get<bool>() ? 1 : 0;
      } else if (lab.is_number_integer()) {
        r.label = lab.get<int>();
      } else if (lab.is_string()) {
        const auto v = lab.get<std::string>();
        if (v == "real") r.label = 0;
        else if (v == "blended" || v == "fake") r.label = 1;
        else fail(Errc::MalformedRecord, where + ": unknown label '" + v + "'");
      } else {
        fail(Errc::MalformedRecord, where + ": label must be 0/1");
      }
      if (r.label != 0 && r.label != 1) fail(Errc::MalformedRecord, where + ": label must be 0/1");
      if (!std::isfinite(r.score)) fail(Errc::MalformedRecord, where + ": non-finite score");
      if (j.contains("group") && !j["group"].is_null())
        r.group = j["group"].is_string() ? j["group"].get<std::string>() : j["group"].dump();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::MalformedRecord, where + ": " + e.what());
    }
  }
  return out;
}

inline ScoredSet to_scored_set(const std::vector<ScoreRecord>& records) {
  ScoredSet s;
  for (const auto& r : records) s.scores.push_back(r.score), s.labels.push_back(r.label);
  return s;
}

/// Averages scores per group (records without a group form their own);
/// a group whose records disagree on the label is malformed.
inline ScoredSet group_scores(const std::vector<ScoreRecord>& records) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    int label = 0;
  };
  std::map<std::string, Acc> groups;
  for (const auto& r : records) {
    const std::string key = r.group ? "g:" + *r.group : "i:" + r.id;
    auto [it, fresh] = groups.try_emplace(key);
    if (!fresh && it->second.label != r.label) fail(Errc::MalformedRecord, "group '" + key.substr(2) + "' mixes labels");
    it->second.label = r.label;
    it->second.sum += r.score;
    ++it->second.n;
  }
  ScoredSet s;
  for (const auto& [key, acc] : groups) {
    s.scores.push_back(acc.sum / static_cast<double>(acc.n));
    s.labels.push_back(acc.label);
  }
  return s;
}

}  // namespace xrayforge
