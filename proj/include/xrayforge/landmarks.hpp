#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "xrayforge/core.hpp"

namespace xrayforge {

struct CorpusEntry {
  std::string id;
  std::filesystem::path image_path;
  LandmarkSet landmarks;
  // Provenance key (e.g. a video id); donors sharing it with the background are excluded.
  std::optional<std::string> source;
  int width = 0;
  int height = 0;
};

/// Immutable set of real faces, ordered by id.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<CorpusEntry> entries, std::vector<std::string> warnings = {})
      : entries_(std::move(entries)), warnings_(std::move(warnings)) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i].id, i).second) fail(Errc::Corrupt, "duplicate corpus id '" + entries_[i].id + "'");
      if (entries_[i].landmarks.size() != entries_.front().landmarks.size())
        fail(Errc::CountMismatch, "corpus entries disagree on landmark count");
    }
  }

  const std::vector<CorpusEntry>& entries() const noexcept { return entries_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const CorpusEntry* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const CorpusEntry& at(const std::string& id) const {
    if (const auto* e = find(id)) return *e;
    fail(Errc::UnknownId, "no corpus entry '" + id + "'");
  }

 private:
  std::vector<CorpusEntry> entries_;
  std::vector<std::string> warnings_;
  std::map<std::string, std::size_t> index_;
};

/// sqrt of the summed squared coordinate differences over all points.
inline double landmark_distance(const LandmarkSet& a, const LandmarkSet& b) {
  if (a.size() != b.size()) fail(Errc::CountMismatch, "landmark sets differ in point count");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = a.points[i].x - b.points[i].x;
    const double dy = a.points[i].y - b.points[i].y;
    acc += dx * dx + dy * dy;
  }
  return std::sqrt(acc);
}

/// Candidate pool drawn for one donor search, ranked nearest first.
struct DonorRanking {
  std::vector<std::string> ranked_ids;
  std::vector<double> distances;
  std::size_t top_k = 0;
};

/// Draws the random candidate pool and ranks it; find_foreground() picks
/// from the first `top_k` entries. Exposed so the choice can be audited.
inline DonorRanking rank_donor_pool(const std::string& bg_id, const Corpus& corpus, const GenerationParams& params,
                                    RandomStream& rng, const std::set<std::string>& exclude = {}) {
  const CorpusEntry& bg = corpus.at(bg_id);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CorpusEntry& e = corpus.entries()[i];
    if (e.id == bg_id || exclude.count(e.id)) continue;
    if (bg.source && e.source && *bg.source == *e.source) continue;
    candidates.push_back(i);
  }
  if (candidates.empty()) fail(Errc::EmptyPool, "no donor candidates for '" + bg_id + "'");

  // Partial Fisher-Yates: the first pool_size slots become the random subset.
  const std::size_t pool_size = std::min<std::size_t>(static_cast<std::size_t>(params.nn_pool_size), candidates.size());
  for (std::size_t i = 0; i < pool_size; ++i) std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
  candidates.resize(pool_size);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(pool_size);
  for (std::size_t i : candidates) scored.emplace_back(landmark_distance(bg.landmarks, corpus.entries()[i].landmarks), i);
  // Entries are id-sorted, so index order is the lexicographic tie-break.
  std::sort(scored.begin(), scored.end());

  DonorRanking out;
  out.top_k = std::min<std::size_t>(static_cast<std::size_t>(params.nn_top_k), pool_size);
  for (const auto& [d, i] : scored) {
    out.ranked_ids.push_back(corpus.entries()[i].id);
    out.distances.push_back(d);
  }
  return out;
}

/// Picks a donor face for `bg_id`: uniform choice among the nn_top_k nearest
/// (by landmark distance) of a random pool of nn_pool_size candidates.
inline std::string find_foreground(const std::string& bg_id, const Corpus& corpus, const GenerationParams& params,
                                   RandomStream& rng, const std::set<std::string>& exclude = {}) {
  if (corpus.size() < 2) fail(Errc::EmptyPool, "corpus needs at least two entries");
  DonorRanking ranking = rank_donor_pool(bg_id, corpus, params, rng, exclude);
  return ranking.ranked_ids[rng.index(ranking.top_k)];
}

// ---------------------------------------------------------------------------
// Landmark files: {"points": [[x, y], ...], "source": "..."?}
// ---------------------------------------------------------------------------

struct LandmarkFile {
  LandmarkSet landmarks;
  std::optional<std::string> source;
};

inline LandmarkFile parse_landmarks(const std::string& text, const std::string& origin = "<memory>") {
  LandmarkFile out;
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto& pts = doc.at("points");
    if (!pts.is_array()) fail(Errc::MalformedLandmarks, origin + ": 'points' is not an array");
    for (const auto& p : pts) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        fail(Errc::MalformedLandmarks, origin + ": each point must be [x, y]");
      out.landmarks.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (doc.contains("source") && doc["source"].is_string()) out.source = doc["source"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedLandmarks, origin + ": " + e.what());
  }
  if (out.landmarks.size() < 3) fail(Errc::MalformedLandmarks, origin + ": fewer than 3 landmarks");
  for (const auto& p : out.landmarks.points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail(Errc::MalformedLandmarks, origin + ": non-finite coordinate");
  return out;
}

inline LandmarkFile read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::UnreadableFile, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_landmarks(text, path.string());
}

inline std::string landmarks_to_json(const LandmarkSet& set, const std::optional<std::string>& source = std::nullopt) {
  nlohmann::json doc;
  doc["points"] = nlohmann::json::array();
  for (const auto& p : set.points) doc["points"].push_back({p.x, p.y});
  if (source) doc["source"] = *source;
  return doc.dump();
}

inline bool landmarks_in_bounds(const LandmarkSet& set, int width, int height) {
  return std::all_of(set.points.begin(), set.points.end(), [&](const Point2& p) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1;
  });
}

}  // namespace xrayforge
