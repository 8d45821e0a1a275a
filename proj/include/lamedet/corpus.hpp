#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lamedet/common.hpp"
#include "lamedet/rng.hpp"

// Fragment/score data model, manifest IO, and the cow-disjoint train/val
// split: no individual animal may contribute fragments to both sides.

namespace lamedet::corpus {

enum class View { side, top };
enum class Modality { rgb, depth };
enum class BinaryLabel { healthy, lame };

inline const char* to_string(View v) { return v == View::side ? "side" : "top"; }
inline const char* to_string(Modality m) { return m == Modality::rgb ? "rgb" : "depth"; }
inline const char* to_string(BinaryLabel l) { return l == BinaryLabel::healthy ? "healthy" : "lame"; }

inline std::optional<View> try_parse_view(const std::string& s) {
  if (s == "side") return View::side;
  if (s == "top") return View::top;
  return std::nullopt;
}

inline std::optional<Modality> try_parse_modality(const std::string& s) {
  if (s == "rgb") return Modality::rgb;
  if (s == "depth") return Modality::depth;
  return std::nullopt;
}

// Expert gait rating in 1..5; 1 is healthy, 5 the most severe lameness.
class LocomotionScore {
 public:
  explicit LocomotionScore(int value) : value_(value) {
    if (value < 1 || value > 5) {
      throw Error(ErrorCategory::data,
                  "locomotion score out of range 1..5: " + std::to_string(value));
    }
  }

  int value() const { return value_; }

  friend bool operator==(LocomotionScore a, LocomotionScore b) { return a.value_ == b.value_; }

 private:
  int value_;
};

// Score 1 is healthy; scores 2 to 5 collapse into the lame class.
inline BinaryLabel binary_label(LocomotionScore score) {
  return score.value() == 1 ? BinaryLabel::healthy : BinaryLabel::lame;
}

struct FragmentRecord {
  std::string fragment_id;
  std::string cow_id;
  View view = View::side;
  Modality modality = Modality::rgb;
  LocomotionScore score{1};
  std::string clip_path;
};

inline constexpr char kManifestHeader[] = "fragment_id,cow_id,view,modality,score,clip_path";

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline void check_field_clean(const std::string& field, const char* name) {
  if (field.find(',') != std::string::npos || field.find('\n') != std::string::npos) {
    throw Error(ErrorCategory::data, std::string("manifest field '") + name + "' contains a separator");
  }
}

}  // namespace detail

// Line-delimited CSV, header required, one fragment per line. Every record is
// validated; duplicate fragment ids are rejected.
inline std::vector<FragmentRecord> load_manifest(std::istream& in, const std::string& source) {
  std::vector<FragmentRecord> records;
  std::string line;
  if (!std::getline(in, line)) return records;  // empty manifest
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw Error(ErrorCategory::data, source + ":1: bad manifest header (expected '" +
                                         std::string(kManifestHeader) + "')");
  }
  std::set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto loc = source + ":" + std::to_string(line_no) + ": ";
    const auto fields = detail::split_fields(line);
    if (fields.size() != 6) {
      throw Error(ErrorCategory::data,
                  loc + "expected 6 fields, got " + std::to_string(fields.size()));
    }
    FragmentRecord rec;
    rec.fragment_id = fields[0];
    rec.cow_id = fields[1];
    if (rec.fragment_id.empty() || rec.cow_id.empty()) {
      throw Error(ErrorCategory::data, loc + "empty fragment_id or cow_id");
    }
    if (!seen_ids.insert(rec.fragment_id).second) {
      throw Error(ErrorCategory::data, loc + "duplicate fragment_id '" + rec.fragment_id + "'");
    }
    const auto view = try_parse_view(fields[2]);
    if (!view) throw Error(ErrorCategory::data, loc + "unknown view '" + fields[2] + "'");
    rec.view = *view;
    const auto modality = try_parse_modality(fields[3]);
    if (!modality) throw Error(ErrorCategory::data, loc + "unknown modality '" + fields[3] + "'");
    rec.modality = *modality;
    int score_value = 0;
    try {
      std::size_t used = 0;
      score_value = std::stoi(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCategory::data, loc + "bad score '" + fields[4] + "'");
    }
    if (score_value < 1 || score_value > 5) {
      throw Error(ErrorCategory::data, loc + "score out of range 1..5: " + fields[4]);
    }
    rec.score = LocomotionScore(score_value);
    rec.clip_path = fields[5];
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<FragmentRecord> load_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open manifest " + path.string());
  return load_manifest(in, path.filename().string());
}

inline void save_manifest(std::ostream& out, const std::vector<FragmentRecord>& records) {
  out << kManifestHeader << "\n";
  for (const auto& r : records) {
    detail::check_field_clean(r.fragment_id, "fragment_id");
    detail::check_field_clean(r.cow_id, "cow_id");
    detail::check_field_clean(r.clip_path, "clip_path");
    out << r.fragment_id << "," << r.cow_id << "," << to_string(r.view) << ","
        << to_string(r.modality) << "," << r.score.value() << "," << r.clip_path << "\n";
  }
}

inline void save_manifest_file(const std::filesystem::path& path,
                               const std::vector<FragmentRecord>& records) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write manifest " + path.string());
  save_manifest(out, records);
}

struct Distribution {
  std::array<std::size_t, 5> per_score{};  // index 0 = score 1
  std::size_t total = 0;
};

inline Distribution distribution(const std::vector<FragmentRecord>& records) {
  Distribution d;
  for (const auto& r : records) {
    ++d.per_score[static_cast<std::size_t>(r.score.value() - 1)];
    ++d.total;
  }
  return d;
}

struct SplitResult {
  std::vector<FragmentRecord> train;
  std::vector<FragmentRecord> validation;
  std::vector<std::string> validation_cows;  // sorted
};

// Validation takes n_healthy_cows cows whose every visit scored 1 plus
// n_lame_cows cows with at least one visit scored 2..5, drawn uniformly at
// random from the eligible sets with the given seed; all remaining fragments
// stay in train. A selected cow contributes all of its fragments, including
// any healthy-scored visits of a lame cow.
inline SplitResult split_by_cow(const std::vector<FragmentRecord>& records,
                                std::size_t n_healthy_cows, std::size_t n_lame_cows,
                                uint64_t seed) {
  // std::map gives a sorted, deterministic cow ordering
  std::map<std::string, bool> cow_has_lame;
  for (const auto& r : records) {
    auto [it, inserted] = cow_has_lame.emplace(r.cow_id, false);
    if (binary_label(r.score) == BinaryLabel::lame) it->second = true;
  }
  std::vector<std::string> healthy_cows, lame_cows;
  for (const auto& [cow, has_lame] : cow_has_lame) {
    (has_lame ? lame_cows : healthy_cows).push_back(cow);
  }
  if (healthy_cows.size() < n_healthy_cows || lame_cows.size() < n_lame_cows) {
    std::ostringstream msg;
    msg << "split infeasible: need " << n_healthy_cows << " all-healthy cows but found "
        << healthy_cows.size() << ", need " << n_lame_cows
        << " cows with a lame visit but found " << lame_cows.size();
    throw Error(ErrorCategory::data, msg.str());
  }

  Rng rng(seed);
  auto pick = [&rng](std::vector<std::string>& pool, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };
  pick(healthy_cows, n_healthy_cows);
  pick(lame_cows, n_lame_cows);

  std::set<std::string> validation_set(healthy_cows.begin(), healthy_cows.end());
  validation_set.insert(lame_cows.begin(), lame_cows.end());

  SplitResult result;
  for (const auto& r : records) {
    (validation_set.count(r.cow_id) ? result.validation : result.train).push_back(r);
  }
  result.validation_cows.assign(validation_set.begin(), validation_set.end());
  return result;
}

}  // namespace lamedet::corpus
