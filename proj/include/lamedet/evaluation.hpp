#pragma once

#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lamedet/common.hpp"
#include "lamedet/corpus.hpp"

// Confusion counts and the accuracy/precision/recall report across the
// (view x input) experiment grid. Lame is the positive class throughout.

namespace lamedet::eval {

enum class InputType { rgb, mask, depth, segm_over_depth };

inline constexpr InputType kAllInputs[] = {InputType::rgb, InputType::mask, InputType::depth,
                                           InputType::segm_over_depth};

inline const char* to_string(InputType t) {
  switch (t) {
    case InputType::rgb: return "RGB";
    case InputType::mask: return "Mask";
    case InputType::depth: return "Depth";
    case InputType::segm_over_depth: return "SegmOverDepth";
  }
  return "?";
}

inline const char* to_token(InputType t) {
  switch (t) {
    case InputType::rgb: return "rgb";
    case InputType::mask: return "mask";
    case InputType::depth: return "depth";
    case InputType::segm_over_depth: return "segmoverdepth";
  }
  return "?";
}

inline std::optional<InputType> try_parse_input(const std::string& s) {
  for (InputType t : kAllInputs) {
    if (s == to_token(t) || s == to_string(t)) return t;
  }
  return std::nullopt;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

inline Confusion confusion(const std::vector<corpus::BinaryLabel>& predictions,
                           const std::vector<corpus::BinaryLabel>& labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCategory::data, "confusion: prediction/label length mismatch");
  }
  if (predictions.empty()) {
    throw Error(ErrorCategory::data, "confusion: empty input");
  }
  Confusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_lame = predictions[i] == corpus::BinaryLabel::lame;
    const bool is_lame = labels[i] == corpus::BinaryLabel::lame;
    if (pred_lame && is_lame) ++c.tp;
    else if (pred_lame && !is_lame) ++c.fp;
    else if (!pred_lame && is_lame) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct Metrics {
  double accuracy_pct = 0.0;  // [0, 100]
  double precision = 0.0;     // [0, 1]
  double recall = 0.0;        // [0, 1]
};

// Precision and recall are defined as 0 on an empty denominator so that
// degenerate predictors stay reportable.
inline Metrics metrics(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorCategory::data, "metrics: empty confusion");
  Metrics m;
  m.accuracy_pct = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  return m;
}

class EvalReport {
 public:
  void set(corpus::View view, InputType input, const Metrics& m) { cells_[key(view, input)] = m; }

  std::optional<Metrics> get(corpus::View view, InputType input) const {
    const auto it = cells_.find(key(view, input));
    if (it == cells_.end()) return std::nullopt;
    return it->second;
  }

  // Aligned text table: rows are metric x view, columns the four input types.
  std::string render_text() const {
    std::ostringstream out;
    out << std::left << std::setw(14) << "" << std::setw(6) << "";
    for (InputType t : kAllInputs) out << std::right << std::setw(15) << to_string(t);
    out << "\n";
    const char* metric_names[3] = {"Accuracy (%)", "Precision", "Recall"};
    for (int metric = 0; metric < 3; ++metric) {
      for (corpus::View view : {corpus::View::top, corpus::View::side}) {
        out << std::left << std::setw(14) << (view == corpus::View::top ? metric_names[metric] : "")
            << std::setw(6) << corpus::to_string(view);
        for (InputType t : kAllInputs) {
          const auto cell = get(view, t);
          if (!cell) {
            out << std::right << std::setw(15) << "";
            continue;
          }
          const double value = metric == 0   ? cell->accuracy_pct
                               : metric == 1 ? cell->precision
                                             : cell->recall;
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.2f", value);
          out << std::right << std::setw(15) << buf;
        }
        out << "\n";
      }
    }
    return out.str();
  }

  // Machine-readable lines, one cell per line, full precision.
  std::string to_records() const {
    std::ostringstream out;
    out << "view,input,accuracy,precision,recall\n";
    for (corpus::View view : {corpus::View::top, corpus::View::side}) {
      for (InputType t : kAllInputs) {
        const auto cell = get(view, t);
        if (!cell) continue;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g", corpus::to_string(view),
                      to_token(t), cell->accuracy_pct, cell->precision, cell->recall);
        out << buf << "\n";
      }
    }
    return out.str();
  }

  static EvalReport from_records(std::istream& in) {
    EvalReport report;
    std::string line;
    if (!std::getline(in, line)) return report;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string view_s, input_s, acc_s, prec_s, rec_s;
      std::getline(row, view_s, ',');
      std::getline(row, input_s, ',');
      std::getline(row, acc_s, ',');
      std::getline(row, prec_s, ',');
      std::getline(row, rec_s, ',');
      const auto view = corpus::try_parse_view(view_s);
      const auto input = try_parse_input(input_s);
      if (!view || !input) {
        throw Error(ErrorCategory::data, "bad report record: " + line);
      }
      report.set(*view, *input, Metrics{std::stod(acc_s), std::stod(prec_s), std::stod(rec_s)});
    }
    return report;
  }

  std::size_t cell_count() const { return cells_.size(); }

 private:
  static std::pair<int, int> key(corpus::View view, InputType input) {
    return {static_cast<int>(view), static_cast<int>(input)};
  }

  std::map<std::pair<int, int>, Metrics> cells_;
};

}  // namespace lamedet::eval
