#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyricnn/dataset.hpp"
#include "lyricnn/emotions.hpp"
#include "lyricnn/errors.hpp"
#include "lyricnn/io.hpp"
#include "lyricnn/model.hpp"
#include "lyricnn/text.hpp"
#include "lyricnn/training.hpp"

namespace lyricnn {

// Per-song scores and the full ranking: descending probability, ties broken
// by ascending canonical index.
struct Prediction {
  std::string song_id;
  std::array<double, kEmotionCount> probabilities{};
  std::array<Emotion, kEmotionCount> ranking{};
};

inline std::array<Emotion, kEmotionCount> rank_emotions(
    const std::array<double, kEmotionCount>& probabilities) {
  std::array<std::size_t, kEmotionCount> order{};
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probabilities[a] != probabilities[b]) return probabilities[a] > probabilities[b];
    return a < b;
  });
  std::array<Emotion, kEmotionCount> ranking{};
  for (std::size_t i = 0; i < kEmotionCount; ++i) ranking[i] = static_cast<Emotion>(order[i]);
  return ranking;
}

// Whole-text scoring: tokenize, cut into consecutive non-overlapping
// seq_len-token windows (the trailing partial window is padded), average the
// per-window sigmoid outputs.
inline std::array<double, kEmotionCount> predict_text(const ModelBundle& bundle,
                                                      std::string_view text) {
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) throw ValidationError("predict: text tokenizes to zero tokens");

  const std::size_t seq_len = bundle.config.seq_len;
  std::vector<TokenSequence> windows;
  for (std::size_t begin = 0; begin < tokens.size(); begin += seq_len) {
    const std::size_t end = std::min(begin + seq_len, tokens.size());
    std::vector<std::string> window_tokens(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(end));
    windows.push_back(encode(window_tokens, bundle.vocab, seq_len));
  }

  const Tensor probs = infer_probabilities(bundle.params, bundle.config, windows);

  std::array<double, kEmotionCount> mean{};
  for (std::size_t u = 0; u < kEmotionCount; ++u) {
    double total = 0.0;
    for (std::size_t w = 0; w < windows.size(); ++w) total += probs.at(w, u);
    mean[u] = total / static_cast<double>(windows.size());
  }
  return mean;
}

inline Prediction predict_song(const ModelBundle& bundle, const EvalSong& song) {
  Prediction prediction;
  prediction.song_id = song.id;
  try {
    prediction.probabilities = predict_text(bundle, song.lyrics);
  } catch (const ValidationError&) {
    throw ValidationError("predict: lyrics of song '" + song.id + "' tokenize to zero tokens");
  }
  prediction.ranking = rank_emotions(prediction.probabilities);
  return prediction;
}

struct SongOverlap {
  std::string song_id;
  std::array<Emotion, 3> human_labels{};
  std::vector<Emotion> predicted_topk;
  double overlap = 0.0;
};

struct EvalReport {
  std::vector<SongOverlap> per_song;
  double overlap_at_k = 0.0;
  double baseline_overlap_at_k = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  std::size_t k = 0;
};

// Per song: |top-k(prediction) ∩ human labels| / min(k, 3); the aggregate is
// the mean over songs. Lists must be id-aligned.
inline EvalReport overlap_at_k(const std::vector<Prediction>& predictions,
                               const std::vector<EvalSong>& songs, std::size_t k) {
  if (k < 1 || k > kEmotionCount) throw ValidationError("overlap_at_k: k must be in [1, 8]");
  if (predictions.size() != songs.size() || songs.empty())
    throw ValidationError("overlap_at_k: predictions and songs must be aligned and non-empty");

  EvalReport report;
  report.k = k;
  report.n = songs.size();
  double total = 0.0;
  for (std::size_t s = 0; s < songs.size(); ++s) {
    if (predictions[s].song_id != songs[s].id)
      throw ValidationError("overlap_at_k: song id mismatch at index " + std::to_string(s) +
                            " ('" + predictions[s].song_id + "' vs '" + songs[s].id + "')");
    SongOverlap row;
    row.song_id = songs[s].id;
    row.human_labels = songs[s].human_labels;
    row.predicted_topk.assign(predictions[s].ranking.begin(),
                              predictions[s].ranking.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t hits = 0;
    for (Emotion predicted : row.predicted_topk) {
      for (Emotion human : row.human_labels) {
        if (predicted == human) {
          ++hits;
          break;
        }
      }
    }
    row.overlap = static_cast<double>(hits) / static_cast<double>(std::min<std::size_t>(k, 3));
    total += row.overlap;
    report.per_song.push_back(std::move(row));
  }
  report.overlap_at_k = total / static_cast<double>(songs.size());
  return report;
}

// Static ranking by descending training-set label frequency (ties by
// canonical index); the "probability" is the empirical frequency.
struct PriorBaseline {
  std::array<double, kEmotionCount> frequency{};
  std::array<Emotion, kEmotionCount> ranking{};
};

inline PriorBaseline prior_baseline(const std::vector<LabeledExample>& train_examples) {
  if (train_examples.empty()) throw ValidationError("prior_baseline: empty training set");
  PriorBaseline baseline;
  for (const auto& example : train_examples) {
    for (std::size_t u = 0; u < kEmotionCount; ++u) baseline.frequency[u] += example.target[u];
  }
  for (double& f : baseline.frequency) f /= static_cast<double>(train_examples.size());
  baseline.ranking = rank_emotions(baseline.frequency);
  return baseline;
}

inline Prediction baseline_prediction(const PriorBaseline& baseline, const std::string& song_id) {
  Prediction prediction;
  prediction.song_id = song_id;
  prediction.probabilities = baseline.frequency;
  prediction.ranking = baseline.ranking;
  return prediction;
}

// overlap@k plus the prior-baseline aggregate on the same songs.
inline EvalReport evaluate_songs(const std::vector<Prediction>& predictions,
                                 const std::vector<EvalSong>& songs, std::size_t k,
                                 const PriorBaseline* baseline) {
  EvalReport report = overlap_at_k(predictions, songs, k);
  if (baseline) {
    std::vector<Prediction> baseline_predictions;
    baseline_predictions.reserve(songs.size());
    for (const auto& song : songs)
      baseline_predictions.push_back(baseline_prediction(*baseline, song.id));
    report.baseline_overlap_at_k = overlap_at_k(baseline_predictions, songs, k).overlap_at_k;
  }
  return report;
}

// Micro recall over encoded examples: total top-k hits / total positive
// labels. Used to compare a trained model against the prior baseline.
inline double micro_recall_at_k(const std::vector<std::array<double, kEmotionCount>>& probabilities,
                                const std::vector<TargetVector>& targets, std::size_t k) {
  if (k < 1 || k > kEmotionCount) throw ValidationError("micro_recall_at_k: k must be in [1, 8]");
  if (probabilities.size() != targets.size() || targets.empty())
    throw ValidationError("micro_recall_at_k: probabilities and targets must be aligned");
  std::size_t hits = 0, positives = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto ranking = rank_emotions(probabilities[i]);
    for (std::size_t u = 0; u < kEmotionCount; ++u) positives += targets[i][u];
    for (std::size_t r = 0; r < k; ++r) hits += targets[i][index_of(ranking[r])];
  }
  if (positives == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(positives);
}

namespace detail {

inline std::string join_emotions(const std::vector<Emotion>& emotions) {
  std::string out;
  for (std::size_t i = 0; i < emotions.size(); ++i) {
    if (i) out += ';';
    out += to_string(emotions[i]);
  }
  return out;
}

}  // namespace detail

// CSV: one row per song plus a trailing summary row.
inline std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "song_id,human_labels,predicted_topk,overlap\n";
  for (const auto& row : report.per_song) {
    out << row.song_id << ','
        << detail::join_emotions({row.human_labels.begin(), row.human_labels.end()}) << ','
        << detail::join_emotions(row.predicted_topk) << ',' << row.overlap << '\n';
  }
  out << "overall,,," << report.overlap_at_k << '\n';
  return out.str();
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json summary;
  summary["n"] = report.n;
  summary["k"] = report.k;
  summary["overlap_at_k"] = report.overlap_at_k;
  if (std::isnan(report.baseline_overlap_at_k)) {
    summary["baseline_overlap_at_k"] = nullptr;
  } else {
    summary["baseline_overlap_at_k"] = report.baseline_overlap_at_k;
  }
  return summary;
}

// Writes the per-song CSV at csv_path and the JSON summary next to it
// (extension replaced by .summary.json). Both writes are atomic.
inline std::filesystem::path emit_report(const EvalReport& report,
                                         const std::filesystem::path& csv_path) {
  if (report.n < 1) throw ValidationError("emit_report: report must cover at least one song");
  atomic_write_file(csv_path, report_to_csv(report));
  std::filesystem::path summary_path = csv_path;
  summary_path.replace_extension(".summary.json");
  atomic_write_file(summary_path, report_to_json(report).dump(2) + "\n");
  return summary_path;
}

}  // namespace lyricnn
