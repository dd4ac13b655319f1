#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lyricnn/emotions.hpp"
#include "lyricnn/errors.hpp"
#include "lyricnn/rng.hpp"

namespace lyricnn {

// Ordered list of source emotion names; index = 0-based line number in the
// taxonomy file.
struct SourceTaxonomy {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index_of;

  std::size_t size() const { return names.size(); }
};

// One data row of the source corpus: text, source label ids, record id.
struct RawComment {
  std::string text;
  std::vector<std::size_t> label_ids;
  std::string record_id;
};

using TargetVector = std::array<std::uint8_t, kEmotionCount>;

// Text plus a binary target over the 8 canonical emotions.
struct LabeledExample {
  std::string text;
  TargetVector target{};

  bool operator==(const LabeledExample& other) const = default;
};

// One evaluation song with exactly 3 distinct human emotion labels.
struct EvalSong {
  std::string id;
  std::string title;
  std::string artist;
  std::string lyrics;
  std::array<Emotion, 3> human_labels{};
};

namespace detail {

// Splits on '\n', tolerating CRLF; keeps empty lines so that line numbers in
// error messages match the input.
inline std::vector<std::string_view> split_lines(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(contents.substr(start));
      break;
    }
    std::string_view line = contents.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

// One emotion name per non-empty line; index = line order.
inline SourceTaxonomy parse_source_taxonomy(std::string_view contents) {
  SourceTaxonomy taxonomy;
  for (std::string_view line : detail::split_lines(contents)) {
    if (line.empty()) continue;
    std::string name(line);
    if (taxonomy.index_of.count(name))
      throw ValidationError("taxonomy: duplicate emotion name '" + name + "'");
    taxonomy.index_of.emplace(name, taxonomy.names.size());
    taxonomy.names.push_back(std::move(name));
  }
  if (taxonomy.names.empty()) throw ValidationError("taxonomy: empty file");
  return taxonomy;
}

// Three tab-separated columns per row: text, comma-separated label ids,
// record id. Any malformed row fails the parse, naming its 1-based line.
inline std::vector<RawComment> parse_goemotions_tsv(std::string_view contents,
                                                    const SourceTaxonomy& taxonomy) {
  std::vector<RawComment> comments;
  const auto lines = detail::split_lines(contents);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string_view line = lines[li];
    if (line.empty()) continue;
    const std::size_t line_no = li + 1;

    std::vector<std::string_view> columns;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        columns.push_back(line.substr(start));
        break;
      }
      columns.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (columns.size() != 3) {
      std::ostringstream msg;
      msg << "tsv line " << line_no << ": expected 3 tab-separated columns, got " << columns.size();
      throw ValidationError(msg.str());
    }

    RawComment comment;
    comment.text = std::string(columns[0]);
    comment.record_id = std::string(columns[2]);

    std::string_view ids = columns[1];
    std::size_t pos = 0;
    while (pos <= ids.size()) {
      std::size_t comma = ids.find(',', pos);
      std::string_view field =
          comma == std::string_view::npos ? ids.substr(pos) : ids.substr(pos, comma - pos);
      std::size_t value = 0;
      bool ok = !field.empty();
      for (char c : field) {
        if (c < '0' || c > '9') {
          ok = false;
          break;
        }
        value = value * 10 + static_cast<std::size_t>(c - '0');
      }
      if (!ok) {
        std::ostringstream msg;
        msg << "tsv line " << line_no << ": non-integer label id '" << std::string(field) << "'";
        throw ValidationError(msg.str());
      }
      if (value >= taxonomy.size()) {
        std::ostringstream msg;
        msg << "tsv line " << line_no << ": label id " << value << " out of range (taxonomy size "
            << taxonomy.size() << ")";
        throw ValidationError(msg.str());
      }
      comment.label_ids.push_back(value);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (comment.label_ids.empty()) {
      std::ostringstream msg;
      msg << "tsv line " << line_no << ": empty label id list";
      throw ValidationError(msg.str());
    }
    comments.push_back(std::move(comment));
  }
  return comments;
}

// Projects source labels onto the 8 canonical emotions by exact name match.
// Comments whose labels include none of the 8 are filtered (nullopt);
// filtering is not an error.
inline std::optional<LabeledExample> map_labels(const RawComment& comment,
                                                const SourceTaxonomy& taxonomy) {
  LabeledExample example;
  example.text = comment.text;
  bool any = false;
  for (std::size_t source_id : comment.label_ids) {
    const std::string& name = taxonomy.names.at(source_id);
    if (auto emotion = parse_emotion(name)) {
      example.target[index_of(*emotion)] = 1;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return example;
}

// Same projection, but keeps non-matching comments as all-zero negatives
// (the --keep-negatives path).
inline LabeledExample map_labels_keep_negatives(const RawComment& comment,
                                                const SourceTaxonomy& taxonomy) {
  if (auto example = map_labels(comment, taxonomy)) return *example;
  return LabeledExample{comment.text, {}};
}

// JSON Lines, one object per line with fields id, title, artist, lyrics,
// human_labels (exactly 3 distinct emotion names).
inline std::vector<EvalSong> parse_eval_songs(std::string_view contents) {
  std::vector<EvalSong> songs;
  const auto lines = detail::split_lines(contents);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::size_t line_no = li + 1;
    const auto fail = [line_no](const std::string& what) -> ValidationError {
      std::ostringstream msg;
      msg << "songs line " << line_no << ": " << what;
      return ValidationError(msg.str());
    };

    nlohmann::json row = nlohmann::json::parse(lines[li], nullptr, false);
    if (row.is_discarded() || !row.is_object()) throw fail("invalid JSON object");
    for (const char* field : {"id", "title", "artist", "lyrics", "human_labels"}) {
      if (!row.contains(field)) throw fail(std::string("missing field '") + field + "'");
    }

    EvalSong song;
    try {
      song.id = row.at("id").get<std::string>();
      song.title = row.at("title").get<std::string>();
      song.artist = row.at("artist").get<std::string>();
      song.lyrics = row.at("lyrics").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw fail("id, title, artist and lyrics must be strings");
    }

    const auto& labels = row.at("human_labels");
    if (!labels.is_array() || labels.size() != 3) throw fail("human_labels must list exactly 3 emotions");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!labels[i].is_string()) throw fail("human_labels entries must be strings");
      const std::string name = labels[i].get<std::string>();
      auto emotion = parse_emotion(name);
      if (!emotion) throw fail("unknown label '" + name + "'");
      for (std::size_t j = 0; j < i; ++j) {
        if (song.human_labels[j] == *emotion) throw fail("duplicate label '" + name + "'");
      }
      song.human_labels[i] = *emotion;
    }
    songs.push_back(std::move(song));
  }
  return songs;
}

// Seeded Fisher-Yates shuffle, then prefix/suffix split: validation takes the
// last floor(val_fraction * N) shuffled examples. Equal seeds give bitwise
// identical splits.
inline std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_dataset(
    std::vector<LabeledExample> examples, double val_fraction, std::uint64_t seed) {
  if (examples.empty()) throw ValidationError("split_dataset: empty input");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ValidationError("split_dataset: val_fraction must be in (0, 1)");

  SplitMix64 rng(seed);
  fisher_yates_shuffle(examples, rng);

  const std::size_t val_count =
      static_cast<std::size_t>(val_fraction * static_cast<double>(examples.size()));
  const std::size_t train_count = examples.size() - val_count;

  std::vector<LabeledExample> val(examples.begin() + static_cast<std::ptrdiff_t>(train_count),
                                  examples.end());
  examples.resize(train_count);
  return {std::move(examples), std::move(val)};
}

// Intermediate prepared format: JSON Lines {"text": ..., "target": [8 x 0/1]}.
inline std::string to_prepared_jsonl(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& example : examples) {
    nlohmann::json row;
    row["text"] = example.text;
    row["target"] = std::vector<int>(example.target.begin(), example.target.end());
    out += row.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledExample> parse_prepared_jsonl(std::string_view contents) {
  std::vector<LabeledExample> examples;
  const auto lines = detail::split_lines(contents);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::size_t line_no = li + 1;
    nlohmann::json row = nlohmann::json::parse(lines[li], nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("text") || !row.contains("target")) {
      std::ostringstream msg;
      msg << "prepared line " << line_no << ": expected {\"text\", \"target\"}";
      throw ValidationError(msg.str());
    }
    LabeledExample example;
    try {
      example.text = row.at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      std::ostringstream msg;
      msg << "prepared line " << line_no << ": text must be a string";
      throw ValidationError(msg.str());
    }
    const auto& target = row.at("target");
    if (!target.is_array() || target.size() != kEmotionCount) {
      std::ostringstream msg;
      msg << "prepared line " << line_no << ": target must have " << kEmotionCount << " entries";
      throw ValidationError(msg.str());
    }
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      const int v = target[i].is_number_integer() ? target[i].get<int>() : -1;
      if (v != 0 && v != 1) {
        std::ostringstream msg;
        msg << "prepared line " << line_no << ": target entries must be 0 or 1";
        throw ValidationError(msg.str());
      }
      example.target[i] = static_cast<std::uint8_t>(v);
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

}  // namespace lyricnn
