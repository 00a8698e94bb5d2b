#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engram/embeddings.hpp"

namespace engram {

enum class Group { story_exposure, no_exposure };

struct ResponseRow {
  int word_index;  // cloze starts at the third story word, so always >= 2
  std::string correct_word;
  Group group;
  std::string participant_id;
  std::optional<std::string> response;  // empty field = missing datum
};

struct ResponseSet {
  std::vector<ResponseRow> rows;
  int n_participants_exposure = 0;
  int n_participants_noexposure = 0;
};

struct WordScore {
  int word_index;
  std::string correct_word;
  std::optional<double> mean_sim_exposure;
  std::optional<double> mean_sim_noexposure;
  int n_exposure = 0;    // scorable responses that entered the mean
  int n_noexposure = 0;
  std::optional<double> memory_effect;  // exposure minus no-exposure
  bool unscorable = false;              // correct word lacks an embedding
};

struct ScoreTable {
  std::vector<WordScore> words;  // sorted by word_index
  int skipped_responses = 0;     // missing or OOV responses excluded from means
  int unscorable_words = 0;
};

// CSV schema: word_index,correct_word,group,participant_id,response
ResponseSet load_responses(const std::string& csv_path);

// Response scoring: exact match (after lookup normalization) scores 1 without
// touching the table; otherwise cosine between response and correct-word
// embeddings; missing/OOV responses are excluded from the mean and counted.
ScoreTable score(const ResponseSet& responses, const EmbeddingTable& table);

const char* to_string(Group g);

}  // namespace engram
