#include "engram/behavior.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "engram/util.hpp"

namespace engram {

const char* to_string(Group g) {
  return g == Group::story_exposure ? "story_exposure" : "no_exposure";
}

ResponseSet load_responses(const std::string& csv_path) {
  CsvTable csv = read_csv(csv_path);
  const int c_word = csv.require_column("word_index");
  const int c_correct = csv.require_column("correct_word");
  const int c_group = csv.require_column("group");
  const int c_pid = csv.require_column("participant_id");
  const int c_resp = csv.require_column("response");

  ResponseSet rs;
  std::set<std::tuple<int, std::string, Group>> seen;
  std::set<std::string> pids_exposure, pids_noexposure;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (static_cast<int>(row.size()) <= std::max({c_word, c_correct, c_group, c_pid, c_resp})) {
      fail(ErrorCategory::parse, csv_path + ": row " + std::to_string(r + 2) + " has too few fields");
    }
    ResponseRow out;
    try {
      out.word_index = std::stoi(row[static_cast<std::size_t>(c_word)]);
    } catch (const std::exception&) {
      fail(ErrorCategory::parse, csv_path + ": row " + std::to_string(r + 2) + ": bad word_index");
    }
    if (out.word_index < 2) {
      fail(ErrorCategory::integrity,
           csv_path + ": row " + std::to_string(r + 2) +
               ": word_index < 2 (the cloze task starts at the third story word)");
    }
    out.correct_word = row[static_cast<std::size_t>(c_correct)];
    const std::string& g = row[static_cast<std::size_t>(c_group)];
    if (g == "story_exposure") out.group = Group::story_exposure;
    else if (g == "no_exposure") out.group = Group::no_exposure;
    else {
      fail(ErrorCategory::schema, csv_path + ": row " + std::to_string(r + 2) +
                                      ": unknown group \"" + g +
                                      "\" (accepted: story_exposure, no_exposure)");
    }
    out.participant_id = row[static_cast<std::size_t>(c_pid)];
    const std::string& resp = row[static_cast<std::size_t>(c_resp)];
    if (!resp.empty()) out.response = resp;

    if (!seen.insert({out.word_index, out.participant_id, out.group}).second) {
      fail(ErrorCategory::integrity, csv_path + ": duplicate (word_index, participant, group) = (" +
                                         std::to_string(out.word_index) + ", " +
                                         out.participant_id + ", " + g + ")");
    }
    (out.group == Group::story_exposure ? pids_exposure : pids_noexposure)
        .insert(out.participant_id);
    rs.rows.push_back(std::move(out));
  }
  rs.n_participants_exposure = static_cast<int>(pids_exposure.size());
  rs.n_participants_noexposure = static_cast<int>(pids_noexposure.size());
  return rs;
}

ScoreTable score(const ResponseSet& responses, const EmbeddingTable& table) {
  // bucket rows by word
  std::map<int, std::vector<const ResponseRow*>> by_word;
  for (const auto& row : responses.rows) by_word[row.word_index].push_back(&row);

  ScoreTable result;
  for (const auto& [word_index, rows] : by_word) {
    WordScore ws;
    ws.word_index = word_index;
    ws.correct_word = rows.front()->correct_word;
    for (const auto* r : rows) {
      if (r->correct_word != ws.correct_word) {
        fail(ErrorCategory::integrity, "word " + std::to_string(word_index) +
                                           ": conflicting correct_word entries (\"" +
                                           ws.correct_word + "\" vs \"" + r->correct_word + "\")");
      }
    }

    const std::vector<float>* correct_vec = table.lookup(ws.correct_word);
    if (correct_vec == nullptr) {
      ws.unscorable = true;
      ++result.unscorable_words;
      // responses for an unscorable word are not counted as skipped; the
      // whole word leaves the analysis
      result.words.push_back(std::move(ws));
      continue;
    }

    const std::string correct_key =
        EmbeddingTable::normalize_key(ws.correct_word, table.lowercase());
    double sum[2] = {0.0, 0.0};
    int n[2] = {0, 0};
    for (const auto* r : rows) {
      const int g = r->group == Group::story_exposure ? 0 : 1;
      if (!r->response) {
        ++result.skipped_responses;
        continue;
      }
      const std::string resp_key = EmbeddingTable::normalize_key(*r->response, table.lowercase());
      double sim;
      if (resp_key == correct_key) {
        sim = 1.0;  // exact match needs no embedding
      } else {
        const std::vector<float>* resp_vec = table.lookup(*r->response);
        if (resp_vec == nullptr) {
          ++result.skipped_responses;
          continue;
        }
        auto c = cosine(*resp_vec, *correct_vec);
        if (!c) {
          ++result.skipped_responses;
          continue;
        }
        sim = *c;
      }
      sum[g] += sim;
      ++n[g];
    }
    ws.n_exposure = n[0];
    ws.n_noexposure = n[1];
    if (n[0] > 0) ws.mean_sim_exposure = sum[0] / n[0];
    if (n[1] > 0) ws.mean_sim_noexposure = sum[1] / n[1];
    if (ws.mean_sim_exposure && ws.mean_sim_noexposure) {
      ws.memory_effect = *ws.mean_sim_exposure - *ws.mean_sim_noexposure;
    }
    result.words.push_back(std::move(ws));
  }
  return result;
}

}  // namespace engram
