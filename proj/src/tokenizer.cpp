#include "engram/tokenizer.hpp"

#include <algorithm>
#include <limits>

#include "engram/unicode.hpp"
#include "engram/util.hpp"
#include "json.hpp"

namespace engram {

namespace uni = engram::uni;

std::array<std::string, 256> byte_level_alphabet() {
  std::array<std::string, 256> table;
  int next = 256;
  for (int b = 0; b < 256; ++b) {
    bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
    uint32_t cp = printable ? static_cast<uint32_t>(b) : static_cast<uint32_t>(next++);
    std::string s;
    uni::append_cp(s, cp);
    table[static_cast<std::size_t>(b)] = s;
  }
  return table;
}

namespace {

void init_byte_tables(Vocab& v) {
  v.byte_encoder = byte_level_alphabet();
  for (int b = 0; b < 256; ++b) {
    const std::string& s = v.byte_encoder[static_cast<std::size_t>(b)];
    std::size_t i = 0;
    uint32_t cp = uni::decode_cp(s, i);
    v.byte_decoder[cp] = static_cast<unsigned char>(b);
  }
}

void validate_vocab(const Vocab& v) {
  for (const auto& [pair, rank] : v.merges) {
    (void)rank;
    std::string joined = pair.first + pair.second;
    if (!v.token_to_id.count(joined)) {
      fail(ErrorCategory::integrity,
           "merge result not in vocabulary: \"" + pair.first + "\" + \"" + pair.second + "\"");
    }
  }
}

}  // namespace

Vocab load_vocab(const std::string& vocab_path, const std::string& merges_path) {
  Vocab v;
  init_byte_tables(v);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(vocab_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, "vocab file " + vocab_path + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCategory::parse, "vocab file must be a JSON object: " + vocab_path);

  int max_id = -1;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer()) {
      fail(ErrorCategory::parse, "vocab entry for \"" + it.key() + "\" is not an integer id");
    }
    int id = it.value().get<int>();
    if (id < 0) fail(ErrorCategory::integrity, "negative token id for \"" + it.key() + "\"");
    if (!v.token_to_id.emplace(it.key(), id).second) {
      fail(ErrorCategory::integrity, "duplicate token string: \"" + it.key() + "\"");
    }
    max_id = std::max(max_id, id);
  }
  v.id_to_token.assign(static_cast<std::size_t>(max_id + 1), std::string());
  std::vector<bool> seen(static_cast<std::size_t>(max_id + 1), false);
  for (const auto& [tok, id] : v.token_to_id) {
    if (seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCategory::integrity, "duplicate token id " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = true;
    v.id_to_token[static_cast<std::size_t>(id)] = tok;
  }
  for (int id = 0; id <= max_id; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCategory::integrity, "token ids are not dense: id " + std::to_string(id) +
                                         " missing (vocab size " + std::to_string(max_id + 1) + ")");
    }
  }

  auto lines = read_text_lines(merges_path);
  int rank = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    if (ln == 0 && line[0] == '#') continue;  // "#version: ..." header
    auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
        line.find(' ', sp + 1) != std::string::npos) {
      fail(ErrorCategory::parse, merges_path + ":" + std::to_string(ln + 1) +
                                     ": expected exactly two space-separated symbols");
    }
    auto key = std::make_pair(line.substr(0, sp), line.substr(sp + 1));
    if (!v.merges.emplace(key, rank).second) {
      fail(ErrorCategory::integrity, merges_path + ":" + std::to_string(ln + 1) +
                                         ": duplicate merge pair \"" + line + "\"");
    }
    ++rank;
  }

  validate_vocab(v);
  return v;
}

Vocab make_vocab(const std::vector<std::pair<std::string, int>>& tokens,
                 const std::vector<std::pair<std::string, std::string>>& merges) {
  Vocab v;
  init_byte_tables(v);
  int max_id = -1;
  for (const auto& [tok, id] : tokens) {
    if (!v.token_to_id.emplace(tok, id).second) {
      fail(ErrorCategory::integrity, "duplicate token string: \"" + tok + "\"");
    }
    max_id = std::max(max_id, id);
  }
  v.id_to_token.assign(static_cast<std::size_t>(max_id + 1), std::string());
  std::vector<bool> seen(static_cast<std::size_t>(max_id + 1), false);
  for (const auto& [tok, id] : v.token_to_id) {
    if (id < 0 || seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCategory::integrity, "duplicate or negative token id " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = true;
    v.id_to_token[static_cast<std::size_t>(id)] = tok;
  }
  for (int id = 0; id <= max_id; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCategory::integrity, "token ids are not dense: id " + std::to_string(id) + " missing");
    }
  }
  int rank = 0;
  for (const auto& m : merges) v.merges.emplace(m, rank++);
  validate_vocab(v);
  return v;
}

// ---------------------------------------------------------------------------
// Pre-tokenizer. Implements the byte-level BPE chunking contract:
//
//   's 't 're 've 'm 'll 'd        contraction suffixes (case-sensitive)
//   [ ]?letter+                    optional single leading space
//   [ ]?number+
//   [ ]?other+                     other = not whitespace/letter/number
//   ws+ not followed by non-ws     a trailing run keeps everything
//   ws+                            single whitespace char fallback
//
// A whitespace run followed by visible text gives up its last character so
// that the next chunk can claim it as the leading-space marker.
// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> pretokenize(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto peek = [&](std::size_t at, std::size_t& next) -> uint32_t {
    next = at;
    return uni::decode_cp(text, next);
  };

  while (i < n) {
    std::size_t start = i;
    std::size_t after;
    uint32_t cp = peek(i, after);

    if (cp == '\'') {
      // contraction suffixes; longest two-char forms checked via next chars
      static const std::string_view two[] = {"'s", "'t", "'m", "'d"};
      static const std::string_view three[] = {"'re", "'ve", "'ll"};
      std::string_view rest = text.substr(i);
      std::size_t matched = 0;
      for (auto c3 : three) {
        if (rest.substr(0, 3) == c3) {
          matched = 3;
          break;
        }
      }
      if (matched == 0) {
        for (auto c2 : two) {
          if (rest.substr(0, 2) == c2) {
            matched = 2;
            break;
          }
        }
      }
      if (matched > 0) {
        i += matched;
        chunks.emplace_back(start, i);
        continue;
      }
      // fall through: apostrophe joins an "other" run below
    }

    bool led_by_space = false;
    if (cp == ' ') {
      // single literal space may prefix a letter/number/other run
      std::size_t next2;
      if (after < n) {
        uint32_t cp2 = peek(after, next2);
        if (!uni::is_whitespace(cp2)) {
          led_by_space = true;
          i = after;
          cp = cp2;
          after = next2;
        }
      }
      if (!led_by_space) {
        // whitespace run handling below
      }
    }

    if (!uni::is_whitespace(cp)) {
      if (uni::is_letter(cp)) {
        i = after;
        while (i < n) {
          std::size_t nx;
          if (!uni::is_letter(peek(i, nx))) break;
          i = nx;
        }
      } else if (uni::is_number(cp)) {
        i = after;
        while (i < n) {
          std::size_t nx;
          if (!uni::is_number(peek(i, nx))) break;
          i = nx;
        }
      } else {
        // "other" run, but stop before a contraction opportunity? No:
        // apostrophes inside the run are consumed; the contraction branch
        // only applies at match start.
        i = after;
        while (i < n) {
          std::size_t nx;
          uint32_t c = peek(i, nx);
          if (uni::is_whitespace(c) || uni::is_letter(c) || uni::is_number(c)) break;
          i = nx;
        }
      }
      chunks.emplace_back(start, i);
      continue;
    }

    // whitespace run [start, j)
    std::size_t j = after;
    std::size_t last_ws_start = start;  // byte offset of the run's final char
    while (j < n) {
      std::size_t nx;
      if (!uni::is_whitespace(peek(j, nx))) break;
      last_ws_start = j;
      j = nx;
    }
    if (j >= n) {
      chunks.emplace_back(start, j);  // trailing run, nothing follows
      i = j;
      continue;
    }
    if (j == after) {
      // single whitespace char before visible text: the space case was
      // handled above, so this is a lone tab/newline/etc.
      chunks.emplace_back(start, j);
      i = j;
      continue;
    }
    // leave the final whitespace char to the next iteration
    chunks.emplace_back(start, last_ws_start);
    i = last_ws_start;
  }
  return chunks;
}

namespace {

// Greedy lowest-rank merge over one pre-token chunk. Symbols start as
// byte-encoded single bytes; src_bytes tracks how many source bytes each
// symbol covers so token offsets can be recovered.
struct Symbol {
  std::string text;
  std::size_t src_bytes;
};

void bpe_merge(const Vocab& vocab, std::vector<Symbol>& symbols) {
  if (symbols.size() < 2) return;
  while (true) {
    int best_rank = std::numeric_limits<int>::max();
    std::size_t best_at = 0;
    for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
      auto it = vocab.merges.find({symbols[k].text, symbols[k + 1].text});
      if (it != vocab.merges.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = k;
      }
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    // merge every occurrence of the winning pair, left to right
    const std::string first = symbols[best_at].text;
    const std::string second = symbols[best_at + 1].text;
    std::vector<Symbol> merged;
    merged.reserve(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
      if (k + 1 < symbols.size() && symbols[k].text == first && symbols[k + 1].text == second) {
        merged.push_back({first + second, symbols[k].src_bytes + symbols[k + 1].src_bytes});
        ++k;
      } else {
        merged.push_back(symbols[k]);
      }
    }
    symbols = std::move(merged);
    if (symbols.size() < 2) break;
  }
}

}  // namespace

TokenSequence encode(const Vocab& vocab, std::string_view text) {
  TokenSequence out;
  for (auto [lo, hi] : pretokenize(text)) {
    std::vector<Symbol> symbols;
    symbols.reserve(hi - lo);
    for (std::size_t b = lo; b < hi; ++b) {
      symbols.push_back({vocab.byte_encoder[static_cast<unsigned char>(text[b])], 1});
    }
    bpe_merge(vocab, symbols);
    std::size_t pos = lo;
    for (const auto& sym : symbols) {
      auto it = vocab.token_to_id.find(sym.text);
      if (it == vocab.token_to_id.end()) {
        fail(ErrorCategory::integrity,
             "symbol not in vocabulary: \"" + sym.text + "\" (vocabulary lacks byte coverage)");
      }
      out.ids.push_back(it->second);
      out.offsets.emplace_back(pos, pos + sym.src_bytes);
      pos += sym.src_bytes;
    }
  }
  return out;
}

std::string decode(const Vocab& vocab, int id) {
  if (id < 0 || id >= vocab.size()) {
    fail(ErrorCategory::domain, "token id out of range: " + std::to_string(id));
  }
  const std::string& tok = vocab.id_to_token[static_cast<std::size_t>(id)];
  std::string out;
  std::size_t i = 0;
  while (i < tok.size()) {
    std::size_t before = i;
    uint32_t cp = uni::decode_cp(tok, i);
    auto it = vocab.byte_decoder.find(cp);
    if (it != vocab.byte_decoder.end()) {
      out.push_back(static_cast<char>(it->second));
    } else {
      out += tok.substr(before, i - before);  // pass through non-byte-alphabet chars
    }
  }
  return out;
}

std::string decode(const Vocab& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) out += decode(vocab, id);
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    uint32_t cp = uni::decode_cp(text, j);
    if (uni::is_whitespace(cp)) {
      i = j;
      continue;
    }
    std::size_t start = i;
    while (i < text.size()) {
      std::size_t k = i;
      if (uni::is_whitespace(uni::decode_cp(text, k))) break;
      i = k;
    }
    words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

Alignment align_words(const Vocab& vocab, const TokenSequence& tokens, std::string_view text,
                      const std::vector<std::string>& transcript_words) {
  (void)vocab;
  // Locate each word's byte extent by scanning the text left to right.
  std::vector<std::pair<std::size_t, std::size_t>> word_extent;
  word_extent.reserve(transcript_words.size());
  std::size_t pos = 0;
  auto skip_ws = [&]() {
    while (pos < text.size()) {
      std::size_t j = pos;
      if (!uni::is_whitespace(uni::decode_cp(text, j))) break;
      pos = j;
    }
  };
  for (std::size_t w = 0; w < transcript_words.size(); ++w) {
    skip_ws();
    const std::string& word = transcript_words[w];
    if (word.empty() || text.substr(pos, word.size()) != word) {
      fail(ErrorCategory::integrity, "alignment error at word " + std::to_string(w) + " (\"" +
                                         word + "\"): transcript does not match text");
    }
    word_extent.emplace_back(pos, pos + word.size());
    pos += word.size();
  }
  skip_ws();
  if (pos != text.size()) {
    fail(ErrorCategory::integrity,
         "alignment error: text has content beyond the last transcript word");
  }

  // Assign each token to the word containing its non-whitespace bytes.
  Alignment result;
  std::vector<int> token_word(tokens.size(), -1);
  std::size_t w = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto [bs, be] = tokens.offsets[t];
    // trim whitespace bytes from both ends of the token's extent
    std::size_t lo = bs;
    while (lo < be) {
      std::size_t j = lo;
      if (!uni::is_whitespace(uni::decode_cp(text, j))) break;
      lo = j;
    }
    if (lo == be) {
      result.unassigned_tokens.push_back(static_cast<int>(t));
      continue;
    }
    std::size_t hi = be;  // one past last non-ws byte: scan back conservatively
    while (hi > lo && static_cast<unsigned char>(text[hi - 1]) <= ' ' &&
           uni::is_whitespace(static_cast<unsigned char>(text[hi - 1]))) {
      --hi;
    }
    while (w < word_extent.size() && word_extent[w].second <= lo) ++w;
    if (w >= word_extent.size() || hi <= word_extent[w].first || lo < word_extent[w].first) {
      fail(ErrorCategory::integrity,
           "alignment error: token " + std::to_string(t) + " not contained in any word");
    }
    if (hi > word_extent[w].second) {
      fail(ErrorCategory::integrity,
           "alignment error at word " + std::to_string(w) + " (\"" + transcript_words[w] +
               "\"): a token crosses the word boundary");
    }
    token_word[t] = static_cast<int>(w);
  }

  int prev_word = -1;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    int wi = token_word[t];
    if (wi < 0) continue;
    if (wi != prev_word) {
      if (wi < prev_word) {
        fail(ErrorCategory::integrity, "alignment error: non-monotone word assignment");
      }
      result.spans.push_back(WordSpan{wi, transcript_words[static_cast<std::size_t>(wi)],
                                      static_cast<int>(t), static_cast<int>(t) + 1});
      prev_word = wi;
    } else {
      result.spans.back().token_hi = static_cast<int>(t) + 1;
    }
  }
  if (result.spans.size() != transcript_words.size()) {
    fail(ErrorCategory::integrity, "alignment error: " + std::to_string(result.spans.size()) +
                                       " spans for " + std::to_string(transcript_words.size()) +
                                       " words (a word has no tokens)");
  }
  return result;
}

}  // namespace engram
