#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace engram {

// Byte-level BPE vocabulary. Token strings live in the byte-encoded alphabet:
// every raw byte maps to a printable codepoint via byte_encoder, so token
// files stay valid UTF-8 no matter what bytes the corpus contains.
struct Vocab {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;                       // dense, size V
  std::map<std::pair<std::string, std::string>, int> merges;  // pair -> rank
  std::array<std::string, 256> byte_encoder;                  // byte -> codepoint (UTF-8)
  std::unordered_map<uint32_t, unsigned char> byte_decoder;   // codepoint -> byte

  int size() const { return static_cast<int>(id_to_token.size()); }
};

struct TokenSequence {
  std::vector<int> ids;
  // Per-token half-open byte range into the source text. Ranges tile the
  // input: sorted, non-overlapping, and they concatenate back to it exactly.
  std::vector<std::pair<std::size_t, std::size_t>> offsets;

  std::size_t size() const { return ids.size(); }
};

struct WordSpan {
  int word_index;
  std::string word;
  int token_lo;  // half-open token range [lo, hi)
  int token_hi;
};

struct Alignment {
  std::vector<WordSpan> spans;
  std::vector<int> unassigned_tokens;  // whitespace-only tokens outside every word
};

// The byte->printable-codepoint table used by the published GPT-2 assets:
// printable bytes map to themselves, the rest to 256, 257, ... in byte order.
std::array<std::string, 256> byte_level_alphabet();

// vocab_path: JSON object token -> id. merges_path: one space-separated pair
// per line; a leading '#' line is treated as a header and skipped.
Vocab load_vocab(const std::string& vocab_path, const std::string& merges_path);

// In-memory construction for tests and tools. Validates the same invariants
// as load_vocab (dense ids, merge closure).
Vocab make_vocab(const std::vector<std::pair<std::string, int>>& tokens,
                 const std::vector<std::pair<std::string, std::string>>& merges);

// Pre-tokenizer: splits text into chunks per the byte-level BPE contract
// (contractions, optional-leading-space letter/number/other runs, whitespace
// runs that leave their final character to the following chunk). Exposed for
// tests; encode() applies it internally. Returned pairs are byte ranges.
std::vector<std::pair<std::size_t, std::size_t>> pretokenize(std::string_view text);

TokenSequence encode(const Vocab& vocab, std::string_view text);
std::string decode(const Vocab& vocab, const std::vector<int>& ids);
std::string decode(const Vocab& vocab, int id);

// Maps whitespace-split transcript words onto contiguous token ranges using
// byte offsets. `text` must be the exact string that produced `tokens`.
Alignment align_words(const Vocab& vocab, const TokenSequence& tokens, std::string_view text,
                      const std::vector<std::string>& transcript_words);

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace engram
