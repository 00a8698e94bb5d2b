#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace engram::uni {

struct CpRange {
  uint32_t lo;
  uint32_t hi;  // inclusive
};

extern const CpRange kLetterRanges[];
extern const std::size_t kLetterRangesCount;
extern const CpRange kNumberRanges[];
extern const std::size_t kNumberRangesCount;

bool is_letter(uint32_t cp);
bool is_number(uint32_t cp);
bool is_whitespace(uint32_t cp);

// Decodes one codepoint starting at byte offset i; advances i past it.
// Invalid sequences consume a single byte and return it as-is, so encoding
// stays byte-preserving on malformed input.
uint32_t decode_cp(std::string_view s, std::size_t& i);

// UTF-8 encode a single codepoint.
void append_cp(std::string& out, uint32_t cp);

// Byte length of the UTF-8 encoding of cp.
int cp_len(uint32_t cp);

}  // namespace engram::uni
