#include "engram/unicode.hpp"

#include <algorithm>

namespace engram::uni {

namespace {

bool in_ranges(const CpRange* ranges, std::size_t n, uint32_t cp) {
  const CpRange* end = ranges + n;
  auto it = std::upper_bound(ranges, end, cp,
                             [](uint32_t v, const CpRange& r) { return v < r.lo; });
  if (it == ranges) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

// Unicode White_Space property (matches the \s class of the regex engine the
// published GPT-2 pre-tokenizer pattern was written for).
const uint32_t kWhitespace[] = {
    0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20, 0x85, 0xA0, 0x1680, 0x2000, 0x2001, 0x2002,
    0x2003, 0x2004, 0x2005, 0x2006, 0x2007, 0x2008, 0x2009, 0x200A, 0x2028, 0x2029,
    0x202F, 0x205F, 0x3000,
};

}  // namespace

bool is_letter(uint32_t cp) { return in_ranges(kLetterRanges, kLetterRangesCount, cp); }

bool is_number(uint32_t cp) { return in_ranges(kNumberRanges, kNumberRangesCount, cp); }

bool is_whitespace(uint32_t cp) {
  for (uint32_t w : kWhitespace) {
    if (cp == w) return true;
    if (w > cp) return false;
  }
  return false;
}

uint32_t decode_cp(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;  // stray continuation or invalid lead byte
    return b0;
  }
  if (i + 1 + extra > s.size()) {
    ++i;  // truncated sequence
    return b0;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      ++i;  // malformed continuation, emit lead byte alone
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += 1 + extra;
  return cp;
}

void append_cp(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

int cp_len(uint32_t cp) {
  if (cp < 0x80) return 1;
  if (cp < 0x800) return 2;
  if (cp < 0x10000) return 3;
  return 4;
}

}  // namespace engram::uni
