#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace engram {

// Error taxonomy shared by the library and the CLI. The CLI maps categories
// to exit codes and a single machine-parsable stderr line.
enum class ErrorCategory {
  usage,      // bad flags / bad invocation
  asset,      // missing or unreadable input file
  parse,      // malformed content in an input file
  integrity,  // content violates a structural invariant
  schema,     // tabular input has wrong columns / labels
  domain,     // operation precondition violated
  numeric,    // degenerate or singular numerical problem
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) { throw Error(c, msg); }

// ---------------------------------------------------------------------------
// Deterministic RNG. SplitMix64 core with rejection sampling for bounded
// draws, so streams are identical across platforms and standard libraries.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t& state);

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, n). Rejection sampling on the top bits, no modulo bias.
  uint64_t next_below(uint64_t n);

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no cached spare; two draws per call).
  double next_gauss();

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Sub-seed derivation: all randomness in a run flows from one root seed.
// sub_seed(seed, purpose, index) = mix(mix(seed ^ fnv1a64(purpose)) + index),
// where mix is the SplitMix64 output function. Every permutation / bootstrap
// replicate i gets its own generator, so results do not depend on evaluation
// order.
uint64_t fnv1a64(std::string_view s);
uint64_t sub_seed(uint64_t seed, std::string_view purpose, uint64_t index);

// ---------------------------------------------------------------------------
// SHA-256 for asset provenance hashes.
// ---------------------------------------------------------------------------

std::string sha256_hex(std::span<const unsigned char> data);
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

// ---------------------------------------------------------------------------
// Small CSV layer (RFC-4180 quoting). Lines starting with '#' outside quoted
// fields are provenance comments and are skipped by the reader.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;           // -1 when absent
  int require_column(std::string_view name) const;   // schema error when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

// Whole-file readers. read_text_lines is transparent to gzip (zlib gzopen
// reads plain files unchanged).
std::string read_file(const std::string& path);
std::vector<std::string> read_text_lines(const std::string& path);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace engram
