#!/usr/bin/env python3
"""Regenerates src/unicode_tables.cpp from Python's unicodedata.

The byte-level pre-tokenizer needs three codepoint classes: letters (general
category L*), numbers (N*) and whitespace. Letters and numbers are emitted as
sorted inclusive ranges and binary-searched at runtime; the whitespace set is
small enough to list inline in the C++ source.

Usage: python3 tools/gen_unicode_tables.py > src/unicode_tables.cpp
"""

import sys
import unicodedata


def ranges_for(prefix: str):
    ranges = []
    start = None
    prev = None
    for cp in range(0x110000):
        if unicodedata.category(chr(cp)).startswith(prefix):
            if start is None:
                start = cp
            prev = cp
        else:
            if start is not None:
                ranges.append((start, prev))
                start = None
    if start is not None:
        ranges.append((start, prev))
    return ranges


def emit(name: str, ranges):
    print(f"const CpRange k{name}[] = {{")
    line = "    "
    for lo, hi in ranges:
        item = f"{{0x{lo:X}, 0x{hi:X}}}, "
        if len(line) + len(item) > 100:
            print(line.rstrip())
            line = "    "
        line += item
    if line.strip():
        print(line.rstrip().rstrip(","))
    print("};")
    print(f"const std::size_t k{name}Count = sizeof(k{name}) / sizeof(k{name}[0]);")
    print()


def main():
    letters = ranges_for("L")
    numbers = ranges_for("N")
    print("// Generated by tools/gen_unicode_tables.py from Unicode "
          f"{unicodedata.unidata_version} category data. Do not edit by hand.")
    print()
    print("#include \"engram/unicode.hpp\"")
    print()
    print("namespace engram::uni {")
    print()
    emit("LetterRanges", letters)
    emit("NumberRanges", numbers)
    print("}  // namespace engram::uni")
    sys.stderr.write(f"letters: {len(letters)} ranges, numbers: {len(numbers)} ranges\n")


if __name__ == "__main__":
    main()
