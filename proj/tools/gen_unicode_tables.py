#!/usr/bin/env python3
"""Regenerates include/sps/unicode_tables.hpp from Python's unicodedata."""
import pathlib
import unicodedata

ROOT = pathlib.Path(__file__).resolve().parent.parent


def punctuation_ranges():
    ranges = []
    for cp in range(0x110000):
        if unicodedata.category(chr(cp)).startswith("P"):
            if ranges and ranges[-1][1] == cp - 1:
                ranges[-1][1] = cp
            else:
                ranges.append([cp, cp])
    return ranges


def lowercase_runs():
    runs = []
    for cp in range(0x110000):
        lower = chr(cp).lower()
        if len(lower) != 1 or ord(lower) == cp:
            continue
        delta = ord(lower) - cp
        if runs:
            first, last, stride, d = runs[-1]
            if d == delta and ((stride == 0 and cp - last in (1, 2)) or (stride and cp - last == stride)):
                runs[-1] = [first, cp, cp - last if stride == 0 else stride, d]
                continue
        runs.append([cp, cp, 0, delta])
    return runs


def main():
    punct = punctuation_ranges()
    runs = lowercase_runs()
    out = ["#pragma once", ""]
    out.append("// Generated from the Unicode Character Database " + unicodedata.unidata_version +
               " (Python unicodedata).")
    out.append("// Regenerate with tools/gen_unicode_tables.py; do not edit by hand.")
    out.append("")
    out.append("#include <array>\n#include <cstdint>\n\nnamespace sps::unicode {\n")
    out.append("struct Range {\n  char32_t first;\n  char32_t last;\n};\n")
    out.append("// General category P* (all punctuation), inclusive ranges, sorted.")
    out.append(f"inline constexpr std::array<Range, {len(punct)}> kPunctuation = {{{{")
    out += [f"    {{0x{a:04X}, 0x{b:04X}}}," for a, b in punct]
    out.append("}};\n")
    out.append("// Simple lowercase mapping: every stride-th code point in [first, last] maps to cp + delta.")
    out.append("struct CaseRun {\n  char32_t first;\n  char32_t last;\n  std::uint8_t stride;\n"
               "  std::int32_t delta;\n};\n")
    out.append(f"inline constexpr std::array<CaseRun, {len(runs)}> kLowercase = {{{{")
    out += [f"    {{0x{s:04X}, 0x{e:04X}, {max(st, 1)}, {d}}}," for s, e, st, d in runs]
    out.append("}};\n\n}  // namespace sps::unicode")
    (ROOT / "include/sps/unicode_tables.hpp").write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
