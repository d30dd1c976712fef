#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace chatagri::text {

/// Decodes UTF-8 into Unicode scalar values. Invalid sequences become U+FFFD,
/// one replacement per offending byte, so decoding never fails.
std::u32string decode_utf8(std::string_view s);

std::string encode_utf8(std::u32string_view s);

/// Simple (1:1) case fold. Covers ASCII, Latin-1 and Latin Extended-A, which
/// is enough for the supported corpora; other scripts pass through unchanged.
char32_t fold_char(char32_t c);
std::u32string fold_case(std::u32string_view s);

bool is_space(char32_t c);
bool is_word_char(char32_t c);

std::u32string trim(std::u32string_view s);

/// Collapses internal whitespace runs to a single U+0020.
std::u32string collapse_whitespace(std::u32string_view s);

/// Case-fold + trim + whitespace collapse. Idempotent. Used for label keys.
std::string normalize_label(std::string_view s);

/// normalize_label plus stripping of terminal punctuation. Used for model
/// answers and pivot answers before any matching.
std::string normalize_answer(std::string_view s);

std::string trim_copy(std::string_view s);

}  // namespace chatagri::text
