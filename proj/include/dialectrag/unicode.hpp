#pragma once

#include <string>
#include <string_view>

namespace dialectrag::unicode {

/// Decodes UTF-8 into code points. Throws Error(InvalidEncoding) on ill-formed input.
std::u32string decode(std::string_view utf8);

std::string encode(std::u32string_view code_points);

bool is_valid_utf8(std::string_view bytes) noexcept;

bool is_whitespace(char32_t c) noexcept;

/// Canonical composition (NFC).
std::u32string nfc(std::u32string_view text);

/// Number of code points; input must be valid UTF-8.
std::size_t length(std::string_view utf8);

}  // namespace dialectrag::unicode
