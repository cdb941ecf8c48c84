#include "dialectrag/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "dialectrag/error.hpp"

namespace dialectrag::unicode {

std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto size = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < size) {
    const int32_t offset = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, size, c);
    if (c < 0) {
      throw Error(ErrorCode::InvalidEncoding,
                  "ill-formed UTF-8 at byte offset " + std::to_string(offset));
    }
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

std::string encode(std::u32string_view code_points) {
  std::string out;
  out.reserve(code_points.size());
  for (char32_t c : code_points) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(buf, len, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
    if (error) {
      throw Error(ErrorCode::InvalidEncoding, "code point not encodable");
    }
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) noexcept {
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  const auto size = static_cast<int32_t>(bytes.size());
  int32_t i = 0;
  while (i < size) {
    UChar32 c = 0;
    U8_NEXT(p, i, size, c);
    if (c < 0) return false;
  }
  return true;
}

bool is_whitespace(char32_t c) noexcept {
  return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0;
}

std::u32string nfc(std::u32string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::InvalidEncoding, "NFC normalizer unavailable");
  }
  const auto src = icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(text.data()),
                                                  static_cast<int32_t>(text.size()));
  icu::UnicodeString dst = normalizer->normalize(src, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::InvalidEncoding, "NFC normalization failed");
  }
  std::u32string out(static_cast<std::size_t>(dst.countChar32()), U'\0');
  dst.toUTF32(reinterpret_cast<UChar32*>(out.data()), static_cast<int32_t>(out.size()), status);
  return out;
}

std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

}  // namespace dialectrag::unicode
