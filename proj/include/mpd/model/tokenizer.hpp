#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mpd {

// Byte-level vocabulary: ids 0..255 are raw bytes, then two specials.
inline constexpr int kBosToken = 256;
inline constexpr int kEosToken = 257;
inline constexpr int kByteVocabSize = 258;

using TokenSeq = std::vector<int>;

TokenSeq tokenize(std::string_view text);

// Special tokens render as nothing.
std::string detokenize(const TokenSeq& tokens);

// BOS followed by the bytes of `text`; the form every prompt is run in.
TokenSeq encode_prompt(std::string_view text);

} // namespace mpd
