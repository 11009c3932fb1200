#include "mpd/model/tokenizer.hpp"

namespace mpd {

TokenSeq tokenize(std::string_view text) {
    TokenSeq out;
    out.reserve(text.size());
    for (char c : text) out.push_back(static_cast<unsigned char>(c));
    return out;
}

std::string detokenize(const TokenSeq& tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (int id : tokens)
        if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
    return out;
}

TokenSeq encode_prompt(std::string_view text) {
    TokenSeq out;
    out.reserve(text.size() + 1);
    out.push_back(kBosToken);
    for (char c : text) out.push_back(static_cast<unsigned char>(c));
    return out;
}

} // namespace mpd
