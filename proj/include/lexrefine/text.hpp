#pragma once

// Term normalization and post tokenization. Lexicon entries and post tokens
// go through the same normalize() so matching compares like with like.

#include <lexrefine/error.hpp>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lexrefine {

struct Token {
    std::string surface;  // normalized
    std::size_t start = 0;  // byte offsets into the raw text, [start, end)
    std::size_t end = 0;
    bool was_hashtag = false;

    bool operator==(const Token&) const = default;
};

namespace detail {

inline bool is_ascii(std::string_view s) {
    for (unsigned char c : s)
        if (c >= 0x80) return false;
    return true;
}

inline const icu::Normalizer2& nfkc() {
    static const icu::Normalizer2* instance = [] {
        UErrorCode status = U_ZERO_ERROR;
        const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
        if (U_FAILURE(status)) throw Error(Errc::unavailable, "ICU NFKC normalizer unavailable");
        return n;
    }();
    return *instance;
}

// NFKC followed by root-locale lower-casing.
inline std::string fold(std::string_view s) {
    if (is_ascii(s)) {
        std::string out(s);
        for (char& c : out)
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        return out;
    }
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString n = nfkc().normalize(u, status);
    if (U_FAILURE(status)) throw Error(Errc::parse, "normalization failed");
    n.toLower(icu::Locale::getRoot());
    std::string out;
    n.toUTF8String(out);
    return out;
}

// Decodes the code point at byte offset i; invalid sequences decode to a
// negative value and advance one byte.
inline UChar32 next_cp(std::string_view s, std::size_t& i) {
    int32_t pos = static_cast<int32_t>(i);
    UChar32 c;
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos, static_cast<int32_t>(s.size()), c);
    i = static_cast<std::size_t>(pos);
    return c;
}

inline bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

// Letters, numbers and (non-initial) combining marks form words. Emoji,
// symbols and punctuation separate them.
inline bool is_word_start(UChar32 c) {
    if (c < 0) return false;
    const int8_t t = u_charType(c);
    switch (t) {
        case U_UPPERCASE_LETTER:
        case U_LOWERCASE_LETTER:
        case U_TITLECASE_LETTER:
        case U_MODIFIER_LETTER:
        case U_OTHER_LETTER:
        case U_DECIMAL_DIGIT_NUMBER:
        case U_LETTER_NUMBER:
        case U_OTHER_NUMBER:
            return !u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) &&
                   !u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR);
        default:
            return false;
    }
}

inline bool is_word_continue(UChar32 c) {
    if (is_word_start(c)) return true;
    if (c < 0) return false;
    if (u_hasBinaryProperty(c, UCHAR_VARIATION_SELECTOR) || u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER))
        return false;
    const int8_t t = u_charType(c);
    return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK;
}

inline bool is_joiner(UChar32 c) {
    return c == U'\'' || c == U'’' || c == U'-' || c == U'‐' || c == U'‑';
}

}  // namespace detail

// NFKC, lower-case, collapse Unicode whitespace runs to one space, trim, and
// strip leading '#'.
inline std::string normalize(std::string_view raw) {
    const std::string folded = detail::fold(raw);
    std::string out;
    out.reserve(folded.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < folded.size()) {
        std::size_t start = i;
        UChar32 c = detail::next_cp(folded, i);
        if (detail::is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (out.empty() && c == U'#') continue;
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.append(folded, start, i - start);
    }
    return out;
}

// Splits on whitespace, punctuation, symbols and emoji. Apostrophes and
// hyphens between two word characters stay inside the token. A '#' directly
// before a word is dropped and flags the token as a hashtag.
inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    bool in_word = false;
    bool hashtag_pending = false;
    std::size_t word_start = 0;
    bool word_hashtag = false;

    auto close = [&](std::size_t end) {
        if (in_word && end > word_start) {
            Token t;
            t.start = word_start;
            t.end = end;
            t.was_hashtag = word_hashtag;
            t.surface = normalize(text.substr(word_start, end - word_start));
            if (!t.surface.empty()) tokens.push_back(std::move(t));
        }
        in_word = false;
    };

    while (i < text.size()) {
        const std::size_t here = i;
        const UChar32 c = detail::next_cp(text, i);
        if (in_word) {
            if (detail::is_word_continue(c)) continue;
            if (detail::is_joiner(c) && i < text.size()) {
                std::size_t peek = i;
                if (detail::is_word_start(detail::next_cp(text, peek))) continue;
            }
            close(here);
        }
        if (detail::is_word_start(c)) {
            in_word = true;
            word_start = here;
            word_hashtag = hashtag_pending;
            hashtag_pending = false;
            continue;
        }
        hashtag_pending = (c == U'#');
    }
    close(text.size());
    return tokens;
}

// Token surfaces of a normalized term, e.g. "st. john's wort" -> {st, john's, wort}.
inline std::vector<std::string> term_tokens(std::string_view term) {
    std::vector<std::string> out;
    for (auto& t : tokenize(term)) out.push_back(std::move(t.surface));
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out.push_back(' ');
        out += toks[i];
    }
    return out;
}

// Canonical matching key of a term: its tokens joined by single spaces.
inline std::string token_key(std::string_view term) { return join_tokens(term_tokens(term)); }

}  // namespace lexrefine
