#include "chatagri/text.hpp"

#include <algorithm>

namespace chatagri::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

}  // namespace

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    size_t i = 0;
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
    while (i < s.size()) {
        const unsigned char b0 = byte(i);
        size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (size_t k = 1; k < len; ++k) {
            const unsigned char b = byte(i + k);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        // Reject overlong forms, surrogates and out-of-range values.
        if (ok) {
            if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
                (cp >= 0xD800 && cp <= 0xDFFF)) {
                ok = false;
            }
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            cp = kReplacement;
        }
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
    return out;
}

char32_t fold_char(char32_t c) {
    if (c >= U'A' && c <= U'Z') {
        return c + 0x20;
    }
    // Latin-1 supplement: À..Þ -> à..þ, except × (0xD7).
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
        return c + 0x20;
    }
    // Latin Extended-A comes mostly in upper/lower pairs.
    if (c >= 0x100 && c <= 0x137) {
        return (c % 2 == 0) ? c + 1 : c;
    }
    if (c >= 0x139 && c <= 0x148) {
        return (c % 2 == 1) ? c + 1 : c;
    }
    if (c >= 0x14A && c <= 0x177) {
        return (c % 2 == 0) ? c + 1 : c;
    }
    if (c == 0x178) {
        return 0xFF;  // Ÿ -> ÿ
    }
    if (c >= 0x179 && c <= 0x17E) {
        return (c % 2 == 1) ? c + 1 : c;
    }
    return c;
}

std::u32string fold_case(std::u32string_view s) {
    std::u32string out(s);
    std::transform(out.begin(), out.end(), out.begin(), fold_char);
    return out;
}

bool is_space(char32_t c) {
    switch (c) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case U'\f':
        case U'\v':
        case 0x00A0:  // no-break space
        case 0x3000:  // ideographic space
            return true;
        default:
            return false;
    }
}

bool is_word_char(char32_t c) {
    // ASCII letters and digits only: non-ASCII characters act as boundaries
    // themselves, which lets CJK labels match inside unsegmented prose.
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') ||
           (c >= U'0' && c <= U'9');
}

std::u32string trim(std::u32string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    return std::u32string(s.substr(b, e - b));
}

std::u32string collapse_whitespace(std::u32string_view s) {
    std::u32string out;
    out.reserve(s.size());
    bool in_run = false;
    for (char32_t c : s) {
        if (is_space(c)) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) {
            out.push_back(U' ');
        }
        in_run = false;
        out.push_back(c);
    }
    return out;
}

std::string normalize_label(std::string_view s) {
    return encode_utf8(collapse_whitespace(trim(fold_case(decode_utf8(s)))));
}

namespace {

bool is_terminal_punct(char32_t c) {
    switch (c) {
        case U'.':
        case U',':
        case U';':
        case U':':
        case U'!':
        case U'?':
        case U'"':
        case U'\'':
        case 0x3002:  // 。
        case 0xFF01:  // ！
        case 0xFF0C:  // ，
        case 0xFF1A:  // ：
        case 0xFF1B:  // ；
        case 0xFF1F:  // ？
        case 0x201C:
        case 0x201D:
        case 0x2018:
        case 0x2019:
            return true;
        default:
            return false;
    }
}

}  // namespace

std::string normalize_answer(std::string_view s) {
    std::u32string u = collapse_whitespace(trim(fold_case(decode_utf8(s))));
    while (!u.empty() && is_terminal_punct(u.back())) {
        u.pop_back();
        while (!u.empty() && is_space(u.back())) {
            u.pop_back();
        }
    }
    return encode_utf8(u);
}

std::string trim_copy(std::string_view s) {
    return encode_utf8(trim(decode_utf8(s)));
}

}  // namespace chatagri::text
