#include "destigma/text.hpp"

#include <cctype>

namespace destigma::text {

char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t i) -> char32_t {
        return pos + i < s.size() ? static_cast<unsigned char>(s[pos + i]) & 0x3F : 0;
    };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 >> 5) == 0x6 && pos + 1 < s.size()) {
        len = 2;
        return (char32_t(b0 & 0x1F) << 6) | cont(1);
    }
    if ((b0 >> 4) == 0xE && pos + 2 < s.size()) {
        len = 3;
        return (char32_t(b0 & 0x0F) << 12) | (cont(1) << 6) | cont(2);
    }
    if ((b0 >> 3) == 0x1E && pos + 3 < s.size()) {
        len = 4;
        return (char32_t(b0 & 0x07) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
    }
    len = 1;
    return 0xFFFD;
}

namespace {

bool is_unicode_space(char32_t cp) noexcept {
    switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

}  // namespace

std::size_t whitespace_len(std::string_view s, std::size_t pos) noexcept {
    std::size_t len = 0;
    const char32_t cp = decode_utf8(s, pos, len);
    return is_unicode_space(cp) ? len : 0;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::string current;
    std::size_t i = 0;
    while (i < s.size()) {
        if (const auto ws = whitespace_len(s, i); ws > 0) {
            if (!current.empty()) {
                out.push_back(std::move(current));
                current.clear();
            }
            i += ws;
            continue;
        }
        current.push_back(s[i]);
        ++i;
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::size_t count_words(std::string_view s) {
    std::size_t count = 0;
    bool in_word = false;
    std::size_t i = 0;
    while (i < s.size()) {
        if (const auto ws = whitespace_len(s, i); ws > 0) {
            in_word = false;
            i += ws;
            continue;
        }
        if (!in_word) {
            ++count;
            in_word = true;
        }
        ++i;
    }
    return count;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < s.size()) {
        if (const auto ws = whitespace_len(s, i); ws > 0) {
            pending_space = !out.empty();
            i += ws;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    while (begin < s.size()) {
        const auto ws = whitespace_len(s, begin);
        if (ws == 0) {
            break;
        }
        begin += ws;
    }
    std::size_t end = s.size();
    while (end > begin) {
        // Walk back to the start of the last code point.
        std::size_t start = end - 1;
        while (start > begin && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) {
            --start;
        }
        if (whitespace_len(s, start) == 0) {
            break;
        }
        end = start;
    }
    return std::string(s.substr(begin, end - begin));
}

bool starts_with_ci(std::string_view s, std::string_view prefix) noexcept {
    if (s.size() < prefix.size()) {
        return false;
    }
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out.append(sep);
        }
        out.append(parts[i]);
    }
    return out;
}

}  // namespace destigma::text
