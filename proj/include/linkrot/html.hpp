#pragma once

// Best-effort HTML feature extraction. This is a tag scanner, not a DOM:
// it tolerates unclosed tags, junk attributes, and truncated documents,
// and never throws on bad markup.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linkrot/url.hpp"

namespace linkrot {

struct PageFeatures {
    long long html_size = 0;
    int title_length = 0;
    int internal_js_count = 0;
    int external_js_count = 0;
    int charset_declared = 0;
    int charset_is_utf8 = 0;
    int is_html5 = 0;
    int has_iframe = 0;
    int hyperlink_count = 0;
};

namespace detail_html {

struct Tag {
    std::string name;  // lowercased, without '/'
    bool closing = false;
    std::vector<std::pair<std::string, std::string>> attrs;  // names lowercased

    std::optional<std::string> attr(std::string_view key) const {
        for (const auto& [k, v] : attrs) {
            if (k == key) return v;
        }
        return std::nullopt;
    }
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Parses the tag starting at pos (html[pos] == '<'). Returns the tag and
// the index one past its '>' (or end of input if unterminated).
inline std::pair<std::optional<Tag>, std::size_t> scan_tag(std::string_view html, std::size_t pos) {
    std::size_t i = pos + 1;
    if (i >= html.size()) return {std::nullopt, html.size()};
    Tag tag;
    if (html[i] == '/') {
        tag.closing = true;
        ++i;
    }
    if (i >= html.size() || !std::isalpha(static_cast<unsigned char>(html[i]))) {
        return {std::nullopt, i};
    }
    while (i < html.size() && (std::isalnum(static_cast<unsigned char>(html[i])) ||
                               html[i] == '-' || html[i] == ':')) {
        tag.name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(html[i]))));
        ++i;
    }
    // attributes
    while (i < html.size() && html[i] != '>') {
        if (std::isspace(static_cast<unsigned char>(html[i])) || html[i] == '/') {
            ++i;
            continue;
        }
        std::string key;
        while (i < html.size() && html[i] != '=' && html[i] != '>' && html[i] != '/' &&
               !std::isspace(static_cast<unsigned char>(html[i]))) {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(html[i]))));
            ++i;
        }
        std::string val;
        while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
        if (i < html.size() && html[i] == '=') {
            ++i;
            while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
            if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
                const char quote = html[i++];
                while (i < html.size() && html[i] != quote) val.push_back(html[i++]);
                if (i < html.size()) ++i;
            } else {
                while (i < html.size() && html[i] != '>' &&
                       !std::isspace(static_cast<unsigned char>(html[i]))) {
                    val.push_back(html[i++]);
                }
            }
        }
        if (!key.empty()) tag.attrs.emplace_back(std::move(key), std::move(val));
    }
    if (i < html.size()) ++i;  // consume '>'
    return {tag, i};
}

inline std::size_t find_ci(std::string_view hay, std::string_view needle_lower, std::size_t from) {
    if (needle_lower.empty()) return from;
    for (std::size_t i = from; i + needle_lower.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < needle_lower.size(); ++j) {
            if (std::tolower(static_cast<unsigned char>(hay[i + j])) != needle_lower[j]) {
                ok = false;
                break;
            }
        }
        if (ok) return i;
    }
    return std::string_view::npos;
}

// "<!DOCTYPE html>" modulo case and whitespace, with nothing else inside.
inline bool doctype_is_html5(std::string_view decl) {
    std::string norm;
    for (char c : decl) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!norm.empty() && norm.back() != ' ') norm.push_back(' ');
        } else {
            norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    while (!norm.empty() && norm.back() == ' ') norm.pop_back();
    return norm == "!doctype html";
}

inline std::optional<std::string> charset_from_content_type(std::string_view content) {
    const auto pos = find_ci(content, "charset=", 0);
    if (pos == std::string_view::npos) return std::nullopt;
    std::string cs;
    for (std::size_t i = pos + 8; i < content.size(); ++i) {
        char c = content[i];
        if (c == ';' || c == '"' || c == '\'' || std::isspace(static_cast<unsigned char>(c))) break;
        cs.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (cs.empty()) return std::nullopt;
    return cs;
}

inline bool is_relative_src(std::string_view src) {
    return src.find("://") == std::string_view::npos && src.substr(0, 2) != "//";
}

inline std::optional<std::string> src_host(std::string_view src, const UrlParts& page) {
    if (src.substr(0, 2) == "//") {
        // scheme-relative
        try {
            return split_url(std::string(page.scheme) + ":" + std::string(src)).host;
        } catch (const MalformedUrl&) {
            return std::nullopt;
        }
    }
    try {
        return split_url(src).host;
    } catch (const MalformedUrl&) {
        return std::nullopt;
    }
}

}  // namespace detail_html

/// Extract the HTML-technology feature block. page_url must be a valid
/// http(s) URL; it anchors the internal/external script decision.
inline PageFeatures extract_page_features(std::string_view html, std::string_view page_url) {
    const UrlParts page = split_url(page_url);
    if (page.scheme != "http" && page.scheme != "https") {
        throw FilteredScheme("scheme '" + page.scheme + "' excluded: " + std::string(page_url));
    }

    PageFeatures f;
    f.html_size = static_cast<long long>(html.size());

    bool title_seen = false;
    bool charset_seen = false;

    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            ++i;
            continue;
        }
        // comments
        if (html.substr(i, 4) == "<!--") {
            const auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        // declarations: <!DOCTYPE ...>
        if (i + 1 < html.size() && html[i + 1] == '!') {
            const auto end = html.find('>', i);
            if (end == std::string_view::npos) break;
            if (detail_html::doctype_is_html5(html.substr(i + 1, end - i - 1))) f.is_html5 = 1;
            i = end + 1;
            continue;
        }
        auto [tag, next] = detail_html::scan_tag(html, i);
        if (!tag) {
            i = next > i ? next : i + 1;
            continue;
        }
        i = next;
        if (tag->closing) continue;

        if (tag->name == "title" && !title_seen) {
            const auto close = detail_html::find_ci(html, "</title", i);
            const auto text = html.substr(i, close == std::string_view::npos ? html.size() - i
                                                                             : close - i);
            f.title_length = static_cast<int>(detail_html::trim(text).size());
            title_seen = true;
        } else if (tag->name == "script") {
            if (auto src = tag->attr("src"); src && !src->empty()) {
                if (detail_html::is_relative_src(*src)) {
                    ++f.internal_js_count;
                } else {
                    auto host = detail_html::src_host(*src, page);
                    if (host && *host == page.host) {
                        ++f.internal_js_count;
                    } else {
                        ++f.external_js_count;
                    }
                }
            }
            // skip script body so embedded '<' noise is not re-tokenized
            const auto close = detail_html::find_ci(html, "</script", i);
            i = close == std::string_view::npos ? html.size() : close;
        } else if (tag->name == "iframe") {
            f.has_iframe = 1;
        } else if (tag->name == "a") {
            if (tag->attr("href")) ++f.hyperlink_count;
        } else if (tag->name == "meta" && !charset_seen) {
            std::optional<std::string> cs;
            if (auto direct = tag->attr("charset"); direct && !direct->empty()) {
                cs = to_lower(*direct);
            } else if (auto equiv = tag->attr("http-equiv");
                       equiv && to_lower(*equiv) == "content-type") {
                if (auto content = tag->attr("content")) {
                    cs = detail_html::charset_from_content_type(*content);
                }
            }
            if (cs) {
                charset_seen = true;
                f.charset_declared = 1;
                f.charset_is_utf8 = (*cs == "utf-8" || *cs == "utf8") ? 1 : 0;
            }
        }
    }
    return f;
}

}  // namespace linkrot
