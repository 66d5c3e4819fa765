#pragma once

// URL decomposition and the URL-level feature block. Parsing is a pure
// string transform; no resolution or normalization beyond case-folding
// the scheme and host.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "linkrot/errors.hpp"

namespace linkrot {

struct UrlParts {
    std::string scheme;   // lowercased
    std::string host;     // lowercased, no port
    std::string port;     // digits as written, empty if absent
    std::string path;     // leading '/', possibly "/"
    std::string query;    // text after '?', without '#fragment'
    bool has_explicit_port = false;

    std::vector<std::string> host_labels() const {
        std::vector<std::string> labels;
        std::string cur;
        for (char c : host) {
            if (c == '.') {
                labels.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        labels.push_back(cur);
        return labels;
    }

    std::vector<std::string> path_segments() const {
        std::vector<std::string> segs;
        std::string cur;
        for (std::size_t i = 1; i < path.size(); ++i) {
            if (path[i] == '/') {
                if (!cur.empty()) segs.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(path[i]);
            }
        }
        if (!cur.empty()) segs.push_back(cur);
        return segs;
    }

    int query_param_count() const {
        if (query.empty()) return 0;
        int n = 0;
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) ++n;
            cur.clear();
        };
        for (char c : query) {
            if (c == '&' || c == ';') {
                flush();
            } else {
                cur.push_back(c);
            }
        }
        flush();
        return n;
    }
};

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Split an absolute URI into parts. Throws MalformedUrl when there is no
/// scheme/host structure to recover.
inline UrlParts split_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos || scheme_end == 0) {
        throw MalformedUrl("no scheme in: " + std::string(url));
    }
    UrlParts p;
    p.scheme = to_lower(url.substr(0, scheme_end));
    for (char c : p.scheme) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
            throw MalformedUrl("bad scheme in: " + std::string(url));
        }
    }
    std::string_view rest = url.substr(scheme_end + 3);

    const auto frag = rest.find('#');
    if (frag != std::string_view::npos) rest = rest.substr(0, frag);

    auto authority_end = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, authority_end);
    std::string_view tail =
        authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

    // userinfo@ is rare in citation URLs but legal
    const auto at = authority.rfind('@');
    if (at != std::string_view::npos) authority = authority.substr(at + 1);

    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        std::string_view port = authority.substr(colon + 1);
        if (port.empty() || !std::all_of(port.begin(), port.end(), [](unsigned char c) {
                return std::isdigit(c);
            })) {
            throw MalformedUrl("bad port in: " + std::string(url));
        }
        p.port = std::string(port);
        p.has_explicit_port = true;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw MalformedUrl("no host in: " + std::string(url));
    p.host = to_lower(authority);

    if (tail.empty() || tail.front() == '?') {
        p.path = "/";
        if (!tail.empty()) p.query = std::string(tail.substr(1));
    } else {
        const auto q = tail.find('?');
        p.path = std::string(tail.substr(0, q));
        if (q != std::string_view::npos) p.query = std::string(tail.substr(q + 1));
    }
    return p;
}

// Suffix flags tracked from prior link-rot work, in manifest order.
inline constexpr std::array<std::string_view, 8> kSuffixLabels = {
    "org", "int", "jp", "gov", "in", "cn", "eu", "kr"};

struct UrlFeatures {
    int is_https = 0;
    int path_depth = 0;
    int has_www = 0;
    int subdomain_level = 0;
    int query_param_count = 0;
    std::array<int, 8> suffix = {};  // order of kSuffixLabels
    int has_explicit_port = 0;
};

/// Table-driven URL feature block. FTP (and every non-http) scheme is
/// rejected up front with FilteredScheme.
inline UrlFeatures parse_url_features(std::string_view url) {
    const UrlParts p = split_url(url);
    if (p.scheme != "http" && p.scheme != "https") {
        throw FilteredScheme("scheme '" + p.scheme + "' excluded: " + std::string(url));
    }
    UrlFeatures f;
    f.is_https = p.scheme == "https" ? 1 : 0;
    f.path_depth = static_cast<int>(p.path_segments().size());
    f.query_param_count = p.query_param_count();
    f.has_explicit_port = p.has_explicit_port ? 1 : 0;

    const auto labels = p.host_labels();
    f.has_www = (!labels.empty() && labels.front() == "www") ? 1 : 0;
    // Registered domain approximated as the last two labels.
    f.subdomain_level = std::max(0, static_cast<int>(labels.size()) - 2);
    const std::string& last = labels.back();
    for (std::size_t i = 0; i < kSuffixLabels.size(); ++i) {
        if (last == kSuffixLabels[i]) {
            f.suffix[i] = 1;
            break;
        }
    }
    return f;
}

}  // namespace linkrot
