#pragma once

// Survival-outcome reconstruction: probe the live web, fall back to the
// web archive's availability API for dead URLs, and apply the
// last-available-timestamp rule. Rows that are dead and unarchived are
// filtered out of the dataset.

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>

#include <httplib.h>
#include <json.hpp>

#include "linkrot/errors.hpp"
#include "linkrot/url.hpp"

namespace linkrot {

enum class ProbeStatus { alive, dead, network_error };

inline const char* to_string(ProbeStatus s) {
    switch (s) {
        case ProbeStatus::alive: return "alive";
        case ProbeStatus::dead: return "dead";
        case ProbeStatus::network_error: return "network_error";
    }
    return "?";
}

struct LiveProbe {
    std::string url;
    std::string probed_at;  // ISO-8601 UTC
    ProbeStatus status = ProbeStatus::network_error;
    std::optional<int> http_status;
};

struct ArchiveSnapshot {
    std::string url;
    std::string timestamp;  // 14-digit YYYYMMDDhhmmss as returned by the API
    int year = 0;
};

struct SurvivalOutcome {
    int last_available_year = 0;
    int alive_at_fetch = 0;
    double scaled_y = 0.0;                  // last_available_year - 1990
    std::optional<double> censor_bound_b;   // fetch_year - 1990 when alive
};

/// Row excluded: dead at origin and never archived.
struct Filtered {};

inline constexpr int kYearScaleBase = 1990;

struct ProbeConfig {
    std::set<int> success_statuses;  // empty => any 2xx
    double timeout_seconds = 15.0;
    std::string user_agent = "linkrot/1.0";
    std::string archive_endpoint = "https://archive.org";
    double archive_rate_per_sec = 1.0;
    double backoff_base_seconds = 1.0;
    double backoff_factor = 2.0;
    int max_tries = 5;
    // Fixed probe timestamp for reproducible runs; empty => system clock.
    std::string now_override;

    bool is_success(int status) const {
        if (success_statuses.empty()) return status >= 200 && status < 300;
        return success_statuses.count(status) > 0;
    }
};

inline std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Token bucket with a fixed refill rate; acquire() blocks until a token
/// is available. Shared by all archive requests in a process.
class RateLimiter {
public:
    explicit RateLimiter(double per_second) : interval_(per_second > 0 ? 1.0 / per_second : 0.0) {}

    void acquire() {
        if (interval_ <= 0.0) return;
        std::unique_lock lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        if (next_ > now) {
            const auto wait = next_ - now;
            next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(interval_));
            lock.unlock();
            std::this_thread::sleep_for(wait);
        } else {
            next_ = now + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(interval_));
        }
    }

private:
    std::mutex mu_;
    double interval_;
    std::chrono::steady_clock::time_point next_ = std::chrono::steady_clock::now();
};

namespace detail_net {

inline httplib::Client make_client(const UrlParts& parts, const ProbeConfig& cfg) {
    std::string base = parts.scheme + "://" + parts.host;
    if (parts.has_explicit_port) base += ":" + parts.port;
    httplib::Client cli(base);
    const auto secs = static_cast<time_t>(cfg.timeout_seconds);
    const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_follow_location(true);  // httplib caps redirect hops internally
    cli.set_default_headers({{"User-Agent", cfg.user_agent}});
    return cli;
}

inline std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

}  // namespace detail_net

/// One HTTP GET with redirect-following; DNS/transport failures map to
/// network_error rather than throwing (retryable, treated as dead-for-now).
inline LiveProbe check_live(const std::string& url, const ProbeConfig& cfg) {
    LiveProbe probe;
    probe.url = url;
    probe.probed_at = cfg.now_override.empty() ? utc_now_iso8601() : cfg.now_override;
    UrlParts parts = split_url(url);
    auto cli = detail_net::make_client(parts, cfg);
    std::string target = parts.path;
    if (!parts.query.empty()) target += "?" + parts.query;
    auto res = cli.Get(target);
    if (!res) {
        probe.status = ProbeStatus::network_error;
        return probe;
    }
    probe.http_status = res->status;
    probe.status = cfg.is_success(res->status) ? ProbeStatus::alive : ProbeStatus::dead;
    return probe;
}

/// Most recent capture of `url` per the archive's availability API;
/// std::nullopt when the archive has no capture.
inline std::optional<ArchiveSnapshot> query_last_snapshot(const std::string& url,
                                                          const ProbeConfig& cfg,
                                                          RateLimiter& limiter) {
    const UrlParts endpoint = split_url(cfg.archive_endpoint);
    const std::string target =
        "/wayback/available?url=" + detail_net::url_encode(url) + "&timestamp=99999999";

    std::string body;
    bool got = false;
    for (int attempt = 0; attempt < cfg.max_tries; ++attempt) {
        if (attempt > 0) {
            const double delay = cfg.backoff_base_seconds *
                                 std::pow(cfg.backoff_factor, static_cast<double>(attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        limiter.acquire();
        auto cli = detail_net::make_client(endpoint, cfg);
        auto res = cli.Get(target);
        if (res && res->status >= 200 && res->status < 300) {
            body = res->body;
            got = true;
            break;
        }
    }
    if (!got) throw ArchiveUnreachable("availability API unreachable for " + url);

    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedResponse("unparseable availability payload for " + url);
    }
    if (!j.contains("archived_snapshots")) {
        throw MalformedResponse("missing archived_snapshots for " + url);
    }
    const auto& snaps = j.at("archived_snapshots");
    if (!snaps.is_object() || !snaps.contains("closest")) return std::nullopt;
    const auto& closest = snaps.at("closest");
    if (closest.contains("available") && closest.at("available").is_boolean() &&
        !closest.at("available").get<bool>()) {
        return std::nullopt;
    }
    if (!closest.contains("timestamp")) throw MalformedResponse("closest missing timestamp");
    ArchiveSnapshot snap;
    snap.url = url;
    snap.timestamp = closest.at("timestamp").get<std::string>();
    if (snap.timestamp.size() < 4) throw MalformedResponse("bad timestamp " + snap.timestamp);
    try {
        snap.year = std::stoi(snap.timestamp.substr(0, 4));
    } catch (const std::exception&) {
        throw MalformedResponse("bad timestamp " + snap.timestamp);
    }
    return snap;
}

/// The last-available-timestamp rule: alive rows take the fetch year and
/// are right-censored there; dead rows take the archive year; dead and
/// unarchived rows are filtered.
inline std::variant<SurvivalOutcome, Filtered> resolve_outcome(
    const LiveProbe& probe, const std::optional<ArchiveSnapshot>& snapshot, int fetch_year) {
    if (probe.status == ProbeStatus::alive) {
        SurvivalOutcome o;
        o.last_available_year = fetch_year;
        o.alive_at_fetch = 1;
        o.scaled_y = static_cast<double>(fetch_year - kYearScaleBase);
        o.censor_bound_b = o.scaled_y;
        return o;
    }
    if (snapshot) {
        SurvivalOutcome o;
        o.last_available_year = std::min(snapshot->year, fetch_year);
        o.alive_at_fetch = 0;
        o.scaled_y = static_cast<double>(o.last_available_year - kYearScaleBase);
        return o;
    }
    return Filtered{};
}

}  // namespace linkrot
