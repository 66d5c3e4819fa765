#pragma once

// Bibliometric feature block: reference counts, self-citation counts,
// reference-year statistics and author h-index summaries computed from
// publication metadata records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkrot/errors.hpp"
#include "linkrot/stats.hpp"

namespace linkrot {

struct Reference {
    std::string paper_id;
    std::optional<int> year;
    std::vector<std::string> author_ids;
    std::vector<std::string> affiliation_ids;
    std::optional<std::string> journal_id;
};

struct PublicationRecord {
    std::string paper_id;
    int year = 0;
    std::optional<std::string> journal_id;
    std::vector<std::string> author_ids;  // ordered: first..last
    std::vector<std::string> affiliation_ids;
    std::vector<Reference> references;
    // Per-author citation counts of each of the author's papers, when the
    // ingest supplies them. Otherwise h-indices come from an external map.
    std::map<std::string, std::vector<int>> author_citations;
};

struct BiblioFeatures {
    int n_references = 0;
    int n_authors_referenced = 0;      // distinct
    int n_affiliations_referenced = 0; // distinct
    int n_journals_referenced = 0;     // distinct
    int n_author_self_refs = 0;
    int n_affiliation_self_refs = 0;
    int n_journal_self_refs = 0;
    double avg_ref_year = std::numeric_limits<double>::quiet_NaN();
    double min_ref_year = std::numeric_limits<double>::quiet_NaN();
    double max_ref_year = std::numeric_limits<double>::quiet_NaN();
    double median_ref_year = std::numeric_limits<double>::quiet_NaN();
    int n_authors = 0;
    int n_affiliations = 0;            // distinct affiliations of the paper itself
    long long total_authors_citing_dup = 0;
    long long total_journals_citing_dup = 0;
    long long total_affiliations_citing_dup = 0;
    double avg_hindex = 0.0;
    double first_author_hindex = 0.0;
    double last_author_hindex = 0.0;
    double avg_mid_author_hindex = 0.0;
    bool mid_hindex_absent = false;    // <= 2 authors: no middle authors exist
    bool ref_years_absent = false;     // no reference carries a year
    bool has_future_refs = false;      // some reference year > publication year
};

/// Largest h with at least h entries >= h.
inline int h_index(const std::vector<int>& citation_counts) {
    std::vector<int> sorted = citation_counts;
    std::sort(sorted.begin(), sorted.end(), std::greater<int>());
    int h = 0;
    while (h < static_cast<int>(sorted.size()) && sorted[h] >= h + 1) ++h;
    return h;
}

inline BiblioFeatures compute_biblio_features(
    const PublicationRecord& pub,
    const std::map<std::string, int>* precomputed_hindex = nullptr) {
    if (pub.paper_id.empty()) throw MissingField("paper_id");
    if (pub.year == 0) throw MissingField("year");

    BiblioFeatures f;
    f.n_references = static_cast<int>(pub.references.size());
    f.n_authors = static_cast<int>(pub.author_ids.size());
    f.n_affiliations =
        static_cast<int>(std::set<std::string>(pub.affiliation_ids.begin(),
                                               pub.affiliation_ids.end()).size());

    const std::set<std::string> own_authors(pub.author_ids.begin(), pub.author_ids.end());
    const std::set<std::string> own_affils(pub.affiliation_ids.begin(), pub.affiliation_ids.end());

    std::set<std::string> ref_authors, ref_affils, ref_journals;
    std::vector<double> years;
    for (const Reference& r : pub.references) {
        for (const auto& a : r.author_ids) ref_authors.insert(a);
        for (const auto& a : r.affiliation_ids) ref_affils.insert(a);
        if (r.journal_id) ref_journals.insert(*r.journal_id);

        const bool shares_author = std::any_of(
            r.author_ids.begin(), r.author_ids.end(),
            [&](const std::string& a) { return own_authors.count(a) > 0; });
        const bool shares_affil = std::any_of(
            r.affiliation_ids.begin(), r.affiliation_ids.end(),
            [&](const std::string& a) { return own_affils.count(a) > 0; });
        if (shares_author) ++f.n_author_self_refs;
        if (shares_affil) ++f.n_affiliation_self_refs;
        if (r.journal_id && pub.journal_id && *r.journal_id == *pub.journal_id) {
            ++f.n_journal_self_refs;
        }

        f.total_authors_citing_dup += static_cast<long long>(r.author_ids.size());
        f.total_affiliations_citing_dup += static_cast<long long>(r.affiliation_ids.size());
        if (r.journal_id) ++f.total_journals_citing_dup;

        if (r.year) {
            years.push_back(static_cast<double>(*r.year));
            if (*r.year > pub.year) f.has_future_refs = true;
        }
    }
    f.n_authors_referenced = static_cast<int>(ref_authors.size());
    f.n_affiliations_referenced = static_cast<int>(ref_affils.size());
    f.n_journals_referenced = static_cast<int>(ref_journals.size());

    if (years.empty()) {
        f.ref_years_absent = true;
    } else {
        f.avg_ref_year = mean(years);
        f.min_ref_year = *std::min_element(years.begin(), years.end());
        f.max_ref_year = *std::max_element(years.begin(), years.end());
        f.median_ref_year = median_of(years);
    }

    auto hindex_of = [&](const std::string& author) -> double {
        if (auto it = pub.author_citations.find(author); it != pub.author_citations.end()) {
            return static_cast<double>(h_index(it->second));
        }
        if (precomputed_hindex) {
            if (auto it = precomputed_hindex->find(author); it != precomputed_hindex->end()) {
                return static_cast<double>(it->second);
            }
        }
        return 0.0;
    };

    if (!pub.author_ids.empty()) {
        std::vector<double> hs;
        hs.reserve(pub.author_ids.size());
        for (const auto& a : pub.author_ids) hs.push_back(hindex_of(a));
        f.avg_hindex = mean(hs);
        f.first_author_hindex = hs.front();
        f.last_author_hindex = hs.back();
        if (hs.size() > 2) {
            std::vector<double> mid(hs.begin() + 1, hs.end() - 1);
            f.avg_mid_author_hindex = mean(mid);
        } else {
            f.mid_hindex_absent = true;
        }
    } else {
        f.mid_hindex_absent = true;
    }
    return f;
}

// JSONL ingestion -----------------------------------------------------------

inline PublicationRecord publication_from_json(const nlohmann::json& j) {
    auto require = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw MissingField(key);
        return j.at(key);
    };
    PublicationRecord p;
    p.paper_id = require("paper_id").get<std::string>();
    p.year = require("year").get<int>();
    if (j.contains("journal_id") && !j.at("journal_id").is_null()) {
        p.journal_id = j.at("journal_id").get<std::string>();
    }
    if (j.contains("author_ids")) p.author_ids = j.at("author_ids").get<std::vector<std::string>>();
    if (j.contains("affiliation_ids")) {
        p.affiliation_ids = j.at("affiliation_ids").get<std::vector<std::string>>();
    }
    if (j.contains("references")) {
        for (const auto& rj : j.at("references")) {
            Reference r;
            if (rj.contains("paper_id")) r.paper_id = rj.at("paper_id").get<std::string>();
            if (rj.contains("year") && !rj.at("year").is_null()) r.year = rj.at("year").get<int>();
            if (rj.contains("author_ids")) {
                r.author_ids = rj.at("author_ids").get<std::vector<std::string>>();
            }
            if (rj.contains("affiliation_ids")) {
                r.affiliation_ids = rj.at("affiliation_ids").get<std::vector<std::string>>();
            }
            if (rj.contains("journal_id") && !rj.at("journal_id").is_null()) {
                r.journal_id = rj.at("journal_id").get<std::string>();
            }
            p.references.push_back(std::move(r));
        }
    }
    if (j.contains("author_citations")) {
        for (auto it = j.at("author_citations").begin(); it != j.at("author_citations").end();
             ++it) {
            p.author_citations[it.key()] = it.value().get<std::vector<int>>();
        }
    }
    return p;
}

}  // namespace linkrot
