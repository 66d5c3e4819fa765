#pragma once

// Design-matrix assembly: the fixed 42-column manifest (plus the optional
// scaled_first_appear column), standardization with mean-imputation of
// structurally missing values, correlations, folds and the lifespan
// histogram.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "linkrot/archive.hpp"
#include "linkrot/biblio.hpp"
#include "linkrot/errors.hpp"
#include "linkrot/html.hpp"
#include "linkrot/stats.hpp"
#include "linkrot/url.hpp"

namespace linkrot {

inline std::vector<std::string> feature_manifest(bool with_first_appear = false) {
    std::vector<std::string> m = {
        // URL information (1-14)
        "is_https", "path_depth", "has_www", "subdomain_level", "query_param_cnt",
        "suffix_org", "suffix_int", "suffix_jp", "suffix_gov", "suffix_in", "suffix_cn",
        "suffix_eu", "suffix_kr", "has_port",
        // HTML contents and technology (15-22)
        "html_size", "title_length", "internal_js_cnt", "external_js_cnt", "charset",
        "is_html5", "has_iframe", "hyperlink_cnt",
        // Article references (23-33)
        "total_num_of_paper_referencing", "num_of_author_referencing",
        "num_of_affiliation_referencing", "num_of_journal_referencing",
        "total_num_of_author_self_citation", "total_num_of_affiliation_self_citation",
        "total_num_of_journal_self_citation", "avg_year", "min_year", "max_year",
        "median_year",
        // Authors quantity (34-38)
        "num_of_author", "paper_unique_affiliation", "total_num_of_author_citing",
        "total_num_of_journal_citing", "total_num_of_affiliation_citing",
        // Authors' prestige/seniority/impact (39-42)
        "avg_hindex", "first_author_hindex", "last_author_hindex", "avg_mid_author_hindex"};
    if (with_first_appear) m.push_back("scaled_first_appear");
    return m;
}

inline constexpr std::size_t kBaseFeatureCount = 42;

/// Concatenate the three feature blocks in manifest order. Structural
/// absences (no reference years, no middle authors, unknown first-seen
/// year) become NaN and are mean-imputed at standardize time.
inline std::vector<double> assemble(const UrlFeatures& u, const PageFeatures& h,
                                    const BiblioFeatures& b, bool with_first_appear = false,
                                    std::optional<int> first_seen_year = std::nullopt) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> row = {
        static_cast<double>(u.is_https),
        static_cast<double>(u.path_depth),
        static_cast<double>(u.has_www),
        static_cast<double>(u.subdomain_level),
        static_cast<double>(u.query_param_count),
        static_cast<double>(u.suffix[0]), static_cast<double>(u.suffix[1]),
        static_cast<double>(u.suffix[2]), static_cast<double>(u.suffix[3]),
        static_cast<double>(u.suffix[4]), static_cast<double>(u.suffix[5]),
        static_cast<double>(u.suffix[6]), static_cast<double>(u.suffix[7]),
        static_cast<double>(u.has_explicit_port),
        static_cast<double>(h.html_size),
        static_cast<double>(h.title_length),
        static_cast<double>(h.internal_js_count),
        static_cast<double>(h.external_js_count),
        // One ordinal column: 0 none, 1 declared non-utf8, 2 declared utf-8.
        static_cast<double>(h.charset_declared + h.charset_is_utf8),
        static_cast<double>(h.is_html5),
        static_cast<double>(h.has_iframe),
        static_cast<double>(h.hyperlink_count),
        static_cast<double>(b.n_references),
        static_cast<double>(b.n_authors_referenced),
        static_cast<double>(b.n_affiliations_referenced),
        static_cast<double>(b.n_journals_referenced),
        static_cast<double>(b.n_author_self_refs),
        static_cast<double>(b.n_affiliation_self_refs),
        static_cast<double>(b.n_journal_self_refs),
        b.ref_years_absent ? nan : b.avg_ref_year,
        b.ref_years_absent ? nan : b.min_ref_year,
        b.ref_years_absent ? nan : b.max_ref_year,
        b.ref_years_absent ? nan : b.median_ref_year,
        static_cast<double>(b.n_authors),
        static_cast<double>(b.n_affiliations),
        static_cast<double>(b.total_authors_citing_dup),
        static_cast<double>(b.total_journals_citing_dup),
        static_cast<double>(b.total_affiliations_citing_dup),
        b.avg_hindex,
        b.first_author_hindex,
        b.last_author_hindex,
        b.mid_hindex_absent ? nan : b.avg_mid_author_hindex,
    };
    if (row.size() != kBaseFeatureCount) throw WidthMismatch("assemble produced wrong width");
    if (with_first_appear) {
        row.push_back(first_seen_year ? static_cast<double>(*first_seen_year - kYearScaleBase)
                                      : nan);
    }
    return row;
}

struct Dataset {
    std::vector<std::string> manifest;
    std::vector<std::vector<double>> x;  // row-major
    std::vector<SurvivalOutcome> outcomes;
    bool standardized = false;

    std::size_t n_rows() const { return x.size(); }
    std::size_t n_cols() const { return manifest.size(); }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c;
        c.reserve(x.size());
        for (const auto& row : x) c.push_back(row[j]);
        return c;
    }

    void add_row(std::vector<double> row, SurvivalOutcome outcome) {
        if (row.size() != manifest.size()) throw WidthMismatch("row width != manifest");
        x.push_back(std::move(row));
        outcomes.push_back(outcome);
    }
};

struct Standardization {
    std::vector<double> mean;  // also the imputation value for NaN cells
    std::vector<double> sd;    // 1.0 recorded for constant columns

    std::vector<double> apply(std::vector<double> row) const {
        if (row.size() != mean.size()) throw WidthMismatch("standardize width mismatch");
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double v = std::isnan(row[j]) ? mean[j] : row[j];
            row[j] = (v - mean[j]) / sd[j];
        }
        return row;
    }
};

/// Mean-impute NaN cells, then z-score every column (population sd).
/// Constant columns become all-zero with sd recorded as 1; their names are
/// returned in `warnings`.
inline std::pair<Dataset, Standardization> standardize(const Dataset& d,
                                                       std::vector<std::string>* warnings = nullptr) {
    if (d.n_rows() == 0) throw EmptyDataset();
    if (d.standardized) throw BadOptions("dataset already standardized");
    const std::size_t n = d.n_rows(), p = d.n_cols();
    Standardization s;
    s.mean.resize(p);
    s.sd.resize(p);
    Dataset out = d;
    out.standardized = true;
    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isnan(d.x[i][j])) {
                sum += d.x[i][j];
                ++cnt;
            }
        }
        const double m = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::isnan(d.x[i][j]) ? m : d.x[i][j];
            ss += (v - m) * (v - m);
        }
        double sd = std::sqrt(ss / static_cast<double>(n));
        if (sd <= 0.0) {
            sd = 1.0;
            if (warnings) warnings->push_back("constant column: " + d.manifest[j]);
        }
        s.mean[j] = m;
        s.sd[j] = sd;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::isnan(d.x[i][j]) ? m : d.x[i][j];
            out.x[i][j] = (v - m) / sd;
        }
    }
    return {std::move(out), std::move(s)};
}

struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<Correlation>> cells;  // symmetric, diag r=1
};

inline CorrelationMatrix correlation_matrix(const Dataset& d) {
    if (d.n_rows() < 3) throw TooFewRows();
    CorrelationMatrix m;
    m.names = d.manifest;
    const std::size_t p = d.n_cols();
    std::vector<std::vector<double>> cols(p);
    for (std::size_t j = 0; j < p; ++j) cols[j] = d.column(j);
    m.cells.assign(p, std::vector<Correlation>(p));
    for (std::size_t i = 0; i < p; ++i) {
        const bool const_i = stddev_n(cols[i]) == 0.0;
        m.cells[i][i] = const_i ? Correlation{0.0, 1.0, false} : Correlation{1.0, 0.0, true};
        for (std::size_t j = i + 1; j < p; ++j) {
            m.cells[i][j] = pearson(cols[i], cols[j]);
            m.cells[j][i] = m.cells[i][j];
        }
    }
    return m;
}

/// Disjoint index folds with sizes differing by at most one, shuffled
/// deterministically per seed.
inline std::vector<std::vector<std::size_t>> kfold(std::size_t n_rows, int k, std::uint64_t seed) {
    if (k < 2 || static_cast<std::size_t>(k) > n_rows) throw BadK();
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    const std::size_t base = n_rows / static_cast<std::size_t>(k);
    const std::size_t extra = n_rows % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                        idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return folds;
}

struct LifespanHistogram {
    std::map<int, std::size_t> counts;  // integer scaled_y bin -> count
    double mean_scaled_y = 0.0;
    std::size_t total = 0;
};

inline LifespanHistogram lifespan_histogram(const Dataset& d) {
    LifespanHistogram h;
    double sum = 0.0;
    for (const auto& o : d.outcomes) {
        ++h.counts[static_cast<int>(std::llround(o.scaled_y))];
        sum += o.scaled_y;
        ++h.total;
    }
    if (h.total > 0) h.mean_scaled_y = sum / static_cast<double>(h.total);
    return h;
}

// Features CSV ---------------------------------------------------------------
// header: <manifest...>,scaled_y,is_censored,censor_bound_b
// NaN cells and an absent censor bound serialize as empty fields.

inline void write_features_csv(std::ostream& os, const Dataset& d) {
    for (const auto& name : d.manifest) os << name << ',';
    os << "scaled_y,is_censored,censor_bound_b\n";
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        for (double v : d.x[i]) {
            if (!std::isnan(v)) os << format_double(v);
            os << ',';
        }
        const auto& o = d.outcomes[i];
        os << format_double(o.scaled_y) << ',' << (o.censor_bound_b ? 1 : 0) << ',';
        if (o.censor_bound_b) os << format_double(*o.censor_bound_b);
        os << '\n';
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline Dataset read_features_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty features CSV");
    auto header = split_csv_line(line);
    if (header.size() < 4) throw IoError("features CSV header too short");
    if (header[header.size() - 3] != "scaled_y" || header[header.size() - 2] != "is_censored" ||
        header.back() != "censor_bound_b") {
        throw IoError("features CSV must end with scaled_y,is_censored,censor_bound_b");
    }
    Dataset d;
    d.manifest.assign(header.begin(), header.end() - 3);
    const std::size_t p = d.manifest.size();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != p + 3) throw IoError("features CSV row width mismatch");
        std::vector<double> row(p);
        for (std::size_t j = 0; j < p; ++j) {
            row[j] = fields[j].empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : std::stod(fields[j]);
        }
        SurvivalOutcome o;
        o.scaled_y = std::stod(fields[p]);
        const bool censored = fields[p + 1] == "1";
        if (censored) {
            if (fields[p + 2].empty()) throw IoError("censored row missing censor_bound_b");
            o.censor_bound_b = std::stod(fields[p + 2]);
        }
        o.alive_at_fetch = censored ? 1 : 0;
        o.last_available_year = static_cast<int>(std::llround(o.scaled_y)) + kYearScaleBase;
        d.x.push_back(std::move(row));
        d.outcomes.push_back(o);
    }
    return d;
}

}  // namespace linkrot
