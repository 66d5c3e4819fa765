// linkrot: batch pipeline for predicting the longevity of web resources
// cited in publications. Subcommands cover probing, feature extraction,
// model fitting, explanation and CSV reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "linkrot/archive.hpp"
#include "linkrot/biblio.hpp"
#include "linkrot/dataset.hpp"
#include "linkrot/forest.hpp"
#include "linkrot/html.hpp"
#include "linkrot/shap.hpp"
#include "linkrot/stats.hpp"
#include "linkrot/tobit.hpp"
#include "linkrot/url.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// All outputs go through a temp-file + rename so a failing run never
// leaves a partial artifact behind.
void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw linkrot::IoError("cannot write " + tmp.string());
        os << content;
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw linkrot::IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_run_manifest(const fs::path& path, const std::string& subcommand, const json& config) {
    json manifest{{"tool", "linkrot"},
                  {"version", kVersion},
                  {"subcommand", subcommand},
                  {"config", config}};
    atomic_write(path, manifest.dump(2) + "\n");
}

struct UrlRow {
    std::string doc_id;
    std::string url;
    std::optional<int> first_seen_year;
};

std::vector<UrlRow> read_url_list(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw linkrot::IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw linkrot::IoError("empty URL list " + path.string());
    auto header = linkrot::split_csv_line(line);
    if (header.size() < 2 || header[0] != "doc_id" || header[1] != "url") {
        throw linkrot::IoError("URL list header must start with doc_id,url");
    }
    std::vector<UrlRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = linkrot::split_csv_line(line);
        if (f.size() < 2) throw linkrot::IoError("bad URL list row: " + line);
        UrlRow r;
        r.doc_id = f[0];
        r.url = f[1];
        if (f.size() > 2 && !f[2].empty()) r.first_seen_year = std::stoi(f[2]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::set<int> parse_status_set(const std::string& csv) {
    std::set<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.insert(std::stoi(tok));
    }
    return out;
}

// probe ---------------------------------------------------------------------

int cmd_probe(const fs::path& urls_path, const fs::path& out_path, int fetch_year,
              linkrot::ProbeConfig cfg) {
    const auto rows = read_url_list(urls_path);
    linkrot::RateLimiter limiter(cfg.archive_rate_per_sec);
    std::ostringstream out;
    for (const auto& row : rows) {
        json rec{{"doc_id", row.doc_id}, {"url", row.url}};
        try {
            linkrot::parse_url_features(row.url);
        } catch (const linkrot::FilteredScheme&) {
            rec["filtered"] = true;
            rec["reason"] = "scheme";
            out << rec.dump() << '\n';
            continue;
        } catch (const linkrot::MalformedUrl&) {
            rec["filtered"] = true;
            rec["reason"] = "malformed";
            out << rec.dump() << '\n';
            continue;
        }
        const linkrot::LiveProbe probe = linkrot::check_live(row.url, cfg);
        rec["probed_at"] = probe.probed_at;
        rec["status"] = linkrot::to_string(probe.status);
        if (probe.http_status) rec["http_status"] = *probe.http_status;
        std::optional<linkrot::ArchiveSnapshot> snapshot;
        if (probe.status != linkrot::ProbeStatus::alive) {
            snapshot = linkrot::query_last_snapshot(row.url, cfg, limiter);
            if (snapshot) rec["snapshot_ts"] = snapshot->timestamp;
        }
        const auto outcome = linkrot::resolve_outcome(probe, snapshot, fetch_year);
        if (std::holds_alternative<linkrot::Filtered>(outcome)) {
            rec["filtered"] = true;
            rec["reason"] = "dead_unarchived";
        } else {
            const auto& o = std::get<linkrot::SurvivalOutcome>(outcome);
            rec["filtered"] = false;
            rec["last_available_year"] = o.last_available_year;
            rec["alive_at_fetch"] = o.alive_at_fetch;
            rec["scaled_y"] = o.scaled_y;
            if (o.censor_bound_b) rec["censor_bound_b"] = *o.censor_bound_b;
        }
        out << rec.dump() << '\n';
    }
    atomic_write(out_path, out.str());
    return 0;
}

// extract -------------------------------------------------------------------

int cmd_extract(const fs::path& urls_path, const fs::path& html_dir, const fs::path& meta_path,
                const fs::path& outcomes_path, const fs::path& hindex_path,
                const fs::path& out_path, bool with_first_appear) {
    const auto rows = read_url_list(urls_path);

    std::map<std::string, linkrot::PublicationRecord> meta;
    {
        std::ifstream is(meta_path);
        if (!is) throw linkrot::IoError("cannot read " + meta_path.string());
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            auto rec = linkrot::publication_from_json(json::parse(line));
            meta[rec.paper_id] = std::move(rec);
        }
    }

    std::map<std::string, int> hindex;
    const std::map<std::string, int>* hindex_ptr = nullptr;
    if (!hindex_path.empty()) {
        const json j = json::parse(read_file(hindex_path));
        for (auto it = j.begin(); it != j.end(); ++it) hindex[it.key()] = it.value().get<int>();
        hindex_ptr = &hindex;
    }

    std::map<std::string, json> outcomes;
    {
        std::ifstream is(outcomes_path);
        if (!is) throw linkrot::IoError("cannot read " + outcomes_path.string());
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            const std::string id = j.at("doc_id").get<std::string>();
            outcomes[id] = std::move(j);
        }
    }

    linkrot::Dataset d;
    d.manifest = linkrot::feature_manifest(with_first_appear);
    std::size_t skipped = 0;
    for (const auto& row : rows) {
        auto oit = outcomes.find(row.doc_id);
        if (oit == outcomes.end() || oit->second.value("filtered", true)) {
            ++skipped;
            continue;
        }
        linkrot::UrlFeatures uf;
        try {
            uf = linkrot::parse_url_features(row.url);
        } catch (const linkrot::FilteredScheme&) {
            ++skipped;
            continue;
        }
        std::string html;
        const fs::path html_path = html_dir / (row.doc_id + ".html");
        if (fs::exists(html_path)) {
            html = read_file(html_path);
        } else {
            std::cerr << "warning: no cached HTML for " << row.doc_id
                      << ", extracting from empty document\n";
        }
        const linkrot::PageFeatures pf = linkrot::extract_page_features(html, row.url);
        auto mit = meta.find(row.doc_id);
        if (mit == meta.end()) {
            throw linkrot::MissingField("metadata record for doc_id " + row.doc_id);
        }
        const linkrot::BiblioFeatures bf =
            linkrot::compute_biblio_features(mit->second, hindex_ptr);

        linkrot::SurvivalOutcome o;
        const json& oj = oit->second;
        o.last_available_year = oj.at("last_available_year").get<int>();
        o.alive_at_fetch = oj.at("alive_at_fetch").get<int>();
        o.scaled_y = oj.at("scaled_y").get<double>();
        if (oj.contains("censor_bound_b")) o.censor_bound_b = oj.at("censor_bound_b").get<double>();
        d.add_row(linkrot::assemble(uf, pf, bf, with_first_appear, row.first_seen_year), o);
    }
    if (skipped > 0) std::cerr << "note: " << skipped << " rows filtered\n";

    std::ostringstream os;
    linkrot::write_features_csv(os, d);
    atomic_write(out_path, os.str());
    return 0;
}

// fit/explain/report helpers ------------------------------------------------

linkrot::Dataset load_features(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw linkrot::IoError("cannot read " + path.string());
    return linkrot::read_features_csv(is);
}

std::string coefficient_report(const linkrot::TobitModel& m) {
    std::vector<std::size_t> order(m.manifest.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(m.fit.beta[a]) > std::fabs(m.fit.beta[b]);
    });
    std::ostringstream os;
    os << "feature,beta,abs_rank\n";
    std::vector<std::size_t> rank(m.manifest.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
    for (std::size_t j = 0; j < m.manifest.size(); ++j) {
        os << m.manifest[j] << ',' << linkrot::format_double(m.fit.beta[j]) << ',' << rank[j]
           << '\n';
    }
    return os.str();
}

int cmd_fit_tobit(const fs::path& features, double lambda, double alpha, int cv_k,
                  std::uint64_t seed, int bootstrap_b, const fs::path& out) {
    const linkrot::Dataset d = load_features(features);
    auto [std_data, standardization] = linkrot::standardize(d);
    const auto obs = linkrot::observations_from_dataset(std_data);
    if (cv_k > 0) {
        lambda = linkrot::cv_select_lambda(obs, alpha, cv_k, seed);
        std::cerr << "cv-selected lambda = " << linkrot::format_double(lambda) << '\n';
    }
    linkrot::TobitModel model;
    model.manifest = d.manifest;
    model.standardization = standardization;
    model.fit = linkrot::fit_map(obs, lambda, alpha);
    atomic_write(out, model.to_json().dump(2) + "\n");
    atomic_write(out.string() + ".report.csv", coefficient_report(model));
    if (bootstrap_b > 0) {
        const auto summary = linkrot::bootstrap_fit(obs, lambda, alpha, bootstrap_b, seed);
        std::ostringstream os;
        os << "feature,point,ci_lo,ci_hi\n";
        for (std::size_t j = 0; j < d.manifest.size(); ++j) {
            os << d.manifest[j] << ',' << linkrot::format_double(summary.beta[j].point) << ','
               << linkrot::format_double(summary.beta[j].lo) << ','
               << linkrot::format_double(summary.beta[j].hi) << '\n';
        }
        atomic_write(out.string() + ".bootstrap.csv", os.str());
    }
    return 0;
}

int cmd_regpath(const fs::path& features, double alpha, const std::string& lambdas_csv,
                const fs::path& out) {
    const linkrot::Dataset d = load_features(features);
    auto [std_data, standardization] = linkrot::standardize(d);
    const auto obs = linkrot::observations_from_dataset(std_data);
    std::vector<double> grid;
    if (!lambdas_csv.empty()) {
        std::stringstream ss(lambdas_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    } else {
        grid = linkrot::default_lambda_grid(obs, alpha);
    }
    const auto path = linkrot::regularization_path(obs, grid, alpha);
    std::ostringstream os;
    os << "lambda";
    for (const auto& name : d.manifest) os << ',' << name;
    os << '\n';
    for (std::size_t g = 0; g < path.lambda_grid.size(); ++g) {
        os << linkrot::format_double(path.lambda_grid[g]);
        for (double c : path.coefficients[g]) os << ',' << linkrot::format_double(c);
        os << '\n';
    }
    atomic_write(out, os.str());
    return 0;
}

int cmd_fit_forest(const fs::path& features, const linkrot::ForestOptions& opts,
                   std::uint64_t seed, const fs::path& out) {
    const linkrot::Dataset d = load_features(features);
    // The forest trains on raw columns, but NaN cells still need the same
    // mean imputation the Tobit path applies.
    auto [imputed, standardization] = linkrot::standardize(d);
    linkrot::Dataset raw = d;
    for (std::size_t i = 0; i < raw.n_rows(); ++i) {
        for (std::size_t j = 0; j < raw.n_cols(); ++j) {
            if (std::isnan(raw.x[i][j])) raw.x[i][j] = standardization.mean[j];
        }
    }
    const auto model = linkrot::fit_forest_model(raw, opts, seed);
    atomic_write(out, model.to_json().dump() + "\n");
    return 0;
}

int cmd_explain(const fs::path& model_path, const fs::path& features, int n_permutations,
                std::uint64_t seed, std::size_t max_rows, const fs::path& out) {
    const json mj = json::parse(read_file(model_path));
    const linkrot::Dataset d = load_features(features);
    const std::string type = mj.at("model_type").get<std::string>();
    const std::size_t n_explain = std::min(max_rows, d.n_rows());

    std::vector<linkrot::ShapExplanation> explanations;
    std::vector<std::string> manifest;
    if (type == "tobit") {
        const auto model = linkrot::TobitModel::from_json(mj);
        manifest = model.manifest;
        if (d.manifest != manifest) throw linkrot::WidthMismatch("features/model manifest");
        // In standardized space the training background means are all zero.
        const std::vector<double> bg_means(manifest.size(), 0.0);
        for (std::size_t i = 0; i < n_explain; ++i) {
            const auto z = model.standardization.apply(d.x[i]);
            explanations.push_back(
                linkrot::shap_linear(model.fit.beta, model.fit.intercept, z, bg_means));
        }
    } else if (type == "forest") {
        const auto model = linkrot::ForestModel::from_json(mj);
        manifest = model.manifest;
        if (d.manifest != manifest) throw linkrot::WidthMismatch("features/model manifest");
        auto [imputed, standardization] = linkrot::standardize(d);
        linkrot::Dataset raw = d;
        for (std::size_t i = 0; i < raw.n_rows(); ++i) {
            for (std::size_t j = 0; j < raw.n_cols(); ++j) {
                if (std::isnan(raw.x[i][j])) raw.x[i][j] = standardization.mean[j];
            }
        }
        // Background: up to 100 rows sampled with a fixed stream.
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> idx(raw.n_rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(100, idx.size()));
        std::vector<std::vector<double>> background;
        for (auto i : idx) background.push_back(raw.x[i]);
        auto predict = [&](const std::vector<double>& x) { return model.predict(x); };
        for (std::size_t i = 0; i < n_explain; ++i) {
            explanations.push_back(linkrot::shap_sampling(
                predict, raw.x[i], background, n_permutations,
                seed + 1 + static_cast<std::uint64_t>(i), "forest"));
        }
    } else {
        throw linkrot::BadOptions("unknown model_type: " + type);
    }

    const auto importance = linkrot::mean_abs_shap(explanations);
    std::vector<double> mean_phi(manifest.size(), 0.0), mean_se(manifest.size(), 0.0);
    bool have_se = false;
    for (const auto& e : explanations) {
        for (std::size_t j = 0; j < manifest.size(); ++j) {
            mean_phi[j] += e.phi[j];
            if (!e.std_error.empty()) {
                mean_se[j] += e.std_error[j];
                have_se = true;
            }
        }
    }
    for (std::size_t j = 0; j < manifest.size(); ++j) {
        mean_phi[j] /= static_cast<double>(explanations.size());
        mean_se[j] /= static_cast<double>(explanations.size());
    }
    std::vector<std::size_t> order(manifest.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
    std::vector<std::size_t> rank(manifest.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;

    std::ostringstream os;
    os << "feature,phi,mean_abs_phi,abs_rank,std_error\n";
    for (std::size_t j = 0; j < manifest.size(); ++j) {
        os << manifest[j] << ',' << linkrot::format_double(mean_phi[j]) << ','
           << linkrot::format_double(importance[j]) << ',' << rank[j] << ',';
        if (have_se) os << linkrot::format_double(mean_se[j]);
        os << '\n';
    }
    atomic_write(out, os.str());
    return 0;
}

int cmd_predict(const fs::path& model_path, const fs::path& features, const fs::path& out) {
    const json mj = json::parse(read_file(model_path));
    const linkrot::Dataset d = load_features(features);
    const std::string type = mj.at("model_type").get<std::string>();
    std::ostringstream os;
    os << "prediction\n";
    if (type == "tobit") {
        const auto model = linkrot::TobitModel::from_json(mj);
        if (d.manifest != model.manifest) throw linkrot::WidthMismatch("manifest mismatch");
        for (const auto& row : d.x) os << linkrot::format_double(model.predict(row)) << '\n';
    } else if (type == "forest") {
        const auto model = linkrot::ForestModel::from_json(mj);
        if (d.manifest != model.manifest) throw linkrot::WidthMismatch("manifest mismatch");
        for (auto row : d.x) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (std::isnan(row[j])) row[j] = 0.0;
            }
            os << linkrot::format_double(model.predict(row)) << '\n';
        }
    } else {
        throw linkrot::BadOptions("unknown model_type: " + type);
    }
    atomic_write(out, os.str());
    return 0;
}

void write_correlation_csvs(const linkrot::Dataset& d, const fs::path& dir,
                            const std::string& stem) {
    if (d.n_rows() < 3) return;
    const auto m = linkrot::correlation_matrix(d);
    std::ostringstream r_os, p_os;
    r_os << "feature";
    p_os << "feature";
    for (const auto& n : m.names) {
        r_os << ',' << n;
        p_os << ',' << n;
    }
    r_os << '\n';
    p_os << '\n';
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        r_os << m.names[i];
        p_os << m.names[i];
        for (std::size_t j = 0; j < m.names.size(); ++j) {
            r_os << ',';
            p_os << ',';
            if (m.cells[i][j].defined) {
                r_os << linkrot::format_double(m.cells[i][j].r);
                p_os << linkrot::format_double(m.cells[i][j].p);
            }  // undefined (constant column) cells stay blank
        }
        r_os << '\n';
        p_os << '\n';
    }
    atomic_write(dir / (stem + "_r.csv"), r_os.str());
    atomic_write(dir / (stem + "_p.csv"), p_os.str());
}

int cmd_report(const fs::path& features, const fs::path& out_dir) {
    const linkrot::Dataset d = load_features(features);
    const auto hist = linkrot::lifespan_histogram(d);
    std::ostringstream os;
    os << "scaled_y,count\n";
    for (const auto& [bin, count] : hist.counts) os << bin << ',' << count << '\n';
    atomic_write(out_dir / "histogram.csv", os.str());
    std::ostringstream sum;
    sum << "n,mean_scaled_y\n"
        << hist.total << ',' << linkrot::format_double(hist.mean_scaled_y) << '\n';
    atomic_write(out_dir / "histogram_summary.csv", sum.str());

    write_correlation_csvs(d, out_dir, "correlation");
    linkrot::Dataset alive, dead;
    alive.manifest = dead.manifest = d.manifest;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        (d.outcomes[i].alive_at_fetch ? alive : dead).add_row(d.x[i], d.outcomes[i]);
    }
    write_correlation_csvs(alive, out_dir, "correlation_available");
    write_correlation_csvs(dead, out_dir, "correlation_unavailable");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predict the longevity of web resources cited in publications"};
    app.require_subcommand(1);

    // probe
    auto* probe = app.add_subcommand("probe", "Probe URLs and resolve survival outcomes");
    std::string p_urls, p_out, p_archive, p_success, p_now, p_agent = "linkrot/1.0";
    int p_fetch_year = 0, p_tries = 5;
    double p_timeout = 15.0, p_rate = 1.0, p_backoff = 1.0;
    probe->add_option("--urls", p_urls, "URL list CSV (doc_id,url[,first_seen_year])")
        ->required();
    probe->add_option("--out", p_out, "Outcomes JSONL path")->required();
    probe->add_option("--fetch-year", p_fetch_year, "Calendar year of this fetch")->required();
    probe->add_option("--archive", p_archive, "Archive availability endpoint");
    probe->add_option("--success", p_success, "Comma-separated alive HTTP statuses");
    probe->add_option("--timeout", p_timeout, "HTTP timeout seconds");
    probe->add_option("--rate", p_rate, "Archive requests per second");
    probe->add_option("--max-tries", p_tries, "Archive retry attempts");
    probe->add_option("--backoff-base", p_backoff, "Retry backoff base seconds");
    probe->add_option("--now", p_now, "Fixed probe timestamp (reproducible runs)");
    probe->add_option("--user-agent", p_agent, "User-Agent header");

    // extract
    auto* extract = app.add_subcommand("extract", "Build the features CSV");
    std::string e_urls, e_html, e_meta, e_outcomes, e_hindex, e_out;
    bool e_first_appear = false;
    extract->add_option("--urls", e_urls, "URL list CSV")->required();
    extract->add_option("--html-dir", e_html, "Directory of cached <doc_id>.html files")
        ->required();
    extract->add_option("--meta", e_meta, "Publication metadata JSONL")->required();
    extract->add_option("--outcomes", e_outcomes, "Outcomes JSONL from probe")->required();
    extract->add_option("--hindex", e_hindex, "Optional author_id -> h-index JSON map");
    extract->add_option("--out", e_out, "Features CSV path")->required();
    extract->add_flag("--with-first-appear", e_first_appear,
                      "Include the scaled_first_appear column");

    // fit-tobit
    auto* fit_tobit = app.add_subcommand("fit-tobit", "Fit the censored regression");
    std::string t_features, t_out;
    double t_lambda = 0.0, t_alpha = 0.5;
    int t_cv = 0, t_bootstrap = 0;
    std::uint64_t t_seed = 0;
    bool t_seed_set = false;
    fit_tobit->add_option("--features", t_features, "Features CSV")->required();
    fit_tobit->add_option("--lambda", t_lambda, "Penalty strength");
    fit_tobit->add_option("--alpha", t_alpha, "L1/L2 mix in [0,1]");
    fit_tobit->add_option("--cv", t_cv, "Select lambda by k-fold CV (requires --seed)");
    fit_tobit->add_option("--bootstrap", t_bootstrap, "Bootstrap replicates (requires --seed)");
    fit_tobit->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { t_seed = s; t_seed_set = true; }, "RNG seed");
    fit_tobit->add_option("--out", t_out, "Model JSON path")->required();

    // regpath
    auto* regpath = app.add_subcommand("regpath", "Emit the regularization path");
    std::string r_features, r_out, r_lambdas;
    double r_alpha = 0.5;
    regpath->add_option("--features", r_features, "Features CSV")->required();
    regpath->add_option("--alpha", r_alpha, "L1/L2 mix in [0,1]");
    regpath->add_option("--lambdas", r_lambdas, "Comma-separated descending grid");
    regpath->add_option("--out", r_out, "Path CSV")->required();

    // fit-forest
    auto* fit_forest_cmd = app.add_subcommand("fit-forest", "Fit the bagged-tree model");
    std::string f_features, f_out;
    linkrot::ForestOptions f_opts;
    std::uint64_t f_seed = 0;
    bool f_seed_set = false;
    fit_forest_cmd->add_option("--features", f_features, "Features CSV")->required();
    fit_forest_cmd->add_option("--trees", f_opts.n_trees, "Number of trees");
    fit_forest_cmd->add_option("--min-leaf", f_opts.min_leaf, "Minimum samples per leaf");
    fit_forest_cmd->add_option("--max-depth", f_opts.max_depth, "Max depth (0 = unlimited)");
    fit_forest_cmd->add_option("--mtry", f_opts.features_per_split,
                               "Features per split (0 = p/3)");
    fit_forest_cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { f_seed = s; f_seed_set = true; }, "RNG seed")
        ->required();
    fit_forest_cmd->add_option("--out", f_out, "Forest JSON path")->required();

    // explain
    auto* explain = app.add_subcommand("explain", "SHAP-style attribution table");
    std::string x_model, x_features, x_out;
    int x_perms = 128;
    std::uint64_t x_seed = 0;
    std::size_t x_max_rows = 100;
    explain->add_option("--model", x_model, "Model JSON (tobit or forest)")->required();
    explain->add_option("--features", x_features, "Features CSV")->required();
    explain->add_option("--n-permutations", x_perms, "Sampling permutations (forest)");
    explain->add_option("--seed", x_seed, "RNG seed")->required();
    explain->add_option("--max-rows", x_max_rows, "Rows to explain");
    explain->add_option("--out", x_out, "Explanation CSV")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "Predicted scaled last-available year");
    std::string q_model, q_features, q_out;
    predict->add_option("--model", q_model, "Model JSON")->required();
    predict->add_option("--features", q_features, "Features CSV")->required();
    predict->add_option("--out", q_out, "Predictions CSV")->required();

    // report
    auto* report = app.add_subcommand("report", "Histogram and correlation CSVs");
    std::string g_features, g_out_dir;
    report->add_option("--features", g_features, "Features CSV")->required();
    report->add_option("--out-dir", g_out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (probe->parsed()) {
            linkrot::ProbeConfig cfg;
            if (const char* env = std::getenv("LINKROT_ARCHIVE_ENDPOINT")) {
                cfg.archive_endpoint = env;
            }
            if (const char* env = std::getenv("LINKROT_RATE_LIMIT")) {
                cfg.archive_rate_per_sec = std::stod(env);
            }
            if (!p_archive.empty()) cfg.archive_endpoint = p_archive;
            if (!p_success.empty()) cfg.success_statuses = parse_status_set(p_success);
            cfg.timeout_seconds = p_timeout;
            cfg.archive_rate_per_sec = probe->count("--rate") ? p_rate : cfg.archive_rate_per_sec;
            cfg.max_tries = p_tries;
            cfg.backoff_base_seconds = p_backoff;
            cfg.now_override = p_now;
            cfg.user_agent = p_agent;
            const int rc = cmd_probe(p_urls, p_out, p_fetch_year, cfg);
            write_run_manifest(p_out + ".manifest.json", "probe",
                               json{{"urls", p_urls},
                                    {"out", p_out},
                                    {"fetch_year", p_fetch_year},
                                    {"archive", cfg.archive_endpoint},
                                    {"success", p_success},
                                    {"now", p_now}});
            return rc;
        }
        if (extract->parsed()) {
            const int rc = cmd_extract(e_urls, e_html, e_meta, e_outcomes, e_hindex, e_out,
                                       e_first_appear);
            write_run_manifest(e_out + ".manifest.json", "extract",
                               json{{"urls", e_urls},
                                    {"html_dir", e_html},
                                    {"meta", e_meta},
                                    {"outcomes", e_outcomes},
                                    {"with_first_appear", e_first_appear}});
            return rc;
        }
        if (fit_tobit->parsed()) {
            if ((t_cv > 0 || t_bootstrap > 0) && !t_seed_set) {
                std::cerr << "error: --seed is required with --cv/--bootstrap\n";
                return 1;
            }
            const int rc =
                cmd_fit_tobit(t_features, t_lambda, t_alpha, t_cv, t_seed, t_bootstrap, t_out);
            write_run_manifest(t_out + ".manifest.json", "fit-tobit",
                               json{{"features", t_features},
                                    {"lambda", t_lambda},
                                    {"alpha", t_alpha},
                                    {"cv", t_cv},
                                    {"bootstrap", t_bootstrap},
                                    {"seed", t_seed}});
            return rc;
        }
        if (regpath->parsed()) {
            const int rc = cmd_regpath(r_features, r_alpha, r_lambdas, r_out);
            write_run_manifest(r_out + ".manifest.json", "regpath",
                               json{{"features", r_features},
                                    {"alpha", r_alpha},
                                    {"lambdas", r_lambdas}});
            return rc;
        }
        if (fit_forest_cmd->parsed()) {
            if (!f_seed_set) {
                std::cerr << "error: --seed is required\n";
                return 1;
            }
            const int rc = cmd_fit_forest(f_features, f_opts, f_seed, f_out);
            write_run_manifest(f_out + ".manifest.json", "fit-forest",
                               json{{"features", f_features},
                                    {"trees", f_opts.n_trees},
                                    {"min_leaf", f_opts.min_leaf},
                                    {"max_depth", f_opts.max_depth},
                                    {"mtry", f_opts.features_per_split},
                                    {"seed", f_seed}});
            return rc;
        }
        if (explain->parsed()) {
            const int rc = cmd_explain(x_model, x_features, x_perms, x_seed, x_max_rows, x_out);
            write_run_manifest(x_out + ".manifest.json", "explain",
                               json{{"model", x_model},
                                    {"features", x_features},
                                    {"n_permutations", x_perms},
                                    {"seed", x_seed},
                                    {"max_rows", x_max_rows}});
            return rc;
        }
        if (predict->parsed()) {
            const int rc = cmd_predict(q_model, q_features, q_out);
            write_run_manifest(q_out + ".manifest.json", "predict",
                               json{{"model", q_model}, {"features", q_features}});
            return rc;
        }
        if (report->parsed()) {
            const int rc = cmd_report(g_features, g_out_dir);
            write_run_manifest(fs::path(g_out_dir) / "run_manifest.json", "report",
                               json{{"features", g_features}, {"out_dir", g_out_dir}});
            return rc;
        }
    } catch (const linkrot::BadOptions& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const linkrot::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const linkrot::MissingField& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const linkrot::BadHyperparameter& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const linkrot::Error& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
