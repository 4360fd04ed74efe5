#include "shardscreen/cli.hpp"
#include "shardscreen/algorithm.hpp"
#include "shardscreen/error.hpp"
#include "shardscreen/evaluate.hpp"
#include "shardscreen/ingest.hpp"
#include "shardscreen/parallel.hpp"
#include "shardscreen/simulate.hpp"
#include "shardscreen/summary_io.hpp"
#include "shardscreen/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace shardscreen {

namespace fs = std::filesystem;

namespace {

// Files of one command. Everything is rendered in memory first; on failure
// the files already written (and a directory this command created) go away.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        if (!fs::exists(dir_)) {
            std::error_code ec;
            fs::create_directories(dir_, ec);
            if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir_.string() + "': " + ec.message());
            created_dir_ = true;
        }
        const fs::path path = dir_ / name;
        written_.push_back(path);
        std::ofstream f(path, std::ios::binary);
        f << content;
        f.close();
        if (!f) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool created_dir_ = false;
};

struct IngestFlags {
    std::string data;
    std::string response;
    std::string conditional = "AUTO";
    bool standardize = false;
    bool interactions = false;
    double outlier_sd = 0.0;
    std::size_t split = 0;

    void attach(CLI::App* cmd, bool with_conditional) {
        cmd->add_option("--data", data, "Input CSV with a header row")->required();
        cmd->add_option("--response", response, "Response column")->required();
        if (with_conditional) {
            cmd->add_option("--conditional", conditional, "Conditional column or AUTO")
                ->capture_default_str();
        }
        cmd->add_flag("--standardize", standardize, "Center and scale features by training statistics");
        cmd->add_flag("--interactions", interactions, "Add all pairwise feature products");
        cmd->add_option("--outlier-sd", outlier_sd,
                        "Drop rows with a feature beyond this many standard deviations (0 = off)")
            ->check(CLI::NonNegativeNumber);
    }

    IngestOptions options() const {
        IngestOptions o;
        o.response = response;
        o.conditional = conditional;
        o.standardize = standardize;
        o.interactions = interactions;
        if (outlier_sd > 0.0) o.outlier_sd = outlier_sd;
        if (split > 0) o.split_row = split;
        return o;
    }
};

std::string metadata_json(const IngestFlags& flags, const IngestReport& report,
                          const nlohmann::json& extra) {
    nlohmann::json doc = extra;
    doc["data"] = flags.data;
    doc["response"] = flags.response;
    doc["conditional"] = report.conditional;
    doc["standardize"] = flags.standardize;
    doc["interactions"] = flags.interactions;
    doc["cleaning"] = {{"drop_nonfinite_rows", true},
                       {"outlier_sd", flags.outlier_sd > 0.0 ? nlohmann::json(flags.outlier_sd)
                                                             : nlohmann::json(nullptr)}};
    doc["rows_read"] = report.rows_read;
    doc["dropped_nonfinite"] = report.dropped_nonfinite;
    doc["dropped_outliers"] = report.dropped_outliers;
    return doc.dump(2) + "\n";
}

std::string selected_names(const std::vector<std::size_t>& selected,
                           const std::vector<std::string>& names) {
    std::string text;
    for (std::size_t j : selected) text += names[j] + "\n";
    return text;
}

// Screening sees only the training rows; test rows are left for evaluate.
Dataset training_rows(Dataset data, std::size_t train_rows) {
    const auto n = static_cast<Eigen::Index>(train_rows);
    if (n == data.features.rows()) return data;
    data.response.conservativeResize(n);
    data.conditional.conservativeResize(n);
    data.features.conservativeResize(n, Eigen::NoChange);
    return data;
}

void require_conditional(const std::string& name) {
    if (name.empty()) throw Error(ErrorCode::InvalidArgument, "--conditional needs a column name or AUTO");
}

void log(bool verbose, std::ostream& err, const std::string& msg) {
    if (verbose) err << msg << '\n';
}

} // namespace

void write_utilities_csv(const ScreeningResult& result, const std::vector<std::string>& names,
                         std::ostream& out) {
    out << "rank,index,name,utility,unreliable\n";
    for (std::size_t r = 0; r < result.ranking.size(); ++r) {
        const std::size_t j = result.ranking[r];
        const bool flagged = j < result.unreliable.size() && result.unreliable[j];
        out << r + 1 << ',' << j << ',' << names[j] << ',' << format_double(result.utilities[j]) << ','
            << (flagged ? 1 : 0) << '\n';
    }
}

UtilitiesTable read_utilities_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) !=
                                       std::vector<std::string>{"rank", "index", "name", "utility",
                                                                "unreliable"}) {
        throw Error(ErrorCode::Parse, "'" + path + "' is not a utilities table");
    }
    struct Row {
        std::size_t index;
        std::string name;
        double utility;
        bool unreliable;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw Error(ErrorCode::Parse, "malformed utilities row: " + line);
        rows.push_back({static_cast<std::size_t>(parse_double(f[1])), f[2], parse_double(f[3]),
                        f[4] == "1"});
    }
    UtilitiesTable t;
    const std::size_t p = rows.size();
    t.names.resize(p);
    t.utilities.resize(p);
    t.unreliable.resize(p);
    for (const auto& r : rows) {
        if (r.index >= p) throw Error(ErrorCode::Parse, "feature index out of range in utilities table");
        t.names[r.index] = r.name;
        t.utilities[r.index] = r.utility;
        t.unreliable[r.index] = r.unreliable ? 1 : 0;
        t.ranking.push_back(r.index);
    }
    return t;
}

std::vector<std::string> read_name_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return names;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distributed conditional feature screening"};
    app.name("shardscreen");
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a replicated simulation experiment");
    std::string sim_config;
    std::string sim_out;
    std::uint64_t sim_seed = 0;
    sim->add_option("--config", sim_config, "JSON experiment configuration")->required();
    sim->add_option("--out", sim_out, "Output directory")->required();
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Root seed (overrides the config)");

    // screen
    auto* scr = app.add_subcommand("screen", "Screen the features of a CSV dataset");
    IngestFlags scr_in;
    scr_in.attach(scr, true);
    std::string scr_method = "saps";
    std::size_t scr_shards = 1;
    std::string scr_rule;
    std::string scr_out;
    std::uint64_t scr_seed = 0;
    bool scr_no_shuffle = false;
    bool scr_summaries = false;
    scr->add_option("--method", scr_method, "saps, acps or jdps")
        ->check(CLI::IsMember({"saps", "acps", "jdps"}, CLI::ignore_case))
        ->capture_default_str();
    scr->add_option("--shards", scr_shards, "Number of shards K")->capture_default_str();
    scr->add_option("--rule", scr_rule, "topd:<d> or gamma:<value>")->required();
    scr->add_option("--out", scr_out, "Output directory")->required();
    scr->add_option("--seed", scr_seed, "Shuffle seed")->capture_default_str();
    scr->add_flag("--no-shuffle", scr_no_shuffle, "Keep file row order when sharding");
    scr->add_flag("--summaries", scr_summaries, "Also write each shard's binary summary record");

    // knockoff
    auto* kn = app.add_subcommand("knockoff", "Two-stage knockoff screening with FDR control");
    IngestFlags kn_in;
    kn_in.attach(kn, true);
    std::string kn_method = "saps";
    std::size_t kn_shards = 1;
    double kn_alpha = 0.2;
    std::size_t kn_d = 0;
    std::size_t kn_n1 = 0;
    std::size_t kn_n2 = 0;
    std::string kn_s = "equicorrelated";
    std::string kn_out;
    std::uint64_t kn_seed = 0;
    bool kn_no_shuffle = false;
    kn->add_option("--method", kn_method, "saps, acps or jdps")
        ->check(CLI::IsMember({"saps", "acps", "jdps"}, CLI::ignore_case))
        ->capture_default_str();
    kn->add_option("--shards", kn_shards, "Number of shards K")->capture_default_str();
    kn->add_option("--alpha", kn_alpha, "Target FDR level")->capture_default_str();
    kn->add_option("--d", kn_d, "First-stage model size (0 = default)");
    kn->add_option("--n1", kn_n1, "First-stage rows per shard (0 = default)");
    kn->add_option("--n2", kn_n2, "Second-stage rows per shard (0 = default)");
    kn->add_option("--s-construction", kn_s, "equicorrelated or sdp")
        ->check(CLI::IsMember({"equicorrelated", "sdp"}))
        ->capture_default_str();
    kn->add_option("--out", kn_out, "Output directory")->required();
    kn->add_option("--seed", kn_seed, "Shuffle and knockoff seed")->capture_default_str();
    kn->add_flag("--no-shuffle", kn_no_shuffle, "Keep file row order when sharding");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Test RMSE of least squares on selected features");
    IngestFlags ev_in;
    ev_in.attach(ev, false);
    ev_in.conditional.clear();
    std::string ev_selected;
    std::string ev_out;
    ev->add_option("--selected", ev_selected, "File with one feature name per line")->required();
    ev->add_option("--split", ev_in.split, "First test row (0-based, header excluded)")->required();
    ev->add_option("--out", ev_out, "Output directory")->required();
    for (auto* cmd : {scr, kn}) {
        cmd->add_option("--split", cmd == scr ? scr_in.split : kn_in.split,
                        "Rows before this index are the training split (0 = all rows)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    std::string out_dir;
    if (*sim) out_dir = sim_out;
    if (*scr) out_dir = scr_out;
    if (*kn) out_dir = kn_out;
    if (*ev) out_dir = ev_out;
    Outputs outputs(out_dir);

    try {
        if (*sim) {
            SimConfig cfg = read_sim_config(sim_config);
            if (*sim_seed_opt) cfg.seed = sim_seed;
            const ExperimentReport report = run_replications(cfg, [&](std::size_t rep) {
                log(verbose, err, "replication " + std::to_string(rep + 1) + "/" + std::to_string(cfg.reps));
            });
            std::ostringstream reps;
            std::ostringstream summary;
            write_replications_csv(report, reps);
            write_summary_csv(report, summary);
            outputs.write("replications.csv", reps.str());
            outputs.write("summary.csv", summary.str());
            out << summary.str();
        } else if (*scr) {
            const Method method = parse_method(scr_method);
            const SelectionRule rule = parse_rule(scr_rule);
            require_conditional(scr_in.conditional);
            IngestedData in = ingest_csv(scr_in.data, scr_in.options());
            log(verbose, err, "ingested " + std::to_string(in.data.rows()) + " rows, " +
                                  std::to_string(in.data.num_features()) + " features");
            const IngestReport report = in.report;
            const ShardedDataset sharded = shard_dataset(training_rows(std::move(in.data), report.train_rows),
                                                         scr_shards, {!scr_no_shuffle, scr_seed});

            std::vector<ShardSummary> summaries(sharded.num_shards());
            parallel_for(sharded.num_shards(), [&](std::size_t k) {
                try {
                    summaries[k] = summarize_shard(sharded.shard(k), method);
                } catch (const Error& e) {
                    throw Error(e.code(), "shard " + std::to_string(k) + ": " + e.what(), k);
                }
            });
            const ScreeningResult result = select(aggregate(summaries, method), rule);

            std::ostringstream table;
            write_utilities_csv(result, sharded.feature_names(), table);
            outputs.write("utilities.csv", table.str());
            outputs.write("selected.txt", selected_names(result.selected, sharded.feature_names()));
            outputs.write("metadata.json",
                          metadata_json(scr_in, report,
                                        {{"command", "screen"},
                                         {"method", std::string(to_string(method))},
                                         {"shards", sharded.num_shards()},
                                         {"rule", to_string(rule)},
                                         {"shuffle", !scr_no_shuffle},
                                         {"seed", scr_seed},
                                         {"selected", result.selected.size()}}));
            if (scr_summaries) {
                for (std::size_t k = 0; k < summaries.size(); ++k) {
                    std::ostringstream rec(std::ios::binary);
                    write_summary(rec, summaries[k]);
                    char name[32];
                    std::snprintf(name, sizeof name, "shard_%03zu.sscr", k);
                    outputs.write(name, rec.str());
                }
            }
            out << "selected " << result.selected.size() << " of " << result.utilities.size()
                << " features\n";
        } else if (*kn) {
            KnockoffConfig kc;
            kc.alpha = kn_alpha;
            kc.d = kn_d;
            kc.n1 = kn_n1;
            kc.n2 = kn_n2;
            kc.method = parse_method(kn_method);
            kc.s_method = kn_s == "sdp" ? SConstruction::Sdp : SConstruction::Equicorrelated;
            kc.seed = kn_seed;
            require_conditional(kn_in.conditional);
            IngestedData in = ingest_csv(kn_in.data, kn_in.options());
            const IngestReport report = in.report;
            const ShardedDataset sharded = shard_dataset(training_rows(std::move(in.data), report.train_rows),
                                                         kn_shards, {!kn_no_shuffle, kn_seed});
            const KnockoffRun run = run_knockoff_screen(sharded, kc);

            std::ostringstream audit;
            write_audit_json(run, sharded.feature_names(), audit);
            outputs.write("audit.json", audit.str());
            outputs.write("selected.txt", selected_names(run.selected, sharded.feature_names()));
            outputs.write("metadata.json",
                          metadata_json(kn_in, report,
                                        {{"command", "knockoff"},
                                         {"shuffle", !kn_no_shuffle},
                                         {"seed", kn_seed}}));
            out << "selected " << run.selected.size() << " of " << run.first_stage.size()
                << " first-stage features\n";
        } else if (*ev) {
            const IngestedData in = ingest_csv(ev_in.data, ev_in.options());
            const auto names = read_name_list(ev_selected);
            const Dataset& data = in.data;
            Eigen::MatrixXd design(data.features.rows(), static_cast<Eigen::Index>(names.size()));
            for (std::size_t c = 0; c < names.size(); ++c) {
                const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), names[c]);
                if (it == data.feature_names.end()) {
                    throw Error(ErrorCode::ColumnNotFound, "selected feature '" + names[c] + "' not in data");
                }
                design.col(static_cast<Eigen::Index>(c)) =
                    data.features.col(static_cast<Eigen::Index>(it - data.feature_names.begin()));
            }
            const Evaluation result = evaluate_split(design, data.response, in.report.train_rows, names);
            std::ostringstream csv;
            csv << "features,train_rows,test_rows,rmse,ridged\n"
                << names.size() << ',' << result.train_rows << ',' << result.test_rows << ','
                << format_double(result.rmse) << ',' << (result.ridged ? 1 : 0) << '\n';
            outputs.write("evaluation.csv", csv.str());
            out << "rmse " << format_double(result.rmse) << '\n';
        }
    } catch (const Error& e) {
        outputs.rollback();
        err << "error: code=" << to_string(e.code());
        if (e.index()) err << " index=" << *e.index();
        err << " message=" << std::quoted(e.what()) << '\n';
        return 1;
    } catch (const std::bad_alloc&) {
        outputs.rollback();
        err << "error: code=OutOfMemory message=\"allocation failed\"\n";
        return 1;
    }
    return 0;
}

} // namespace shardscreen
