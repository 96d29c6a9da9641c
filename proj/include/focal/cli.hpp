#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "focal/errors.hpp"
#include "focal/experiments.hpp"
#include "focal/minimizer.hpp"
#include "focal/pmf.hpp"
#include "focal/regime.hpp"
#include "focal/scalar.hpp"
#include "focal/serialize.hpp"

#include <CLI11.hpp>

// Command-line surface. Every command writes a single artifact (CSV or
// JSON) to --output or standard output. Emitters are deterministic:
// identical argument vectors produce byte-identical artifacts, numbers are
// printed with 17 significant digits, lines end with a line feed. Exit
// codes: 0 on success, 2 on numerical failure (JSON diagnostic on the
// error stream), 64 on usage errors. The FOCAL_LOG environment variable
// enables progress logging on the error stream and never affects results.

namespace focal {
namespace cli {

namespace detail {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Cell {
    std::string csv;
    std::string json;
};

inline Cell num(double v) {
    std::string s = format_double(v);
    return Cell{s, std::isfinite(v) ? s : "null"};
}

inline Cell integer(long v) {
    std::string s = std::to_string(v);
    return Cell{s, s};
}

inline Cell boolean(bool b) {
    std::string s = b ? "true" : "false";
    return Cell{s, s};
}

inline Cell text(const std::string& s) { return Cell{s, '"' + json_escape(s) + '"'}; }

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) out += ',';
        out += csv_field(t.columns[c]);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += csv_field(row[c].csv);
        }
        out += '\n';
    }
    return out;
}

inline std::string to_json_rows(const Table& t) {
    std::string out = "[";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (r) out += ',';
        out += '{';
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (c) out += ',';
            out += '"' + json_escape(t.columns[c]) + "\":" + t.rows[r][c].json;
        }
        out += '}';
    }
    out += ']';
    return out;
}

inline std::string jnum(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

inline std::string jnum_array(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += jnum(v[i]);
    }
    return out + ']';
}

inline Pmf parse_pmf_flag(const std::string& inline_probs, const std::string& file,
                          const char* flag) {
    if (!inline_probs.empty() && !file.empty()) {
        throw UsageError(std::string(flag) + ": give probabilities inline or via file, not both");
    }
    try {
        if (!file.empty()) {
            std::string body = read_file(file);
            if (!body.empty() && body.front() == '{') return pmf_from_json(body);
            return pmf_from_csv(body);
        }
        if (inline_probs.empty()) {
            throw UsageError(std::string(flag) + ": required");
        }
        std::vector<double> probs;
        std::size_t pos = 0;
        while (pos <= inline_probs.size()) {
            std::size_t comma = inline_probs.find(',', pos);
            if (comma == std::string::npos) comma = inline_probs.size();
            probs.push_back(std::stod(inline_probs.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        return Pmf(probs);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) {
        v[k] = k == 0 ? lo : (k == n - 1 ? hi : lo + (hi - lo) * k / (n - 1));
    }
    return v;
}

inline std::vector<double> geomspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    double llo = std::log(lo), lhi = std::log(hi);
    for (int k = 0; k < n; ++k) {
        v[k] = k == 0 ? lo : (k == n - 1 ? hi : std::exp(llo + (lhi - llo) * k / (n - 1)));
    }
    return v;
}

inline bool log_enabled() {
    const char* v = std::getenv("FOCAL_LOG");
    return v != nullptr && *v != '\0';
}

inline std::string pmf_label(const Pmf& p) {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) s += ',';
        std::snprintf(buf, sizeof buf, "%g", p.prob(i));
        s += buf;
    }
    return s;
}

inline std::string posterior_json(const PosteriorTable& t) {
    std::string out = "[";
    for (int b = 0; b < 16; ++b) {
        if (b) out += ',';
        out += '[' + jnum(t[b][0]) + ',' + jnum(t[b][1]) + ']';
    }
    return out + ']';
}

inline std::string posterior_csv(const PosteriorTable& t, const std::array<long, 16>& counts,
                                 const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) out += "# " + header_comment + "\n";
    out += "f1_bin,f2_bin,count,p_c0,p_c1\n";
    for (int f1 = 0; f1 < 4; ++f1) {
        for (int f2 = 0; f2 < 4; ++f2) {
            int b = f1 * 4 + f2;
            out += std::to_string(f1) + ',' + std::to_string(f2) + ',' + std::to_string(counts[b]) +
                   ',' + format_double(t[b][0]) + ',' + format_double(t[b][1]) + '\n';
        }
    }
    return out;
}

inline std::string minimizer_json(const MinimizerResult& res) {
    return "{\"alpha_star\":" + jnum(res.alpha_star) + ",\"residual\":" + jnum(res.residual) +
           ",\"iterations\":" + std::to_string(res.iterations) + ",\"p_star\":" +
           pmf_to_json(res.p_star) + "}";
}

inline std::string regime_json(const RegimeReport& rep) {
    std::string tags = "[";
    for (std::size_t i = 0; i < rep.tags.size(); ++i) {
        if (i) tags += ',';
        tags += std::string("\"") + to_string(rep.tags[i]) + '"';
    }
    tags += ']';
    return "{\"d\":" + jnum_array(rep.d) + ",\"p_gamma_a\":" + jnum(rep.p_gamma_a) +
           ",\"p_gamma_b\":" + jnum(rep.p_gamma_b) + ",\"p_plus\":" + jnum(rep.p_plus) +
           ",\"alpha_star\":" + jnum(rep.alpha_star) + ",\"tags\":" + tags +
           ",\"over_suppression\":" + (rep.over_suppression ? "true" : "false") +
           ",\"sign_changes\":" + std::to_string(rep.sign_changes) +
           ",\"majorizes_flag\":" + (rep.majorizes_flag ? "true" : "false") + "}";
}

}  // namespace detail

/// Runs one CLI invocation. `args` is the argument vector without the
/// program name. Artifacts go to --output or `out`; diagnostics to `err`.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    using detail::Cell;
    using detail::Table;

    CLI::App app{"focal-entropy calculus: losses, minimizers, regime analysis, figure data"};
    app.name("focal");
    app.require_subcommand(1);

    struct {
        double gamma = 0.0;
        double p = 0.0;
        double invert = 0.0;
        bool has_p = false;
        bool has_invert = false;
        std::string pmf, pmf_file;
        std::string q, q_file;
        bool has_q = false;
        int steps = 3;
        int resolution = 60;
        int jobs = 1;
        std::string grid;
        std::string logspace;
        int figure_number = 0;
        std::string figure_name;
        std::string output;
        std::string format;
        std::uint64_t seed = 0;
        std::size_t samples = 10000;
        int epochs = 30;
        int batch = 64;
        int hidden = 64;
        double lr = 1e-3;
        long threshold = 100;
        std::string table = "learned";
        std::string images, labels;
    } o;

    auto add_common = [&](CLI::App* sub, const char* default_format) {
        sub->add_option("--output,--out", o.output, "write the artifact to this file instead of stdout");
        sub->add_option("--format", o.format, std::string("artifact format (default ") + default_format + ")")
            ->check(CLI::IsMember({"csv", "json"}));
        return sub;
    };
    auto add_gamma = [&](CLI::App* sub) {
        return sub->add_option("--gamma", o.gamma, "focus parameter, >= 0")
            ->required()
            ->check(CLI::NonNegativeNumber);
    };
    auto add_pmf = [&](CLI::App* sub) {
        sub->add_option("--pmf", o.pmf, "comma-separated probabilities (labels 0..N-1)");
        sub->add_option("--pmf-file", o.pmf_file, "JSON {\"labels\":[...],\"probs\":[...]} or single-column CSV");
    };

    CLI::App* c_loss = add_common(app.add_subcommand("loss", "focal loss and its derivatives at one point"), "json");
    add_gamma(c_loss);
    c_loss->add_option("--p", o.p, "probability in (0,1]")->check(CLI::Range(0.0, 1.0));
    c_loss->add_option("--invert", o.invert, "derivative value t < 0; emits the p with L'(p) = t");

    CLI::App* c_entropy = add_common(app.add_subcommand("entropy", "focal entropy H_gamma(P,Q)"), "json");
    add_gamma(c_entropy);
    add_pmf(c_entropy);
    c_entropy->add_option("--q", o.q, "comma-separated probabilities for Q (defaults to P)");
    c_entropy->add_option("--q-file", o.q_file, "Q from file");

    CLI::App* c_minimize = add_common(app.add_subcommand("minimize", "unique minimizer of H_gamma(P,.)"), "json");
    add_gamma(c_minimize);
    add_pmf(c_minimize);

    CLI::App* c_analyze = add_common(app.add_subcommand("analyze", "regime classification of P under the minimizer"), "json");
    add_gamma(c_analyze);
    add_pmf(c_analyze);

    CLI::App* c_bounds = add_common(app.add_subcommand("bounds", "provable brackets for the normalization constant"), "json");
    add_gamma(c_bounds);
    add_pmf(c_bounds);

    CLI::App* c_binary = add_common(app.add_subcommand("binary", "two-point envelope around the binary optimizer"), "json");
    add_gamma(c_binary);
    c_binary->add_option("--p", o.p, "true probability of the rare class, in (0, 1/2]")
        ->required()
        ->check(CLI::Range(0.0, 0.5));

    CLI::App* c_asymptote = add_common(app.add_subcommand("asymptote", "alpha* against its large-gamma approximation"), "json");
    add_gamma(c_asymptote);
    add_pmf(c_asymptote);

    CLI::App* c_recurse = add_common(app.add_subcommand("recurse", "iterate the minimizer and emit the trajectory"), "csv");
    add_gamma(c_recurse);
    add_pmf(c_recurse);
    c_recurse->add_option("--steps", o.steps, "number of recursion steps (default 3)")->check(CLI::PositiveNumber);

    CLI::App* c_limit = add_common(app.add_subcommand("limit", "H_gamma(P,Q)^(1/gamma) over a gamma grid"), "csv");
    add_pmf(c_limit);
    c_limit->add_option("--q", o.q, "comma-separated probabilities for Q")->required();
    c_limit->add_option("--grid", o.grid, "explicit comma-separated gamma grid");
    c_limit->add_option("--logspace", o.logspace, "geometric grid LO,HI,N");

    CLI::App* c_scan = add_common(app.add_subcommand("scan", "ternary simplex scan of p_min - p_a"), "csv");
    add_gamma(c_scan);
    c_scan->add_option("--resolution", o.resolution, "lattice resolution (default 60)")
        ->check(CLI::Range(10, 1000000));
    c_scan->add_option("--jobs", o.jobs, "worker threads for cells (default 1)")->check(CLI::PositiveNumber);

    CLI::App* c_figure = add_common(
        app.add_subcommand("figure",
                           "regenerate figure data: 3 minimizer bars, 4 recursion, 5 uniform-convergence, "
                           "6 alpha-asymptotics, 7 simplex-scan (gamma=1, resolution 60, interior lattice), "
                           "9 binary-bounds, 10 limit"),
        "csv");
    c_figure->add_option("number", o.figure_number, "figure number (3,4,5,6,7,9,10)");
    c_figure->add_option("--name", o.figure_name,
                         "stable name: minimizer, recursion, uniform-convergence, alpha-asymptotics, "
                         "simplex-scan, binary-bounds, limit");
    c_figure->add_option("--jobs", o.jobs, "worker threads for scan-backed figures")->check(CLI::PositiveNumber);

    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--gamma", o.gamma, "focus parameter (default 1)")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", o.seed, "random seed (default 0, echoed in output)");
        sub->add_option("--epochs", o.epochs, "training epochs (default 30)")->check(CLI::PositiveNumber);
        sub->add_option("--batch", o.batch, "batch size (default 64)")->check(CLI::PositiveNumber);
        sub->add_option("--hidden", o.hidden, "hidden width (default 64)")->check(CLI::PositiveNumber);
        sub->add_option("--lr", o.lr, "learning rate (default 1e-3)")->check(CLI::PositiveNumber);
        sub->add_option("--threshold", o.threshold, "bin count threshold for comparisons (default 100)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--table", o.table, "CSV table to emit: learned, empirical, theory")
            ->check(CLI::IsMember({"learned", "empirical", "theory", "exact"}));
    };
    CLI::App* c_train_syn = add_common(
        app.add_subcommand("train-synthetic", "train the bin classifier on generated two-feature data"), "json");
    add_train_flags(c_train_syn);
    c_train_syn->add_option("--samples", o.samples, "sample count (default 10000)");

    CLI::App* c_train_mnist = add_common(
        app.add_subcommand("train-mnist", "train the bin classifier on MNIST zoning features"), "json");
    add_train_flags(c_train_mnist);
    c_train_mnist->add_option("--images", o.images, "IDX image file")->required();
    c_train_mnist->add_option("--labels", o.labels, "IDX label file")->required();

    o.gamma = 1.0;  // default for the train commands; every other consumer marks --gamma required

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "focal: " << e.what() << "\n";
        return 64;
    }

    o.has_p = (c_loss->count("--p") || c_binary->count("--p")) != 0u;
    o.has_invert = c_loss->count("--invert") != 0u;
    o.has_q = c_entropy->count("--q") || c_entropy->count("--q-file");
    bool verbose = detail::log_enabled();

    try {
        std::string artifact;
        std::string format = o.format;
        auto pick_format = [&](const char* fallback) {
            if (format.empty()) format = fallback;
        };

        if (c_loss->parsed()) {
            pick_format("json");
            FocusParam g{o.gamma};
            if (o.has_p == o.has_invert) {
                throw detail::UsageError("loss: give exactly one of --p or --invert");
            }
            if (o.has_invert) {
                double p = focal_d1_inverse(g, o.invert);
                Table t{{"gamma", "t", "p"}, {{detail::num(o.gamma), detail::num(o.invert), detail::num(p)}}};
                artifact = format == "csv" ? detail::to_csv(t)
                                           : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"t\":" + detail::jnum(o.invert) +
                                                 ",\"p\":" + detail::jnum(p) + "}\n";
            } else {
                Prob p{o.p};
                double loss = focal_loss(g, p);
                bool interior = o.p < 1.0;
                Cell d1 = interior ? detail::num(focal_loss_d1(g, p)) : Cell{"", "null"};
                Cell d2 = interior ? detail::num(focal_loss_d2(g, p)) : Cell{"", "null"};
                Cell kap = interior ? detail::num(kappa(o.p)) : Cell{"", "null"};
                Table t{{"gamma", "p", "loss", "d1", "d2", "phi", "kappa"},
                        {{detail::num(o.gamma), detail::num(o.p), detail::num(loss), d1, d2,
                          detail::num(phi(g, o.p)), kap}}};
                artifact = format == "csv"
                               ? detail::to_csv(t)
                               : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"p\":" + detail::jnum(o.p) +
                                     ",\"loss\":" + detail::jnum(loss) + ",\"d1\":" + d1.json +
                                     ",\"d2\":" + d2.json + ",\"phi\":" + detail::jnum(phi(g, o.p)) +
                                     ",\"kappa\":" + kap.json + "}\n";
            }
        } else if (c_entropy->parsed()) {
            pick_format("json");
            FocusParam g{o.gamma};
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            Pmf q = o.has_q ? detail::parse_pmf_flag(o.q, o.q_file, "--q") : p;
            EntropyValue h = focal_entropy(g, p, q);
            double hv = h.as_double();
            double sp = shannon_entropy(p);
            Table t{{"gamma", "entropy", "is_finite", "shannon_p"},
                    {{detail::num(o.gamma), detail::num(hv), detail::boolean(h.is_finite()), detail::num(sp)}}};
            artifact = format == "csv"
                           ? detail::to_csv(t)
                           : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"entropy\":" + detail::jnum(hv) +
                                 ",\"is_finite\":" + (h.is_finite() ? "true" : "false") +
                                 ",\"shannon_p\":" + detail::jnum(sp) + "}\n";
        } else if (c_minimize->parsed()) {
            pick_format("json");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            MinimizerResult res = solve_minimizer(FocusParam{o.gamma}, p);
            if (format == "json") {
                artifact = detail::minimizer_json(res) + "\n";
            } else {
                Table t;
                t.columns = {"alpha_star", "residual", "iterations"};
                std::vector<Cell> row{detail::num(res.alpha_star), detail::num(res.residual),
                                      detail::integer(res.iterations)};
                for (std::size_t i = 0; i < res.p_star.size(); ++i) {
                    t.columns.push_back("p_" + res.p_star.label(i));
                    row.push_back(detail::num(res.p_star.prob(i)));
                }
                t.rows.push_back(std::move(row));
                artifact = detail::to_csv(t);
            }
        } else if (c_analyze->parsed()) {
            pick_format("json");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            RegimeReport rep = analyze(FocusParam{o.gamma}, p);
            if (format == "json") {
                artifact = detail::regime_json(rep) + "\n";
            } else {
                Table t{{"i", "d", "tag", "alpha_star", "p_gamma_a", "p_gamma_b", "p_plus",
                         "over_suppression", "sign_changes", "majorizes_flag"},
                        {}};
                for (std::size_t i = 0; i < rep.d.size(); ++i) {
                    t.rows.push_back({detail::integer(static_cast<long>(i)), detail::num(rep.d[i]),
                                      detail::text(to_string(rep.tags[i])), detail::num(rep.alpha_star),
                                      detail::num(rep.p_gamma_a), detail::num(rep.p_gamma_b),
                                      detail::num(rep.p_plus), detail::boolean(rep.over_suppression),
                                      detail::integer(rep.sign_changes), detail::boolean(rep.majorizes_flag)});
                }
                artifact = detail::to_csv(t);
            }
        } else if (c_bounds->parsed()) {
            pick_format("json");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            AlphaBounds b = alpha_bounds(FocusParam{o.gamma}, p);
            Cell lo = b.phi_lo ? detail::num(*b.phi_lo) : Cell{"", "null"};
            Cell hi = b.phi_hi ? detail::num(*b.phi_hi) : Cell{"", "null"};
            Table t{{"gamma", "c_n_gamma", "box_lo", "box_hi", "all_above_peak", "all_below_peak",
                     "phi_lo", "phi_hi", "cap"},
                    {{detail::num(o.gamma), detail::num(b.c_n_gamma), detail::num(b.box_lo),
                      detail::num(b.box_hi), detail::boolean(b.all_above_peak),
                      detail::boolean(b.all_below_peak), lo, hi, detail::num(b.cap)}}};
            artifact = format == "csv"
                           ? detail::to_csv(t)
                           : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"c_n_gamma\":" + detail::jnum(b.c_n_gamma) +
                                 ",\"box_lo\":" + detail::jnum(b.box_lo) + ",\"box_hi\":" + detail::jnum(b.box_hi) +
                                 ",\"all_above_peak\":" + (b.all_above_peak ? "true" : "false") +
                                 ",\"all_below_peak\":" + (b.all_below_peak ? "true" : "false") +
                                 ",\"phi_lo\":" + lo.json + ",\"phi_hi\":" + hi.json +
                                 ",\"cap\":" + detail::jnum(b.cap) + "}\n";
        } else if (c_binary->parsed()) {
            pick_format("json");
            BinaryBoundsResult b = binary_bounds(FocusParam{o.gamma}, o.p);
            Table t{{"gamma", "p", "q_gamma", "p_star_1", "q_gamma_plus1", "gap_bound"},
                    {{detail::num(o.gamma), detail::num(b.p), detail::num(b.q_gamma),
                      detail::num(b.p_star_1), detail::num(b.q_gamma_plus1), detail::num(b.gap_bound)}}};
            artifact = format == "csv"
                           ? detail::to_csv(t)
                           : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"p\":" + detail::jnum(b.p) +
                                 ",\"q_gamma\":" + detail::jnum(b.q_gamma) + ",\"p_star_1\":" + detail::jnum(b.p_star_1) +
                                 ",\"q_gamma_plus1\":" + detail::jnum(b.q_gamma_plus1) +
                                 ",\"gap_bound\":" + detail::jnum(b.gap_bound) + "}\n";
        } else if (c_asymptote->parsed()) {
            pick_format("json");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            MinimizerResult res = solve_minimizer(FocusParam{o.gamma}, p);
            double approx = alpha_asymptotic(FocusParam{o.gamma}, p);
            double abs_gap = std::fabs(res.alpha_star - approx);
            Table t{{"gamma", "alpha_star", "alpha_asymptotic", "abs_gap", "rel_gap"},
                    {{detail::num(o.gamma), detail::num(res.alpha_star), detail::num(approx),
                      detail::num(abs_gap), detail::num(abs_gap / res.alpha_star)}}};
            artifact = format == "csv"
                           ? detail::to_csv(t)
                           : "{\"gamma\":" + detail::jnum(o.gamma) + ",\"alpha_star\":" + detail::jnum(res.alpha_star) +
                                 ",\"alpha_asymptotic\":" + detail::jnum(approx) + ",\"abs_gap\":" + detail::jnum(abs_gap) +
                                 ",\"rel_gap\":" + detail::jnum(abs_gap / res.alpha_star) + "}\n";
        } else if (c_recurse->parsed()) {
            pick_format("csv");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            std::vector<Pmf> traj = recurse_minimizer(FocusParam{o.gamma}, p, o.steps);
            Table t;
            t.columns = {"step"};
            for (std::size_t i = 0; i < p.size(); ++i) t.columns.push_back("p_" + p.label(i));
            auto push = [&](int step, const Pmf& q) {
                std::vector<Cell> row{detail::integer(step)};
                for (std::size_t i = 0; i < q.size(); ++i) row.push_back(detail::num(q.prob(i)));
                t.rows.push_back(std::move(row));
            };
            push(0, p);
            for (std::size_t s = 0; s < traj.size(); ++s) push(static_cast<int>(s + 1), traj[s]);
            if (format == "csv") {
                artifact = detail::to_csv(t);
            } else {
                artifact = "{\"gamma\":" + detail::jnum(o.gamma) + ",\"trajectory\":[";
                artifact += pmf_to_json(p);
                for (const Pmf& q : traj) artifact += ',' + pmf_to_json(q);
                artifact += "]}\n";
            }
        } else if (c_limit->parsed()) {
            pick_format("csv");
            Pmf p = detail::parse_pmf_flag(o.pmf, o.pmf_file, "--pmf");
            Pmf q = detail::parse_pmf_flag(o.q, "", "--q");
            std::vector<double> grid;
            if (!o.grid.empty()) {
                std::size_t pos = 0;
                while (pos <= o.grid.size()) {
                    std::size_t comma = o.grid.find(',', pos);
                    if (comma == std::string::npos) comma = o.grid.size();
                    grid.push_back(std::stod(o.grid.substr(pos, comma - pos)));
                    pos = comma + 1;
                }
            } else if (!o.logspace.empty()) {
                double lo, hi;
                int n;
                if (std::sscanf(o.logspace.c_str(), "%lf,%lf,%d", &lo, &hi, &n) != 3 || n < 2 || lo <= 0 || hi <= lo) {
                    throw detail::UsageError("--logspace: expected LO,HI,N with 0 < LO < HI and N >= 2");
                }
                grid = detail::geomspace(lo, hi, n);
            } else {
                throw detail::UsageError("limit: give --grid or --logspace");
            }
            auto seq = limit_diagnostic(p, q, grid);
            Table t{{"gamma", "value"}, {}};
            for (auto [g, v] : seq) t.rows.push_back({detail::num(g), detail::num(v)});
            artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
        } else if (c_scan->parsed() || c_figure->parsed()) {
            pick_format("csv");
            int figure = 0;
            if (c_figure->parsed()) {
                static const std::map<std::string, int> names{
                    {"minimizer", 3},        {"recursion", 4},     {"uniform-convergence", 5},
                    {"alpha-asymptotics", 6}, {"simplex-scan", 7}, {"binary-bounds", 9},
                    {"limit", 10}};
                if (!o.figure_name.empty()) {
                    auto it = names.find(o.figure_name);
                    if (it == names.end()) throw detail::UsageError("--name: unknown figure name " + o.figure_name);
                    if (o.figure_number != 0 && o.figure_number != it->second) {
                        throw detail::UsageError("figure: number and --name disagree");
                    }
                    figure = it->second;
                } else if (o.figure_number != 0) {
                    figure = o.figure_number;
                } else {
                    throw detail::UsageError("figure: give a number or --name");
                }
            }

            if (c_scan->parsed() || figure == 7) {
                FocusParam g{c_scan->parsed() ? o.gamma : 1.0};
                int resolution = c_scan->parsed() ? o.resolution : 60;
                if (verbose) err << "scan: gamma=" << format_double(g.value()) << " resolution=" << resolution
                                 << " jobs=" << o.jobs << "\n";
                ScanResult scan = simplex_scan(g, resolution, o.jobs);
                if (!scan.failures.empty()) {
                    err << "scan: " << scan.failures.size() << " cell(s) failed\n";
                    if (verbose) {
                        for (const auto& f : scan.failures) err << "  " << f << "\n";
                    }
                }
                if (format == "csv") {
                    Table t{{"p1", "p2", "p3", "alpha_star", "p_gamma_a", "pmin_minus_pa"}, {}};
                    for (const ScanRow& r : scan.rows) {
                        t.rows.push_back({detail::num(r.p1), detail::num(r.p2), detail::num(r.p3),
                                          detail::num(r.alpha_star), detail::num(r.p_gamma_a),
                                          detail::num(r.pmin_minus_pa)});
                    }
                    artifact = detail::to_csv(t);
                } else {
                    artifact = "{\"gamma\":" + detail::jnum(g.value()) +
                               ",\"resolution\":" + std::to_string(resolution) +
                               ",\"note\":\"interior lattice; cells with any coordinate below 1/(2*resolution) are excluded\"" +
                               ",\"min_pmin_minus_pa\":" + detail::jnum(scan.min_pmin_minus_pa) +
                               ",\"min_d1\":" + detail::jnum(scan.min_d1) + ",\"failures\":[";
                    for (std::size_t i = 0; i < scan.failures.size(); ++i) {
                        if (i) artifact += ',';
                        artifact += '"' + json_escape(scan.failures[i]) + '"';
                    }
                    artifact += "],\"rows\":[";
                    for (std::size_t i = 0; i < scan.rows.size(); ++i) {
                        const ScanRow& r = scan.rows[i];
                        if (i) artifact += ',';
                        artifact += "{\"p1\":" + detail::jnum(r.p1) + ",\"p2\":" + detail::jnum(r.p2) +
                                    ",\"p3\":" + detail::jnum(r.p3) + ",\"alpha_star\":" + detail::jnum(r.alpha_star) +
                                    ",\"p_gamma_a\":" + detail::jnum(r.p_gamma_a) +
                                    ",\"pmin_minus_pa\":" + detail::jnum(r.pmin_minus_pa) + "}";
                    }
                    artifact += "]}\n";
                }
            } else if (figure == 3) {
                Pmf p({0.1820587756164, 0.462129085446578, 0.355812138937022});
                Table t{{"gamma", "label", "p", "p_star"}, {}};
                for (double g : {0.5, 1.0, 2.0}) {
                    MinimizerResult res = solve_minimizer(FocusParam{g}, p);
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        t.rows.push_back({detail::num(g), detail::text(p.label(i)), detail::num(p.prob(i)),
                                          detail::num(res.p_star.prob(i))});
                    }
                }
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else if (figure == 4) {
                Pmf p({0.48511729, 0.24276922, 0.22591902, 0.04619447});
                std::vector<Pmf> traj = recurse_minimizer(FocusParam{1.0}, p, 3);
                Table t{{"step", "p_0", "p_1", "p_2", "p_3"}, {}};
                auto push = [&](int step, const Pmf& q) {
                    std::vector<Cell> row{detail::integer(step)};
                    for (std::size_t i = 0; i < q.size(); ++i) row.push_back(detail::num(q.prob(i)));
                    t.rows.push_back(std::move(row));
                };
                push(0, p);
                for (std::size_t s = 0; s < traj.size(); ++s) push(static_cast<int>(s + 1), traj[s]);
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else if (figure == 5) {
                std::vector<Pmf> dists{Pmf({0.65, 0.35}), Pmf({0.43, 0.32, 0.25}),
                                       Pmf({0.35, 0.25, 0.25, 0.15})};
                std::vector<double> grid = detail::geomspace(0.01, 40.0, 10);
                Table t{{"pmf", "gamma", "max_p_star"}, {}};
                for (const Pmf& p : dists) {
                    std::string label = detail::pmf_label(p);
                    for (double g : grid) {
                        MinimizerResult res = solve_minimizer(FocusParam{g}, p);
                        double mx = 0.0;
                        for (std::size_t i = 0; i < res.p_star.size(); ++i) mx = std::fmax(mx, res.p_star.prob(i));
                        t.rows.push_back({detail::text(label), detail::num(g), detail::num(mx)});
                    }
                }
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else if (figure == 6) {
                std::vector<Pmf> dists{Pmf({0.65, 0.35}), Pmf({0.43, 0.32, 0.25})};
                std::vector<double> grid = detail::geomspace(1e-4, std::pow(10.0, 1.5), 50);
                Table t{{"pmf", "gamma", "alpha_star", "alpha_asymptotic", "abs_gap"}, {}};
                for (const Pmf& p : dists) {
                    std::string label = detail::pmf_label(p);
                    for (double g : grid) {
                        MinimizerResult res = solve_minimizer(FocusParam{g}, p);
                        double approx = alpha_asymptotic(FocusParam{g}, p);
                        t.rows.push_back({detail::text(label), detail::num(g), detail::num(res.alpha_star),
                                          detail::num(approx), detail::num(std::fabs(res.alpha_star - approx))});
                    }
                }
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else if (figure == 9) {
                std::vector<double> grid = detail::linspace(0.1, 5.0, 20);
                Table t{{"gamma", "q_gamma", "p_star_1", "q_gamma_plus1", "gap_bound"}, {}};
                for (double g : grid) {
                    BinaryBoundsResult b = binary_bounds(FocusParam{g}, 0.05);
                    t.rows.push_back({detail::num(g), detail::num(b.q_gamma), detail::num(b.p_star_1),
                                      detail::num(b.q_gamma_plus1), detail::num(b.gap_bound)});
                }
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else if (figure == 10) {
                Pmf p({0.4, 0.58, 0.02});
                std::vector<Pmf> qs{Pmf({0.2, 0.02, 0.78}), Pmf({0.2, 0.78, 0.02})};
                std::vector<double> grid = detail::geomspace(0.1, 100.0, 50);
                Table t{{"q", "gamma", "value"}, {}};
                for (const Pmf& q : qs) {
                    std::string label = detail::pmf_label(q);
                    for (auto [g, v] : limit_diagnostic(p, q, grid)) {
                        t.rows.push_back({detail::text(label), detail::num(g), detail::num(v)});
                    }
                }
                artifact = format == "csv" ? detail::to_csv(t) : detail::to_json_rows(t) + "\n";
            } else {
                throw detail::UsageError("figure: unknown figure number " + std::to_string(figure));
            }
        } else if (c_train_syn->parsed() || c_train_mnist->parsed()) {
            pick_format("json");
            TrainConfig cfg;
            cfg.gamma = o.gamma;
            cfg.seed = o.seed;
            cfg.epochs = o.epochs;
            cfg.batch_size = o.batch;
            cfg.hidden_width = o.hidden;
            cfg.learning_rate = o.lr;

            BinnedDataset data;
            bool synthetic = c_train_syn->parsed();
            SyntheticSpec spec;
            if (synthetic) {
                spec.sample_count = o.samples;
                spec.seed = o.seed;
                data = sample_synthetic(spec);
            } else {
                data = ingest_mnist(o.images, o.labels);
            }
            if (verbose) {
                err << (synthetic ? "train-synthetic" : "train-mnist") << ": rows=" << data.rows.size()
                    << " seed=" << o.seed << " gamma=" << format_double(o.gamma) << "\n";
            }
            TrainRun run = train_classifier(data, cfg);
            if (verbose) {
                for (std::size_t e = 0; e < run.loss_trajectory.size(); ++e) {
                    err << "  epoch " << e << " loss " << format_double(run.loss_trajectory[e]) << "\n";
                }
            }
            PosteriorTable theory_emp = theory_table(FocusParam{o.gamma}, data.posterior);
            CompareResult vs_emp = compare_posteriors(run.learned, data.posterior, data.counts, o.threshold);
            CompareResult vs_theory_emp = compare_posteriors(run.learned, theory_emp, data.counts, o.threshold);

            long class0 = 0;
            for (const auto& r : data.rows) class0 += r.c == 0;

            if (format == "csv") {
                std::string comment = "seed=" + std::to_string(o.seed) + " gamma=" + format_double(o.gamma) +
                                      " table=" + o.table;
                const PosteriorTable* tbl = &run.learned;
                if (o.table == "empirical") tbl = &data.posterior;
                if (o.table == "theory") tbl = &theory_emp;
                PosteriorTable exact{};
                if (o.table == "exact") {
                    if (!synthetic) throw detail::UsageError("--table exact: only available for train-synthetic");
                    exact = synthetic_posterior(spec);
                    tbl = &exact;
                }
                artifact = detail::posterior_csv(*tbl, data.counts, comment);
            } else {
                artifact = "{\"config\":{\"gamma\":" + detail::jnum(cfg.gamma) +
                           ",\"hidden_width\":" + std::to_string(cfg.hidden_width) +
                           ",\"learning_rate\":" + detail::jnum(cfg.learning_rate) +
                           ",\"batch_size\":" + std::to_string(cfg.batch_size) +
                           ",\"epochs\":" + std::to_string(cfg.epochs) +
                           ",\"seed\":" + std::to_string(cfg.seed) +
                           ",\"beta1\":" + detail::jnum(cfg.beta1) + ",\"beta2\":" + detail::jnum(cfg.beta2) +
                           ",\"epsilon\":" + detail::jnum(cfg.epsilon) +
                           (synthetic ? ",\"sample_count\":" + std::to_string(spec.sample_count) : std::string()) +
                           "},\"rows\":" + std::to_string(data.rows.size()) +
                           ",\"class0_count\":" + std::to_string(class0) +
                           ",\"class1_count\":" + std::to_string(static_cast<long>(data.rows.size()) - class0) +
                           ",\"counts\":[";
                for (int b = 0; b < 16; ++b) {
                    if (b) artifact += ',';
                    artifact += std::to_string(data.counts[b]);
                }
                artifact += "],\"learned\":" + detail::posterior_json(run.learned) +
                            ",\"empirical\":" + detail::posterior_json(data.posterior) +
                            ",\"theory_of_empirical\":" + detail::posterior_json(theory_emp);
                if (synthetic) {
                    PosteriorTable exact = synthetic_posterior(spec);
                    PosteriorTable theory_exact = theory_table(FocusParam{o.gamma}, exact);
                    CompareResult vs_theory_exact =
                        compare_posteriors(run.learned, theory_exact, data.counts, o.threshold);
                    artifact += ",\"exact\":" + detail::posterior_json(exact) +
                                ",\"theory_of_exact\":" + detail::posterior_json(theory_exact) +
                                ",\"gap_vs_theory_of_exact\":" + detail::jnum(vs_theory_exact.max_abs_gap);
                }
                artifact += ",\"gap_vs_theory_of_empirical\":" + detail::jnum(vs_theory_emp.max_abs_gap) +
                            ",\"gap_vs_empirical\":" + detail::jnum(vs_emp.max_abs_gap) +
                            ",\"comparison_threshold\":" + std::to_string(o.threshold) +
                            ",\"loss_trajectory\":" + detail::jnum_array(run.loss_trajectory) + "}\n";
            }
        }

        if (!o.output.empty()) {
            write_file(o.output, artifact);
        } else {
            out << artifact;
        }
        return 0;
    } catch (const detail::UsageError& e) {
        err << "focal: " << e.what() << "\n";
        return 64;
    } catch (const ConvergenceError& e) {
        err << "{\"error\":\"convergence\",\"message\":\"" << json_escape(e.what()) << "\",\"residual\":"
            << detail::jnum(e.residual()) << ",\"iterations\":" << e.iterations() << "}\n";
        return 2;
    } catch (const std::exception& e) {
        err << "{\"error\":\"failure\",\"message\":\"" << json_escape(e.what()) << "\"}\n";
        return 2;
    }
}

}  // namespace cli
}  // namespace focal
