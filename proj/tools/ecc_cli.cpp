// ecc: event conditional correlation toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data or estimation error.
// All numeric output uses 9 significant digits. Stochastic subcommands take
// the seed from --seed or, failing that, the ECC_SEED environment variable.

#include "eventcorr/csv.hpp"
#include "eventcorr/deptest.hpp"
#include "eventcorr/estimators.hpp"
#include "eventcorr/inference.hpp"
#include "eventcorr/mc.hpp"
#include "eventcorr/network.hpp"
#include "eventcorr/regression.hpp"
#include "eventcorr/rng.hpp"
#include "eventcorr/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using ecc::format_number;
using json = nlohmann::ordered_json;

// Round-trips through the 9-significant-digit text form so JSON numbers obey
// the same output contract as CSV cells.
json json_num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return json(std::stod(format_number(v)));
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("ECC_SEED")) {
        try {
            std::size_t pos = 0;
            const std::string text(env);
            const std::uint64_t value = std::stoull(text, &pos);
            if (pos == text.size()) return value;
        } catch (const std::exception&) {
        }
        throw CLI::ValidationError("--seed", "ECC_SEED is not an unsigned integer");
    }
    throw CLI::ValidationError("--seed", "required: pass --seed or set ECC_SEED");
}

ecc::Table read_table(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return ecc::read_csv_text(buf.str(), "<stdin>");
    }
    return ecc::read_csv(path);
}

void emit_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ecc::Error("cannot open output file: " + path);
    out << text;
    if (!out.good()) throw ecc::Error("write failed: " + path);
}

void emit_json(const json& j, const std::string& path) { emit_text(j.dump(2) + "\n", path); }

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

Eigen::Index column_or_throw(const ecc::Table& table, const std::string& name) {
    const Eigen::Index idx = table.column_index(name);
    if (idx < 0) throw ecc::DimensionMismatchError("column not found: " + name);
    return idx;
}

struct RoleNames {
    std::string x = "x";
    std::string y = "y";
    std::string z = "z";
    std::string z2; // empty = same as z
};

ecc::Sample sample_from(const ecc::Table& table, const RoleNames& roles) {
    ecc::Sample s;
    s.data = table.data;
    s.columns = table.columns;
    s.roles.x = column_or_throw(table, roles.x);
    s.roles.y = column_or_throw(table, roles.y);
    for (const std::string& name : split_names(roles.z))
        s.roles.z1.push_back(column_or_throw(table, name));
    const std::string z2 = roles.z2.empty() ? roles.z : roles.z2;
    for (const std::string& name : split_names(z2))
        s.roles.z2.push_back(column_or_throw(table, name));
    s.validate();
    return s;
}

void add_role_flags(CLI::App* sub, RoleNames& roles, bool with_z2 = true) {
    sub->add_option("--x", roles.x, "X column name")->capture_default_str();
    sub->add_option("--y", roles.y, "Y column name")->capture_default_str();
    sub->add_option("--z", roles.z, "covariate column name(s), comma separated")
        ->capture_default_str();
    if (with_z2) sub->add_option("--z2", roles.z2, "second covariate block (default: same as --z)");
}

json estimate_json(const ecc::EccEstimate& est) {
    json j;
    j["rho"] = json_num(est.rho);
    j["se"] = est.se ? json_num(*est.se) : json(nullptr);
    if (est.ci) {
        j["ci_lo"] = json_num(est.ci->first);
        j["ci_hi"] = json_num(est.ci->second);
    } else {
        j["ci_lo"] = nullptr;
        j["ci_hi"] = nullptr;
    }
    j["n_total"] = static_cast<long>(est.n_total);
    j["n_event"] = static_cast<long>(est.n_event);
    j["method"] = ecc::to_string(est.method);
    j["clamped"] = est.clamped;
    return j;
}

ecc::MomentStrategy strategy_from(const std::string& name) {
    return name == "gaussian-model" ? ecc::MomentStrategy::gaussian_model
                                    : ecc::MomentStrategy::empirical;
}

// ---------------------------------------------------------------- estimate

struct EstimateOpts {
    std::string input;
    std::string output;
    RoleNames roles;
    std::string event = "all";
    std::string strategy = "empirical";
    std::string se = "delta";
    double level = 0.95;
    int boot = 400;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
};

void run_estimate(const EstimateOpts& opt) {
    const ecc::Table table = read_table(opt.input);
    const ecc::Sample sample = sample_from(table, opt.roles);
    const ecc::EventSpec event = ecc::EventSpec::parse(opt.event);
    ecc::EccEstimate est = ecc::ecc_estimate(sample, event, strategy_from(opt.strategy));
    if (opt.se == "delta") {
        const ecc::ThetaBundle tb = ecc::theta_bundle(sample, event);
        est.se = ecc::delta_method_se(tb);
        const ecc::CI ci = ecc::delta_ci(tb, opt.level);
        est.ci = {ci.lo, ci.hi};
    } else if (opt.se == "boot") {
        const std::uint64_t seed = resolve_seed(opt.seed);
        const std::string strategy = opt.strategy;
        auto point = [strategy](const ecc::Sample& s, const ecc::EventSpec& e) {
            return ecc::ecc_estimate(s, e, strategy_from(strategy)).rho;
        };
        const ecc::CI ci =
            ecc::bootstrap_ci(sample, event, point, opt.boot, opt.level, seed, opt.threads);
        est.ci = {ci.lo, ci.hi};
    }
    json j = estimate_json(est);
    j["event"] = event.to_text();
    j["strategy"] = opt.strategy;
    j["se_method"] = opt.se;
    if (opt.se != "none") j["level"] = json_num(opt.level);
    emit_json(j, opt.output);
}

void setup_estimate(CLI::App& app) {
    auto opt = std::make_shared<EstimateOpts>();
    auto* sub = app.add_subcommand(
        "estimate", "Correlation of X and Y conditional on an event, with uncertainty");
    sub->add_option("--input", opt->input, "CSV with a header row (- for stdin)")->required();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    add_role_flags(sub, opt->roles);
    sub->add_option("--event", opt->event, "event, e.g. all | gt:z:1.5 | band:z:0.4:0.1")
        ->capture_default_str();
    sub->add_option("--strategy", opt->strategy, "conditional covariate moments")
        ->check(CLI::IsMember({"empirical", "gaussian-model"}))
        ->capture_default_str();
    sub->add_option("--se", opt->se, "uncertainty method (delta needs a scalar covariate)")
        ->check(CLI::IsMember({"delta", "boot", "none"}))
        ->capture_default_str();
    sub->add_option("--level", opt->level, "confidence level")->capture_default_str();
    sub->add_option("--boot", opt->boot, "bootstrap replicates for --se boot")
        ->capture_default_str();
    sub->add_option("--seed", opt->seed, "RNG seed (--se boot)");
    sub->add_option("--threads", opt->threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    sub->callback([opt]() { run_estimate(*opt); });
}

// ------------------------------------------------------------------ implied

struct ImpliedOpts {
    std::string input;
    std::string output;
    RoleNames roles;
    std::optional<double> sigma_z;
    std::string sigma_z_file;
    std::optional<double> mle_lo;
    std::optional<double> mle_hi;
};

void run_implied(const ImpliedOpts& opt) {
    const int sources = (opt.sigma_z ? 1 : 0) + (opt.sigma_z_file.empty() ? 0 : 1) +
                        (opt.mle_lo || opt.mle_hi ? 1 : 0);
    if (sources != 1)
        throw CLI::ValidationError(
            "implied", "give exactly one source: --sigma-z, --sigma-z-file, or --mle-lo/--mle-hi");
    ecc::MomentSource source;
    std::string source_name;
    if (opt.sigma_z) {
        source = ecc::MomentSource::asserted_scalar(*opt.sigma_z);
        source_name = "asserted";
    } else if (!opt.sigma_z_file.empty()) {
        const ecc::Table cov = read_table(opt.sigma_z_file);
        source = ecc::MomentSource::asserted(cov.data);
        source_name = "asserted";
    } else {
        if (!opt.mle_lo || !opt.mle_hi)
            throw CLI::ValidationError("implied", "--mle-lo and --mle-hi must be given together");
        source = ecc::MomentSource::truncated_mle(*opt.mle_lo, *opt.mle_hi);
        source_name = "truncated-mle";
    }
    const ecc::Table table = read_table(opt.input);
    const ecc::Sample sample = sample_from(table, opt.roles);
    const ecc::EccEstimate est = ecc::implied_unconditional(sample, source);
    json j = estimate_json(est);
    j["source"] = source_name;
    emit_json(j, opt.output);
}

void setup_implied(CLI::App& app) {
    auto opt = std::make_shared<ImpliedOpts>();
    auto* sub = app.add_subcommand(
        "implied", "Unconditional correlation implied by an event-restricted sample");
    sub->add_option("--input", opt->input, "CSV whose rows all satisfy the event (- for stdin)")
        ->required();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    add_role_flags(sub, opt->roles, false);
    sub->add_option("--sigma-z", opt->sigma_z, "asserted unconditional variance (scalar covariate)");
    sub->add_option("--sigma-z-file", opt->sigma_z_file,
                    "CSV with the asserted q x q covariate covariance");
    sub->add_option("--mle-lo", opt->mle_lo, "event interval lower bound (truncated-normal MLE)");
    sub->add_option("--mle-hi", opt->mle_hi, "event interval upper bound (truncated-normal MLE)");
    sub->callback([opt]() { run_implied(*opt); });
}

// ---------------------------------------------------------------- transport

struct TransportOpts {
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    std::optional<double> delta_tilde;
    std::optional<double> var_from;
    std::optional<double> var_to;
    std::string output;
};

void run_transport(const TransportOpts& opt) {
    double dt = 0.0;
    if (opt.delta_tilde) {
        if (opt.var_from || opt.var_to)
            throw CLI::ValidationError("transport",
                                       "give --delta-tilde or --var-from/--var-to, not both");
        dt = *opt.delta_tilde;
    } else if (opt.var_from && opt.var_to) {
        if (!(*opt.var_from > 0.0))
            throw CLI::ValidationError("transport", "--var-from must be positive");
        dt = *opt.var_to / *opt.var_from - 1.0;
    } else {
        throw CLI::ValidationError("transport",
                                   "give --delta-tilde or both --var-from and --var-to");
    }
    ecc::CorrelationParams params{opt.rho_xy, opt.rho_xz, opt.rho_yz, 0.0};
    const double rho = ecc::transport(params, dt);
    json j;
    j["rho_xy"] = json_num(opt.rho_xy);
    j["rho_xz"] = json_num(opt.rho_xz);
    j["rho_yz"] = json_num(opt.rho_yz);
    j["delta_tilde"] = json_num(dt);
    j["rho_transported"] = json_num(rho);
    emit_json(j, opt.output);
}

void setup_transport(CLI::App& app) {
    auto opt = std::make_shared<TransportOpts>();
    auto* sub = app.add_subcommand(
        "transport", "Move a conditional correlation to another conditioning event");
    sub->add_option("--rho-xy", opt->rho_xy, "conditional correlation of X and Y")->required();
    sub->add_option("--rho-xz", opt->rho_xz, "conditional correlation of X and Z")->required();
    sub->add_option("--rho-yz", opt->rho_yz, "conditional correlation of Y and Z")->required();
    sub->add_option("--delta-tilde", opt->delta_tilde, "var(Z|A')/var(Z|A) - 1");
    sub->add_option("--var-from", opt->var_from, "var(Z|A)");
    sub->add_option("--var-to", opt->var_to, "var(Z|A')");
    sub->add_option("--output", opt->output, "output path (default stdout)");
    sub->callback([opt]() { run_transport(*opt); });
}

// -------------------------------------------------------------------- curve

struct CurveOpts {
    std::string input;
    std::string output;
    RoleNames roles;
    double width = 0.1;
    double level = 0.95;
    std::string strategy = "empirical";
    std::string se = "delta";
};

void run_curve(const CurveOpts& opt) {
    const ecc::Table table = read_table(opt.input);
    const ecc::Sample sample = sample_from(table, opt.roles);
    if (sample.roles.z1.size() != 1 || sample.roles.z1 != sample.roles.z2)
        throw ecc::DimensionMismatchError("curve needs a single scalar covariate");
    const Eigen::VectorXd z = sample.data.col(sample.roles.z1[0]);
    const auto bands = ecc::decile_sweep(opt.roles.z, opt.width);
    ecc::Table out;
    out.columns = {"band", "z_lo", "z_hi", "n_event", "estimate", "se", "ci_lo", "ci_hi"};
    out.data.resize(static_cast<Eigen::Index>(bands.size()), 8);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < bands.size(); ++k) {
        const auto& [upper, event] = bands[k];
        const ecc::EccEstimate est =
            ecc::ecc_estimate(sample, event, strategy_from(opt.strategy));
        double se = nan, lo = nan, hi = nan;
        if (opt.se == "delta") {
            const ecc::ThetaBundle tb = ecc::theta_bundle(sample, event);
            se = ecc::delta_method_se(tb);
            const ecc::CI ci = ecc::delta_ci(tb, opt.level);
            lo = ci.lo;
            hi = ci.hi;
        }
        const auto r = static_cast<Eigen::Index>(k);
        out.data(r, 0) = static_cast<double>(k + 1);
        out.data(r, 1) = ecc::quantile_type7(z, upper - opt.width);
        out.data(r, 2) = ecc::quantile_type7(z, upper);
        out.data(r, 3) = static_cast<double>(est.n_event);
        out.data(r, 4) = est.rho;
        out.data(r, 5) = se;
        out.data(r, 6) = lo;
        out.data(r, 7) = hi;
    }
    emit_text(ecc::to_csv_text(out), opt.output);
}

void setup_curve(CLI::App& app) {
    auto opt = std::make_shared<CurveOpts>();
    auto* sub = app.add_subcommand(
        "curve", "Conditional correlation across quantile bands of the covariate");
    sub->add_option("--input", opt->input, "CSV with a header row (- for stdin)")->required();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    add_role_flags(sub, opt->roles, false);
    sub->add_option("--width", opt->width, "band width in quantile units")->capture_default_str();
    sub->add_option("--level", opt->level, "confidence level")->capture_default_str();
    sub->add_option("--strategy", opt->strategy, "conditional covariate moments")
        ->check(CLI::IsMember({"empirical", "gaussian-model"}))
        ->capture_default_str();
    sub->add_option("--se", opt->se, "per-band uncertainty")
        ->check(CLI::IsMember({"delta", "none"}))
        ->capture_default_str();
    sub->callback([opt]() { run_curve(*opt); });
}

// -------------------------------------------------------------------- synth

struct SynthOpts {
    std::string family = "gaussian-scale";
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    double eta = 1.0;
    Eigen::Index n = 1000;
    std::optional<std::uint64_t> seed;
    std::string output;
    bool panel = false;
    Eigen::Index p = 8;
    double quantile = 0.75;
    bool contagion = false;
    std::string residuals_out;
    std::string covariates_out;
};

void run_synth(const SynthOpts& opt) {
    const std::uint64_t seed = resolve_seed(opt.seed);
    if (opt.panel) {
        if (opt.residuals_out.empty() || opt.covariates_out.empty())
            throw CLI::ValidationError("synth",
                                       "--panel needs --residuals-out and --covariates-out");
        ecc::PanelSpec spec;
        spec.n = opt.n;
        spec.p = opt.p;
        spec.crisis_quantile = opt.quantile;
        spec.contagion = opt.contagion;
        spec.seed = seed;
        const ecc::Panel panel = ecc::one_factor_panel(spec);
        ecc::Table res;
        res.columns = panel.names;
        res.data = panel.residuals;
        res.label_column = panel.dates;
        res.label_name = "date";
        ecc::write_csv(opt.residuals_out, res);
        ecc::Table cov;
        cov.columns = panel.covariate_names;
        cov.data = panel.covariates;
        cov.label_column = panel.dates;
        cov.label_name = "date";
        ecc::write_csv(opt.covariates_out, cov);
        return;
    }
    ecc::GenSpec spec;
    spec.family = ecc::family_from_string(opt.family);
    spec.rho_xy = opt.rho_xy;
    spec.rho_xz = opt.rho_xz;
    spec.rho_yz = opt.rho_yz;
    spec.eta = opt.eta;
    spec.n = opt.n;
    spec.seed = seed;
    const ecc::Sample sample = ecc::generate(spec);
    ecc::Table out;
    out.columns = {"x", "y", "z"};
    out.data = sample.data;
    emit_text(ecc::to_csv_text(out), opt.output);
}

void setup_synth(CLI::App& app) {
    auto opt = std::make_shared<SynthOpts>();
    auto* sub = app.add_subcommand("synth", "Seeded synthetic samples and panels");
    sub->add_option("--family", opt->family, "generator family")
        ->check(CLI::IsMember({"gaussian-scale", "student-t", "gaussian-chisq-mixture"}))
        ->capture_default_str();
    sub->add_option("--rho-xy", opt->rho_xy, "underlying correlation of x and y")
        ->capture_default_str();
    sub->add_option("--rho-xz", opt->rho_xz, "underlying correlation of x and z")
        ->capture_default_str();
    sub->add_option("--rho-yz", opt->rho_yz, "underlying correlation of y and z")
        ->capture_default_str();
    sub->add_option("--eta", opt->eta, "family parameter (variance or dof)")
        ->capture_default_str();
    sub->add_option("--n", opt->n, "rows")->capture_default_str();
    sub->add_option("--seed", opt->seed, "RNG seed");
    sub->add_option("--output", opt->output, "output path (default stdout)");
    sub->add_flag("--panel", opt->panel, "emit a one-factor panel instead of an (x,y,z) sample");
    sub->add_option("--p", opt->p, "panel components (--panel)")->capture_default_str();
    sub->add_option("--quantile", opt->quantile, "crisis quantile used for contagion (--panel)")
        ->capture_default_str();
    sub->add_flag("--contagion", opt->contagion, "inject a crisis-only shared shock (--panel)");
    sub->add_option("--residuals-out", opt->residuals_out, "panel residuals CSV path (--panel)");
    sub->add_option("--covariates-out", opt->covariates_out, "panel covariates CSV path (--panel)");
    sub->callback([opt]() { run_synth(*opt); });
}

// ----------------------------------------------------------------------- mc

struct McOpts {
    std::string task = "curve";
    std::string family = "gaussian-scale";
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    double eta = 1.0;
    std::string sizes = "250,500,1000,2000";
    int reps = 200;
    std::string strategy = "empirical";
    std::string source = "asserted";
    double width = 0.1;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    Eigen::Index oracle_draws = 10000000;
    std::string output;
};

std::vector<Eigen::Index> parse_sizes(const std::string& csv) {
    std::vector<Eigen::Index> out;
    for (const std::string& item : split_names(csv)) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(item, &pos);
            if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
            out.push_back(static_cast<Eigen::Index>(v));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--sizes", "not a positive integer list: " + csv);
        }
    }
    return out;
}

void run_mc(const McOpts& opt) {
    ecc::StudySpec spec;
    spec.task = opt.task == "implied" ? ecc::StudySpec::Task::implied_unconditional
                                      : ecc::StudySpec::Task::ecc_curve;
    spec.family = ecc::family_from_string(opt.family);
    spec.rho_xy = opt.rho_xy;
    spec.rho_xz = opt.rho_xz;
    spec.rho_yz = opt.rho_yz;
    spec.eta = opt.eta;
    spec.sample_sizes = parse_sizes(opt.sizes);
    spec.replications = opt.reps;
    spec.strategy = strategy_from(opt.strategy);
    spec.implied_source = opt.source == "mle" ? ecc::MomentSource::Kind::truncated_mle
                                              : ecc::MomentSource::Kind::asserted;
    spec.band_width = opt.width;
    spec.seed = resolve_seed(opt.seed);
    spec.threads = opt.threads;
    spec.oracle_draws = opt.oracle_draws;
    const ecc::StudyResult result = ecc::run_study(spec);
    const std::string theta = "(" + format_number(opt.rho_xy) + "," + format_number(opt.rho_xz) +
                              "," + format_number(opt.rho_yz) + "," + format_number(opt.eta) + ")";
    std::ostringstream out;
    out << "family,theta,method,n,rmse,replications,seed\n";
    for (const ecc::StudyCell& cell : result.cells) {
        out << opt.family << "," << theta << "," << ecc::to_string(cell.method) << "," << cell.n
            << "," << format_number(cell.rmse) << "," << opt.reps << "," << spec.seed << "\n";
    }
    emit_text(out.str(), opt.output);
}

void setup_mc(CLI::App& app) {
    auto opt = std::make_shared<McOpts>();
    auto* sub = app.add_subcommand("mc", "Error study of the estimators across sample sizes");
    sub->add_option("--task", opt->task, "what each replicate estimates")
        ->check(CLI::IsMember({"curve", "implied"}))
        ->capture_default_str();
    sub->add_option("--family", opt->family, "generator family")
        ->check(CLI::IsMember({"gaussian-scale", "student-t", "gaussian-chisq-mixture"}))
        ->capture_default_str();
    sub->add_option("--rho-xy", opt->rho_xy, "underlying correlation of x and y")
        ->capture_default_str();
    sub->add_option("--rho-xz", opt->rho_xz, "underlying correlation of x and z")
        ->capture_default_str();
    sub->add_option("--rho-yz", opt->rho_yz, "underlying correlation of y and z")
        ->capture_default_str();
    sub->add_option("--eta", opt->eta, "family parameter")->capture_default_str();
    sub->add_option("--sizes", opt->sizes, "comma-separated sample sizes, increasing")
        ->capture_default_str();
    sub->add_option("--reps", opt->reps, "replications per size")->capture_default_str();
    sub->add_option("--strategy", opt->strategy, "conditional covariate moments")
        ->check(CLI::IsMember({"empirical", "gaussian-model"}))
        ->capture_default_str();
    sub->add_option("--source", opt->source, "unconditional moments for the implied task")
        ->check(CLI::IsMember({"asserted", "mle"}))
        ->capture_default_str();
    sub->add_option("--width", opt->width, "band width")->capture_default_str();
    sub->add_option("--seed", opt->seed, "RNG seed");
    sub->add_option("--threads", opt->threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    sub->add_option("--oracle-draws", opt->oracle_draws, "draws for Monte Carlo truth values")
        ->capture_default_str();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    sub->callback([opt]() { run_mc(*opt); });
}

// ------------------------------------------------------------------ regress

struct RegressOpts {
    std::string input;
    std::string output;
    std::string predictions;
    std::string x = "x";
    std::string y = "y";
    int bins = 20;
    Eigen::Index min_occupancy = 10;
};

void run_regress(const RegressOpts& opt) {
    const ecc::Table table = read_table(opt.input);
    const Eigen::VectorXd x = table.data.col(column_or_throw(table, opt.x));
    const Eigen::VectorXd y = table.data.col(column_or_throw(table, opt.y));
    const ecc::PiecewiseAffineFit fit = ecc::fit_piecewise(x, y, opt.bins, opt.min_occupancy);
    json j;
    j["requested_bins"] = fit.requested_bins;
    j["merges"] = fit.merges;
    json bins = json::array();
    for (const auto& b : fit.bins) {
        json jb;
        jb["lo"] = json_num(b.lo);
        jb["hi"] = json_num(b.hi);
        jb["mean_x"] = json_num(b.mean_x);
        jb["mean_y"] = json_num(b.mean_y);
        jb["rho"] = json_num(b.rho);
        jb["slope"] = json_num(b.slope);
        jb["count"] = static_cast<long>(b.count);
        bins.push_back(jb);
    }
    j["bins"] = bins;
    emit_json(j, opt.output);
    if (!opt.predictions.empty()) {
        ecc::Table out;
        out.columns = {"x", "fit", "extrapolated"};
        out.data.resize(x.size(), 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            bool extrapolated = false;
            out.data(i, 0) = x(i);
            out.data(i, 1) = ecc::predict(fit, x(i), &extrapolated);
            out.data(i, 2) = extrapolated ? 1.0 : 0.0;
        }
        ecc::write_csv(opt.predictions, out);
    }
}

void setup_regress(CLI::App& app) {
    auto opt = std::make_shared<RegressOpts>();
    auto* sub = app.add_subcommand(
        "regress", "Piecewise-affine regression with corrected within-bin slopes");
    sub->add_option("--input", opt->input, "CSV with a header row (- for stdin)")->required();
    sub->add_option("--output", opt->output, "fit JSON path (default stdout)");
    sub->add_option("--predictions", opt->predictions, "per-row predictions CSV path");
    sub->add_option("--x", opt->x, "X column name")->capture_default_str();
    sub->add_option("--y", opt->y, "Y column name")->capture_default_str();
    sub->add_option("--bins", opt->bins, "equal-width bins over the observed x range")
        ->capture_default_str();
    sub->add_option("--min-occupancy", opt->min_occupancy, "smallest allowed bin size")
        ->capture_default_str();
    sub->callback([opt]() { run_regress(*opt); });
}

// ------------------------------------------------------------------ deptest

struct DeptestOpts {
    std::string input;
    std::string output;
    RoleNames roles;
    double sigma_z = 1.0;
    int perms = 2000;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
};

std::string csv_escape(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void run_deptest(const DeptestOpts& opt) {
    const ecc::Table table = read_table(opt.input);
    const ecc::Sample sample = sample_from(table, opt.roles);
    const std::uint64_t seed = resolve_seed(opt.seed);
    const std::vector<ecc::TestResult> results =
        ecc::run_tests(sample, opt.sigma_z, opt.perms, seed, opt.threads);
    std::ostringstream out;
    out << "test,statistic,p_value,failed,error\n";
    for (const ecc::TestResult& r : results) {
        out << ecc::to_string(r.test) << "," << format_number(r.statistic) << ","
            << format_number(r.p_value) << "," << (r.failed ? 1 : 0) << ","
            << csv_escape(r.error) << "\n";
    }
    emit_text(out.str(), opt.output);
}

void setup_deptest(CLI::App& app) {
    auto opt = std::make_shared<DeptestOpts>();
    auto* sub = app.add_subcommand(
        "deptest", "Dependence tests on an event-restricted sample, permutation p-values");
    sub->add_option("--input", opt->input, "CSV whose rows all satisfy the event (- for stdin)")
        ->required();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    add_role_flags(sub, opt->roles, false);
    sub->add_option("--sigma-z", opt->sigma_z, "asserted unconditional covariate variance")
        ->required();
    sub->add_option("--perms", opt->perms, "permutation count")->capture_default_str();
    sub->add_option("--seed", opt->seed, "RNG seed");
    sub->add_option("--threads", opt->threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    sub->callback([opt]() { run_deptest(*opt); });
}

// ------------------------------------------------------------------ network

struct NetworkOpts {
    std::string residuals;
    std::string covariates;
    std::string covariate;
    double quantile = 0.75;
    double delta_scale = 5.0;
    int bootstrap = 0;
    double level = 0.95;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool correct = false;
    std::string edges_out;
    std::string json_out;
};

void append_edges(std::ostringstream& out, const ecc::Network& net,
                  const std::vector<std::string>& names, const std::string& regime) {
    const Eigen::Index p = net.weights.rows();
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
            out << names[static_cast<std::size_t>(i)] << ","
                << names[static_cast<std::size_t>(j)] << "," << format_number(net.weights(i, j))
                << "," << regime << "\n";
}

json network_json(const ecc::Network& net, const ecc::Panel& panel) {
    const ecc::CentralityStats cs = ecc::eigenvector_centrality(net);
    json j;
    j["clip_magnitude"] = json_num(net.clip_magnitude);
    j["ridge"] = json_num(net.ridge);
    j["fallback_entries"] = net.fallback_entries;
    json scores;
    for (Eigen::Index i = 0; i < cs.scores.size(); ++i)
        scores[panel.names[static_cast<std::size_t>(i)]] = json_num(cs.scores(i));
    j["centrality"] = json{{"scores", scores}, {"mean", json_num(cs.mean)}, {"sd", json_num(cs.sd)}};
    return j;
}

json bootstrap_json(const ecc::CentralityBootstrap& bs, int draws) {
    json j;
    j["draws"] = draws;
    j["failures"] = bs.failures;
    j["level"] = json_num(bs.mean_ci.level);
    j["mean_ci"] = json::array({json_num(bs.mean_ci.lo), json_num(bs.mean_ci.hi)});
    j["sd_ci"] = json::array({json_num(bs.sd_ci.lo), json_num(bs.sd_ci.hi)});
    return j;
}

void run_network(const NetworkOpts& opt) {
    const ecc::Table tab_res = read_table(opt.residuals);
    const ecc::Table tab_cov = read_table(opt.covariates);
    if (tab_res.rows() != tab_cov.rows())
        throw ecc::DimensionMismatchError("residual and covariate files have different row counts");
    if (!tab_res.label_column.empty() && !tab_cov.label_column.empty() &&
        tab_res.label_column != tab_cov.label_column)
        throw ecc::ParseError("covariate dates do not match residual dates");
    ecc::Panel panel;
    panel.residuals = tab_res.data;
    panel.names = tab_res.columns;
    panel.covariates = tab_cov.data;
    panel.covariate_names = tab_cov.columns;
    panel.dates = tab_res.label_column;
    Eigen::Index cov_col = 0;
    if (!opt.covariate.empty()) {
        cov_col = -1;
        for (std::size_t c = 0; c < panel.covariate_names.size(); ++c)
            if (panel.covariate_names[c] == opt.covariate) cov_col = static_cast<Eigen::Index>(c);
        if (cov_col < 0)
            throw ecc::DimensionMismatchError("covariate column not found: " + opt.covariate);
    }
    const auto [stable, crisis] = ecc::split_regimes(panel, cov_col, opt.quantile);
    const double target = ecc::counterfactual_target_variance(panel, stable, crisis, cov_col,
                                                              opt.delta_scale);
    if (!(target > 0.0)) {
        std::ostringstream msg;
        msg << "counterfactual variance " << format_number(target) << " at --delta-scale "
            << format_number(opt.delta_scale)
            << " is not positive; the crisis covariate variance sits below the stable one, "
               "so lower --delta-scale";
        throw ecc::DegenerateConditioningError(msg.str());
    }
    const ecc::Network net_stable = ecc::regime_network(panel, stable, ecc::Regime::stable);
    const ecc::Network net_crisis = ecc::regime_network(panel, crisis, ecc::Regime::crisis);
    const ecc::Network net_cf = ecc::counterfactual_network(panel, stable, cov_col, target);

    json j;
    j["n"] = static_cast<long>(panel.n());
    j["p"] = static_cast<long>(panel.p());
    j["covariate"] = panel.covariate_names[static_cast<std::size_t>(cov_col)];
    j["quantile"] = json_num(opt.quantile);
    j["n_stable"] = static_cast<long>(ecc::count_mask(stable));
    j["n_crisis"] = static_cast<long>(ecc::count_mask(crisis));
    j["delta_scale"] = json_num(opt.delta_scale);
    j["target_variance"] = json_num(target);
    json nets;
    nets["stable"] = network_json(net_stable, panel);
    nets["crisis"] = network_json(net_crisis, panel);
    nets["counterfactual"] = network_json(net_cf, panel);

    std::ostringstream edges;
    edges << "i,j,weight,regime\n";
    append_edges(edges, net_stable, panel.names, "stable");
    append_edges(edges, net_crisis, panel.names, "crisis");
    append_edges(edges, net_cf, panel.names, "counterfactual");

    if (opt.correct) {
        const ecc::MomentSource source =
            ecc::MomentSource::asserted(ecc::covariance_matrix(panel.covariates));
        const ecc::Network cor_stable =
            ecc::corrected_network(panel, stable, source, ecc::Regime::stable);
        const ecc::Network cor_crisis =
            ecc::corrected_network(panel, crisis, source, ecc::Regime::crisis);
        nets["stable_corrected"] = network_json(cor_stable, panel);
        nets["crisis_corrected"] = network_json(cor_crisis, panel);
        append_edges(edges, cor_stable, panel.names, "stable-corrected");
        append_edges(edges, cor_crisis, panel.names, "crisis-corrected");
    }

    if (opt.bootstrap > 0) {
        const std::uint64_t seed = resolve_seed(opt.seed);
        const std::uint64_t s0 = ecc::derived_engine(seed, 0)();
        const std::uint64_t s1 = ecc::derived_engine(seed, 1)();
        const std::uint64_t s2 = ecc::derived_engine(seed, 2)();
        const ecc::CentralityBootstrap bs_stable = ecc::bootstrap_centrality(
            panel, stable, ecc::Regime::stable, opt.bootstrap, opt.level, s0, opt.threads);
        const ecc::CentralityBootstrap bs_crisis = ecc::bootstrap_centrality(
            panel, crisis, ecc::Regime::crisis, opt.bootstrap, opt.level, s1, opt.threads);
        auto build_cf = [cov_col, target](const ecc::Panel& sub) {
            const std::vector<bool> all(static_cast<std::size_t>(sub.n()), true);
            return ecc::counterfactual_network(sub, all, cov_col, target);
        };
        const ecc::CentralityBootstrap bs_cf = ecc::bootstrap_centrality(
            panel, stable, build_cf, opt.bootstrap, opt.level, s2, opt.threads);
        nets["stable"]["bootstrap"] = bootstrap_json(bs_stable, opt.bootstrap);
        nets["crisis"]["bootstrap"] = bootstrap_json(bs_crisis, opt.bootstrap);
        nets["counterfactual"]["bootstrap"] = bootstrap_json(bs_cf, opt.bootstrap);
    }
    j["networks"] = nets;

    if (!opt.edges_out.empty()) emit_text(edges.str(), opt.edges_out);
    emit_json(j, opt.json_out);
}

void setup_network(CLI::App& app) {
    auto opt = std::make_shared<NetworkOpts>();
    auto* sub = app.add_subcommand(
        "network", "Regime-split partial-correlation networks with centrality statistics");
    sub->add_option("--residuals", opt->residuals, "CSV: date column + one column per component")
        ->required();
    sub->add_option("--covariates", opt->covariates, "CSV: date column + covariate columns")
        ->required();
    sub->add_option("--covariate", opt->covariate, "conditioning covariate (default: first)");
    sub->add_option("--quantile", opt->quantile, "crisis threshold quantile")
        ->capture_default_str();
    sub->add_option("--delta-scale", opt->delta_scale,
                    "counterfactual variance step in units of (crisis - stable)")
        ->capture_default_str();
    sub->add_option("--bootstrap", opt->bootstrap, "centrality bootstrap replicates (0 = off)")
        ->capture_default_str();
    sub->add_option("--level", opt->level, "bootstrap confidence level")->capture_default_str();
    sub->add_option("--seed", opt->seed, "RNG seed (--bootstrap)");
    sub->add_option("--threads", opt->threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    sub->add_flag("--correct", opt->correct,
                  "also emit regime networks on sampling-corrected correlation matrices");
    sub->add_option("--edges-out", opt->edges_out, "edge list CSV path");
    sub->add_option("--json-out", opt->json_out, "summary JSON path (default stdout)");
    sub->callback([opt]() { run_network(*opt); });
}

// ----------------------------------------------------------------- diagnose

struct DiagnoseOpts {
    std::string input;
    std::string output;
    RoleNames roles;
    std::string event = "all";
};

json r_vector_json(const ecc::Sample& sample, Eigen::Index target,
                   const std::vector<bool>& mask) {
    try {
        const std::vector<Eigen::Index>& zc = sample.roles.z1;
        const auto q = static_cast<Eigen::Index>(zc.size());
        Eigen::VectorXd rho_cond(q), var_cond(q), var_uncond(q);
        std::vector<Eigen::Index> cols{target};
        cols.insert(cols.end(), zc.begin(), zc.end());
        const Eigen::MatrixXd sub = sample.block(cols);
        const Eigen::MatrixXd cov_all = ecc::covariance_matrix(sub);
        const Eigen::MatrixXd cov_evt = ecc::covariance_matrix(sub, mask);
        for (Eigen::Index c = 0; c < q; ++c) {
            const double denom = std::sqrt(cov_evt(0, 0) * cov_evt(c + 1, c + 1));
            if (!(denom > 0.0))
                throw ecc::UndefinedStatisticError("constant column under the event");
            rho_cond(c) = cov_evt(0, c + 1) / denom;
            var_cond(c) = cov_evt(c + 1, c + 1);
            var_uncond(c) = cov_all(c + 1, c + 1);
        }
        const Eigen::VectorXd r = ecc::r_vector(rho_cond, var_cond, var_uncond);
        json arr = json::array();
        for (Eigen::Index c = 0; c < q; ++c) arr.push_back(json_num(r(c)));
        return arr;
    } catch (const ecc::Error&) {
        return nullptr;
    }
}

void run_diagnose(const DiagnoseOpts& opt) {
    const ecc::Table table = read_table(opt.input);
    const ecc::Sample sample = sample_from(table, opt.roles);
    const ecc::EventSpec event = ecc::EventSpec::parse(opt.event);
    const ecc::AssumptionDiagnostics diag = ecc::assumption_diagnostics(sample, event);
    const std::vector<bool> mask = ecc::event_mask(sample, event);

    std::vector<Eigen::Index> cols{sample.roles.x, sample.roles.y};
    for (Eigen::Index c : sample.roles.z1)
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    for (Eigen::Index c : sample.roles.z2)
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    const Eigen::MatrixXd sub = sample.block(cols);
    const ecc::CovarianceShiftSummary shift =
        ecc::covariance_shift(ecc::covariance_matrix(sub), ecc::covariance_matrix(sub, mask));

    json j;
    j["event"] = event.to_text();
    j["n"] = static_cast<long>(sample.n());
    j["n_event"] = static_cast<long>(ecc::count_mask(mask));
    j["event_mass"] =
        json_num(static_cast<double>(ecc::count_mask(mask)) / static_cast<double>(sample.n()));
    j["a1_gap"] = json_num(diag.a1_gap);
    j["a2_gap"] = json_num(diag.a2_gap);
    j["bias_bound_scale"] = json_num(diag.bias_bound_scale);
    json sv = json::array();
    for (Eigen::Index i = 0; i < shift.singular_values.size(); ++i)
        sv.push_back(json_num(shift.singular_values(i)));
    j["shift_singular_values"] = sv;
    j["shift_effective_rank"] = shift.effective_rank;
    j["covariate_dimension"] = static_cast<long>(sample.roles.z1.size());
    j["r_x"] = r_vector_json(sample, sample.roles.x, mask);
    j["r_y"] = r_vector_json(sample, sample.roles.y, mask);
    emit_json(j, opt.output);
}

void setup_diagnose(CLI::App& app) {
    auto opt = std::make_shared<DiagnoseOpts>();
    auto* sub = app.add_subcommand(
        "diagnose", "Working-assumption gaps and covariate shift structure under an event");
    sub->add_option("--input", opt->input, "CSV with a header row (- for stdin)")->required();
    sub->add_option("--output", opt->output, "output path (default stdout)");
    add_role_flags(sub, opt->roles);
    sub->add_option("--event", opt->event, "event, e.g. all | gt:z:1.5 | band:z:0.4:0.1")
        ->capture_default_str();
    sub->callback([opt]() { run_diagnose(*opt); });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event conditional correlation toolkit"};
    app.require_subcommand(1);
    setup_estimate(app);
    setup_implied(app);
    setup_transport(app);
    setup_curve(app);
    setup_synth(app);
    setup_mc(app);
    setup_regress(app);
    setup_deptest(app);
    setup_network(app);
    setup_diagnose(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ecc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
