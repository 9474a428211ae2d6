// SPDX-License-Identifier: Apache-2.0
//
// cfmimo command line: runs scenario campaigns and exports designs,
// pilot assignments, bound tables and asymptotic-vs-simulated comparisons.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfmimo/cfmimo.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cfmimo;

namespace
{
struct Common
{
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> drops;
    std::optional<std::size_t> blocks;
    std::string analog = "proposed";
    std::string pilots = "greedy";
    std::string out_dir = ".";
    std::size_t workers = 1;
    std::size_t drop = 0;
};

Scenario load(const Common& c)
{
    Scenario s = load_scenario_file(c.scenario);
    if (c.seed)
        s.seed = *c.seed;
    if (c.drops)
        s.drops = *c.drops;
    if (c.blocks)
        s.blocks = *c.blocks;
    s.validate();
    return s;
}

std::ofstream open_out(const Common& c, const std::string& name)
{
    fs::create_directories(c.out_dir);
    const fs::path p = fs::path(c.out_dir) / name;
    std::ofstream f(p);
    if (!f)
        throw ConfigError("cannot write " + p.string());
    f << std::setprecision(17);
    return f;
}

json provenance(const Scenario& s, const Common& c, const char* command)
{
    json j;
    j["command"] = command;
    j["scenario_path"] = c.scenario;
    j["seed"] = s.seed;
    j["config_hash"] = config_hash(s);
    j["versions"] = {{"cfmimo", version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
    return j;
}

void write_json(const Common& c, const std::string& name, const json& j)
{
    auto f = open_out(c, name);
    f << j.dump(2) << '\n';
}

int simulate(const Common& c, LinkMode mode)
{
    const Scenario s = load(c);
    ExperimentOptions o;
    o.mode = mode;
    o.analog = parse_analog_method(c.analog);
    o.pilots = parse_pilot_method(c.pilots);
    o.drops = s.drops;
    o.blocks = s.blocks;
    o.calibration_blocks = s.calibration_blocks;
    o.workers = c.workers;
    const ExperimentReport r = run_experiment(s, o);

    auto res = open_out(c, "results.csv");
    write_results_csv(res, r);
    auto cdf = open_out(c, "cdf.csv");
    write_cdf_csv(cdf, r.cdf);
    std::vector<double> rmt = r.se_rmt_samples;
    auto cdf_rmt = open_out(c, "cdf_rmt.csv");
    write_cdf_csv(cdf_rmt, cdf_summary(rmt));
    auto sum = open_out(c, "summary.csv");
    write_summary_csv(sum, r);

    json j = provenance(s, c, mode == LinkMode::uplink ? "simulate-ul" : "simulate-dl");
    j["analog"] = to_string(o.analog);
    j["pilots"] = to_string(o.pilots);
    j["drops"] = o.drops;
    j["blocks"] = o.blocks;
    j["calibration_blocks"] = o.calibration_blocks;
    j["failed_drops"] = json::array();
    std::size_t warnings = 0;
    for (std::size_t d = 0; d < r.drops.size(); ++d) {
        if (!r.drops[d].ok)
            j["failed_drops"].push_back({{"drop", d}, {"error", r.drops[d].error}});
        warnings += r.drops[d].warnings.size();
    }
    j["warnings"] = warnings;
    j["summary"] = {{"min_se", r.cdf.minimum}, {"outage_se", r.cdf.outage}, {"median_se", r.cdf.median}};
    write_json(c, "provenance.json", j);

    std::printf("min SE %.4f  5%%-outage SE %.4f  median SE %.4f  (%zu of %zu drops ok)\n", r.cdf.minimum,
                r.cdf.outage, r.cdf.median, r.drops.size() - r.failed, r.drops.size());
    return 0;
}

int design(const Common& c)
{
    const Scenario s = load(c);
    const Drop d = generate_drop(s, c.drop);
    const HybridDesign h = design_analog(parse_analog_method(c.analog), d.correlations, d.service, s.rf_chains,
                                         s.conv_tol);
    auto f = open_out(c, "design.csv");
    f << "ap,matrix,row,col,re,im\n";
    auto dump = [&](std::size_t m, const char* name, const CMat& X) {
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                f << m << ',' << name << ',' << i << ',' << j << ',' << X(i, j).real() << ',' << X(i, j).imag()
                  << '\n';
    };
    const auto chains = h.chains();
    for (std::size_t m = 0; m < h.aps.size(); ++m) {
        dump(m, "W_p", h.aps[m].W_p);
        dump(m, "W_hat", h.aps[m].W_hat);
        dump(m, "A", h.aps[m].A);
        dump(m, "F", h.aps[m].F);
        dump(m, "chain", chains[m]);
    }
    json j = provenance(s, c, "design-analog");
    j["analog"] = to_string(h.method);
    j["drop"] = c.drop;
    j["warnings"] = h.warnings;
    json iters = json::array();
    for (const auto& a : h.aps)
        iters.push_back({{"iterations", a.iterations}, {"converged", a.converged}, {"rank_guard", a.rank_guard}});
    j["aps"] = iters;
    write_json(c, "design.json", j);
    for (const auto& w : h.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

int pilots(const Common& c)
{
    const Scenario s = load(c);
    const PreparedDrop p = prepare_drop(s, c.drop, parse_analog_method(c.analog));
    const PilotOutcome po = choose_pilots(s, p, parse_pilot_method(c.pilots), c.drop);
    auto f = open_out(c, "pilots.csv");
    f << "ue,pilot_index\n";
    for (std::size_t k = 0; k < po.book.num_ues(); ++k)
        f << k << ',' << po.book.assignment[k] << '\n';
    auto t = open_out(c, "pilot_trace.csv");
    t << "sweep,min_sinr\n";
    for (std::size_t j = 0; j < po.trace.cost.size(); ++j)
        t << j << ',' << po.trace.cost[j] << '\n';
    json j = provenance(s, c, "assign-pilots");
    j["pilots"] = c.pilots;
    j["analog"] = c.analog;
    j["drop"] = c.drop;
    j["sweeps"] = po.trace.sweeps;
    j["converged"] = po.trace.converged;
    j["warnings"] = po.trace.warnings;
    write_json(c, "pilots.json", j);
    if (!po.trace.cost.empty())
        std::printf("min SINR %.6g -> %.6g in %zu sweeps\n", po.trace.cost.front(), po.trace.cost.back(),
                    po.trace.sweeps);
    return 0;
}

int bounds(const Common& c)
{
    const Scenario s = load(c);
    const PreparedDrop p = prepare_drop(s, c.drop, parse_analog_method(c.analog));
    const CorrelationSet& cs = p.drop.correlations;
    const double noise = s.noise_power();
    const RVec dig = mrc_digital_sinr(cs, s.ue_power, noise);
    const RVec hyb = mrc_asymptotic_sinr(cs, p.chains, s.ue_power, noise);
    const GapBounds g = gap_bounds(cs, s.rf_chains, s.ue_power, noise);
    const RVec res = mrc_residual_interference(cs, s.ue_power, noise);
    auto f = open_out(c, "bounds.csv");
    f << "ue,sinr_digital,sinr_hybrid,delta_lb,gap,delta_ub,residual_interference\n";
    for (Eigen::Index k = 0; k < dig.size(); ++k)
        f << k << ',' << dig(k) << ',' << hyb(k) << ',' << g.lower(k) << ',' << dig(k) - hyb(k) << ','
          << g.upper(k) << ',' << res(k) << '\n';
    json j = provenance(s, c, "bounds");
    j["analog"] = c.analog;
    j["drop"] = c.drop;
    write_json(c, "bounds.json", j);
    return 0;
}

int validate_rmt(const Common& c, const std::string& mode)
{
    const Scenario s = load(c);
    ExperimentOptions o;
    o.mode = mode == "dl" ? LinkMode::downlink : LinkMode::uplink;
    if (mode != "ul" && mode != "dl")
        throw ConfigError("mode out of range");
    o.analog = parse_analog_method(c.analog);
    o.pilots = parse_pilot_method(c.pilots);
    o.drops = s.drops;
    o.blocks = s.blocks;
    o.calibration_blocks = s.calibration_blocks;
    o.workers = c.workers;
    const ExperimentReport r = run_experiment(s, o);
    auto f = open_out(c, "validate_rmt.csv");
    f << "instance,exact,deterministic_equivalent,relative_gap\n";
    std::vector<double> gaps;
    for (const auto& d : r.drops)
        for (const auto& u : d.ues) {
            const double gap = std::abs(u.se - u.se_rmt) / u.se;
            gaps.push_back(gap);
            f << u.drop * s.num_ues + u.ue << ',' << u.se << ',' << u.se_rmt << ',' << gap << '\n';
        }
    json j = provenance(s, c, "validate-rmt");
    j["mode"] = mode;
    j["drops"] = o.drops;
    j["blocks"] = o.blocks;
    j["median_relative_gap"] = percentile(gaps, 0.5);
    write_json(c, "validate_rmt.json", j);
    std::printf("median relative SE gap %.4f over %zu UEs\n", percentile(gaps, 0.5), gaps.size());
    return 0;
}

// Rebuilds CDF tables and the summary from an existing results CSV.
int report(const Common& c, const std::string& input)
{
    std::ifstream in(input);
    if (!in)
        throw ConfigError("cannot read " + input);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        for (std::string h; std::getline(ss, h, ',');)
            head.push_back(h);
    }
    auto column = [&](const std::string& prefix) -> std::size_t {
        for (std::size_t i = 0; i < head.size(); ++i)
            if (head[i].rfind(prefix, 0) == 0 && head[i].find("stderr") == std::string::npos &&
                head[i].find("rmt") == std::string::npos)
                return i;
        throw ConfigError("results file has no " + prefix + " column");
    };
    const std::size_t se_col = column("se_");
    std::size_t rmt_col = head.size();
    for (std::size_t i = 0; i < head.size(); ++i)
        if (head[i].rfind("se_", 0) == 0 && head[i].find("rmt") != std::string::npos)
            rmt_col = i;
    std::vector<double> se, rmt;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');)
            cells.push_back(x);
        if (cells.size() != head.size())
            throw ConfigError("malformed row at line " + std::to_string(line_no));
        se.push_back(std::stod(cells[se_col]));
        if (rmt_col < head.size())
            rmt.push_back(std::stod(cells[rmt_col]));
    }
    const CdfSummary cs = cdf_summary(se);
    auto f = open_out(c, "cdf.csv");
    write_cdf_csv(f, cs);
    if (!rmt.empty()) {
        auto g = open_out(c, "cdf_rmt.csv");
        write_cdf_csv(g, cdf_summary(rmt));
    }
    auto s = open_out(c, "summary.csv");
    s << "min_se,outage_se,median_se,samples\n" << cs.minimum << ',' << cs.outage << ',' << cs.median << ','
      << se.size() << '\n';
    std::printf("min SE %.4f  5%%-outage SE %.4f  median SE %.4f  (%zu samples)\n", cs.minimum, cs.outage,
                cs.median, se.size());
    return 0;
}

void scenario_flags(CLI::App* sub, Common& c, bool campaign)
{
    sub->add_option("--scenario", c.scenario, "scenario config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "override the scenario seed");
    sub->add_option("--out-dir", c.out_dir, "output directory");
    if (campaign) {
        sub->add_option("--drops", c.drops, "number of drops");
        sub->add_option("--blocks", c.blocks, "Monte Carlo blocks per drop");
        sub->add_option("--workers", c.workers, "worker threads across drops")->check(CLI::PositiveNumber);
    }
    else {
        sub->add_option("--drop", c.drop, "drop index");
    }
}
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cell-free massive MIMO hybrid beamforming simulator"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    Common c;
    std::string mode = "ul", input;

    auto* ul = app.add_subcommand("simulate-ul", "uplink campaign: MMSE combining, simulated and asymptotic SE");
    auto* dl = app.add_subcommand("simulate-dl", "downlink campaign: RZF precoding, simulated and asymptotic SE");
    auto* vr = app.add_subcommand("validate-rmt", "per-UE simulated vs deterministic-equivalent SE");
    for (auto* sub : {ul, dl, vr}) {
        scenario_flags(sub, c, true);
        sub->add_option("--analog", c.analog, "proposed | svd | digital");
        sub->add_option("--pilots", c.pilots, "greedy | random | initial");
    }
    vr->add_option("--mode", mode, "ul | dl");

    auto* da = app.add_subcommand("design-analog", "export the analog design of one drop");
    scenario_flags(da, c, false);
    da->add_option("--method,--analog", c.analog, "proposed | svd | digital");

    auto* ap = app.add_subcommand("assign-pilots", "pilot assignment of one drop with its sweep trace");
    scenario_flags(ap, c, false);
    ap->add_option("--pilots", c.pilots, "greedy | random | initial");
    ap->add_option("--analog", c.analog, "proposed | svd | digital");

    auto* bd = app.add_subcommand("bounds", "digital vs hybrid MRC SINR gap and its bounds for one drop");
    scenario_flags(bd, c, false);
    bd->add_option("--analog", c.analog, "proposed | svd | digital");

    auto* rp = app.add_subcommand("report", "CDF and summary tables from a results CSV");
    rp->add_option("--results", input, "results.csv from a simulate run")->required()->check(CLI::ExistingFile);
    rp->add_option("--out-dir", c.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (ul->parsed())
            return simulate(c, LinkMode::uplink);
        if (dl->parsed())
            return simulate(c, LinkMode::downlink);
        if (vr->parsed())
            return validate_rmt(c, mode);
        if (da->parsed())
            return design(c);
        if (ap->parsed())
            return pilots(c);
        if (bd->parsed())
            return bounds(c);
        if (rp->parsed())
            return report(c, input);
    }
    catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    }
    catch (const std::logic_error& e) { // bad numbers in input files
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
