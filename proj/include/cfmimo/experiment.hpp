// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: hybrid beamforming and pilot assignment for cell-free massive MIMO
// Copyright (C) 2026 The cfmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFMIMO_EXPERIMENT_HPP
#define CFMIMO_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/core.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/hybrid.hpp"
#include "cfmimo/link.hpp"
#include "cfmimo/pilots.hpp"
#include "cfmimo/rmt.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

enum class LinkMode
{
    uplink,
    downlink
};

enum class PilotMethod
{
    greedy,
    random,
    initial
};

inline PilotMethod parse_pilot_method(const std::string& s)
{
    if (s == "greedy")
        return PilotMethod::greedy;
    if (s == "random")
        return PilotMethod::random;
    if (s == "initial")
        return PilotMethod::initial;
    throw ConfigError("pilots out of range");
}

inline const char* to_string(PilotMethod p)
{
    switch (p) {
    case PilotMethod::greedy: return "greedy";
    case PilotMethod::random: return "random";
    case PilotMethod::initial: return "initial";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Provenance helpers
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string canonical_text(const Scenario& s)
{
    std::ostringstream os;
    os << std::setprecision(17);
    auto arr = [&](const char* key, const std::vector<double>& v) {
        os << key << '=';
        for (double x : v)
            os << x << ',';
        os << '\n';
    };
    os << "num_aps=" << s.num_aps << "\nantennas_per_ap=" << s.antennas_per_ap << "\nrf_chains=" << s.rf_chains
       << "\nnum_ues=" << s.num_ues << "\npilot_len=" << s.pilot_len << "\ncoherence=" << s.coherence
       << "\nue_power_w=" << s.ue_power << "\npilot_power_w=" << s.pilot_power << "\nnoise_dbm=" << s.noise_dbm
       << "\nrzf_reg=" << s.rzf_reg << "\nserve_radius_m=" << s.serve_radius << "\nconv_tol=" << s.conv_tol
       << "\narea_side_m=" << s.area_side << "\ncarrier_ghz=" << s.carrier_ghz << "\nap_height_m=" << s.ap_height
       << "\nue_height_m=" << s.ue_height << "\nangular_spread_deg=" << s.angular_spread_deg
       << "\nshadow_std_db=" << s.shadow_std_db << "\nshadow_decorr_m=" << s.shadow_decorr_m
       << "\nap_layout=" << (s.ap_layout == ApLayout::grid ? "grid" : "uniform") << "\nap_jitter=" << s.ap_jitter
       << "\nseed=" << s.seed << "\ndrops=" << s.drops << "\nblocks=" << s.blocks
       << "\ncalibration_blocks=" << s.calibration_blocks
       << "\npilot_objective=" << (s.pilot_objective == PilotObjective::uplink ? "ul" : "dl") << '\n';
    arr("ap_x", s.ap_x);
    arr("ap_y", s.ap_y);
    arr("ue_x", s.ue_x);
    arr("ue_y", s.ue_y);
    return os.str();
}

inline std::string config_hash(const Scenario& s)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical_text(s));
    return os.str();
}

// ---------------------------------------------------------------------------
// CDF and percentiles
// ---------------------------------------------------------------------------

// p-quantile with midpoint plotting positions (i - 0.5)/n and linear
// interpolation, clamped to the sample range.
inline double percentile(std::vector<double> v, double q)
{
    if (v.empty())
        throw ConfigError("percentile of empty sample");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    const double pos = q * n - 0.5; // fractional index
    if (pos <= 0.0)
        return v.front();
    if (pos >= n - 1.0)
        return v.back();
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return v[i] + f * (v[i + 1] - v[i]);
}

struct CdfSummary
{
    std::vector<std::pair<double, double>> table; // (value, P[X <= value])
    double outage = 0.0;                          // 5th percentile
    double median = 0.0;
    double minimum = 0.0;
};

inline CdfSummary cdf_summary(const std::vector<double>& samples)
{
    if (samples.empty())
        throw ConfigError("cdf of empty sample");
    std::vector<double> v = samples;
    std::sort(v.begin(), v.end());
    CdfSummary c;
    const double n = static_cast<double>(v.size());
    c.table.emplace_back(v.front(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i + 1 == v.size() || v[i + 1] != v[i])
            c.table.emplace_back(v[i], static_cast<double>(i + 1) / n);
    c.outage = percentile(v, 0.05);
    c.median = percentile(v, 0.5);
    c.minimum = v.front();
    return c;
}

// ---------------------------------------------------------------------------
// Per-drop pipeline
// ---------------------------------------------------------------------------

struct ExperimentOptions
{
    LinkMode mode = LinkMode::uplink;
    AnalogMethod analog = AnalogMethod::proposed;
    PilotMethod pilots = PilotMethod::greedy;
    std::size_t drops = 1;
    std::size_t blocks = 200;
    std::size_t calibration_blocks = 2000;
    std::size_t workers = 1;
};

struct PreparedDrop
{
    Drop drop;
    HybridDesign design;
    std::vector<CMat> chains;
    EffectiveCorrelations eff;
};

inline PreparedDrop prepare_drop(const Scenario& s, std::uint64_t drop_index, AnalogMethod analog)
{
    PreparedDrop p;
    p.drop = generate_drop(s, drop_index);
    p.design = design_analog(analog, p.drop.correlations, p.drop.service, s.rf_chains, s.conv_tol);
    p.chains = p.design.chains();
    p.eff = effective_correlations(p.drop.correlations, p.chains);
    return p;
}

inline RVec ue_powers(const Scenario& s)
{
    return RVec::Constant(static_cast<Eigen::Index>(s.num_ues), s.ue_power);
}

struct PilotOutcome
{
    PilotBook book;
    AssignmentTrace trace; // empty unless greedy
};

inline PilotOutcome choose_pilots(const Scenario& s, const PreparedDrop& p, PilotMethod method,
                                  std::uint64_t drop_index)
{
    PilotOutcome out;
    if (method == PilotMethod::random) {
        out.book = random_pilots(s.pilot_len, s.num_ues, s.seed, drop_index);
        return out;
    }
    const RMat corr = pilot_correlation(p.eff, p.drop.service, s.pilot_len, s.pilot_power, s.noise_power());
    out.book = assign_initial_pilots(corr, s.pilot_len);
    if (method == PilotMethod::initial)
        return out;
    const SinrEvaluator eval(p.eff, p.drop.service, ue_powers(s), s.pilot_power, s.noise_power(),
                             s.rzf_reg * s.noise_power(), s.pilot_objective);
    out.trace = greedy_pilot_assignment(eval, out.book, s.conv_tol);
    out.book = out.trace.final_book();
    return out;
}

struct UeResult
{
    std::size_t drop = 0;
    std::size_t ue = 0;
    double sinr = 0.0;        // Monte Carlo (UL: mean per-block SINR)
    double sinr_stderr = 0.0; // DL only
    double se = 0.0;
    double se_stderr = 0.0;   // UL only
    double sinr_rmt = 0.0;
    double se_rmt = 0.0;
};

struct DropOutcome
{
    bool ok = false;
    std::string error;
    std::vector<UeResult> ues;
    std::vector<std::string> warnings;
    PilotBook book;
};

inline DropOutcome run_drop(const Scenario& s, const ExperimentOptions& opt, std::uint64_t drop_index)
{
    DropOutcome out;
    try {
        const PreparedDrop p = prepare_drop(s, drop_index, opt.analog);
        out.warnings = p.design.warnings;
        const PilotOutcome po = choose_pilots(s, p, opt.pilots, drop_index);
        out.book = po.book;
        out.warnings.insert(out.warnings.end(), po.trace.warnings.begin(), po.trace.warnings.end());
        const EstimationStats st = estimation_statistics(p.eff, po.book, s.pilot_power, s.noise_power());
        out.warnings.insert(out.warnings.end(), st.warnings.begin(), st.warnings.end());

        LinkContext ctx;
        ctx.correlations = &p.drop.correlations;
        ctx.service = &p.drop.service;
        ctx.chains = p.chains;
        ctx.stats = &st;
        ctx.powers = ue_powers(s);
        ctx.noise = s.noise_power();
        ctx.rzf_reg = s.rzf_reg * s.noise_power();
        ctx.seed = derive_seed(s.seed, Stream::drop, drop_index);

        const std::size_t K = s.num_ues;
        out.ues.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            out.ues[k].drop = drop_index;
            out.ues[k].ue = k;
        }
        if (opt.mode == LinkMode::uplink) {
            const UplinkResult mc = ul_mmse_mc(ctx, opt.blocks, s.pilot_len, s.coherence);
            const auto blocks = effective_noise_blocks(st, ctx.powers, p.drop.service);
            const UplinkDE de = ul_sinr_asymptotic(st, ctx.powers, p.drop.service, blocks);
            for (std::size_t k = 0; k < K; ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                out.ues[k].sinr = mc.sinr(ki);
                out.ues[k].se = mc.se(ki);
                out.ues[k].se_stderr = mc.se_stderr(ki);
                out.ues[k].sinr_rmt = de.sinr(ki);
                out.ues[k].se_rmt = spectral_efficiency(de.sinr(ki), s.pilot_len, s.coherence);
            }
        }
        else {
            const RVec lambda = calibrate_rzf(ctx, opt.calibration_blocks);
            const DownlinkResult mc = dl_rzf_sinr_mc(ctx, lambda, opt.blocks);
            const DownlinkDE de = dl_sinr_asymptotic(st, ctx.powers, p.drop.service, ctx.rzf_reg);
            for (std::size_t k = 0; k < K; ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                out.ues[k].sinr = mc.sinr(ki);
                out.ues[k].sinr_stderr = mc.sinr_stderr(ki);
                out.ues[k].se = spectral_efficiency(mc.sinr(ki), s.pilot_len, s.coherence);
                out.ues[k].sinr_rmt = de.sinr(ki);
                out.ues[k].se_rmt = spectral_efficiency(de.sinr(ki), s.pilot_len, s.coherence);
            }
        }
        out.ok = true;
    }
    catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
        out.ues.clear();
    }
    return out;
}

// Runs fn(i) for i in [0, n) on `workers` threads. Results are written by
// index, so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
    for (auto& t : pool)
        t.join();
}

struct ExperimentReport
{
    Scenario scenario;
    ExperimentOptions options;
    std::vector<DropOutcome> drops;
    std::vector<double> se_samples;
    std::vector<double> se_rmt_samples;
    CdfSummary cdf;
    std::size_t failed = 0;
    std::string hash;
};

inline ExperimentReport run_experiment(const Scenario& s, const ExperimentOptions& opt)
{
    if (opt.mode == LinkMode::downlink && opt.blocks < 10)
        throw ConfigError("blocks out of range");
    if (opt.drops < 1)
        throw ConfigError("drops out of range");
    ExperimentReport r;
    r.scenario = s;
    r.options = opt;
    r.hash = config_hash(s);
    r.drops.resize(opt.drops);
    parallel_for(opt.drops, opt.workers, [&](std::size_t d) { r.drops[d] = run_drop(s, opt, d); });
    for (const auto& d : r.drops) {
        if (!d.ok) {
            ++r.failed;
            continue;
        }
        for (const auto& u : d.ues) {
            r.se_samples.push_back(u.se);
            r.se_rmt_samples.push_back(u.se_rmt);
        }
    }
    const double ok = static_cast<double>(opt.drops - r.failed);
    if (ok < 0.9 * static_cast<double>(opt.drops)) {
        std::string first;
        for (const auto& d : r.drops)
            if (!d.ok) {
                first = d.error;
                break;
            }
        throw NumericalError("too many failed drops (" + std::to_string(r.failed) + " of " +
                             std::to_string(opt.drops) + "): " + first);
    }
    r.cdf = cdf_summary(r.se_samples);
    return r;
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_results_csv(std::ostream& os, const ExperimentReport& r)
{
    os << std::setprecision(17);
    if (r.options.mode == LinkMode::uplink) {
        os << "drop,ue,sinr_ul,se_ul,se_ul_stderr,sinr_ul_rmt,se_ul_rmt\n";
        for (const auto& d : r.drops)
            for (const auto& u : d.ues)
                os << u.drop << ',' << u.ue << ',' << u.sinr << ',' << u.se << ',' << u.se_stderr << ','
                   << u.sinr_rmt << ',' << u.se_rmt << '\n';
    }
    else {
        os << "drop,ue,sinr_dl,sinr_dl_stderr,se_dl,sinr_dl_rmt,se_dl_rmt\n";
        for (const auto& d : r.drops)
            for (const auto& u : d.ues)
                os << u.drop << ',' << u.ue << ',' << u.sinr << ',' << u.sinr_stderr << ',' << u.se << ','
                   << u.sinr_rmt << ',' << u.se_rmt << '\n';
    }
}

inline void write_cdf_csv(std::ostream& os, const CdfSummary& c)
{
    os << std::setprecision(17) << "se,cdf\n";
    for (const auto& [x, y] : c.table)
        os << x << ',' << y << '\n';
}

inline void write_summary_csv(std::ostream& os, const ExperimentReport& r)
{
    os << std::setprecision(17) << "min_se,outage_se,median_se,drops,failed_drops\n"
       << r.cdf.minimum << ',' << r.cdf.outage << ',' << r.cdf.median << ',' << r.drops.size() << ','
       << r.failed << '\n';
}

} // namespace cfmimo

#endif
