#pragma once

#include <cstdlib>
#include <string>

namespace conemkt {

// Central tolerance record. Every numeric comparison in the library routes
// through one of these fields; nothing hard-codes its own epsilon.
//
// CONEMKT_TOL, when set, replaces the LP feasibility tolerance and rescales
// the remaining fields by their default ratios.
struct Tolerances {
    double lp_feasibility = 1e-8;   // primal row/bound violation accepted as feasible
    double lp_pivot = 1e-9;         // pivot elements below this are treated as zero
    double lp_duality = 1e-7;       // weak-duality / complementary-slackness residual
    double membership = 1e-6;       // cone and polar membership slack
    double strict_margin = 1e-7;    // strictness margins (polar interiors, NA^r)
    double na_value = 1e-7;         // LP mass above which check_na reports arbitrage
    double martingale = 1e-8;       // martingale residual accepted in price processes
    double fw_gap = 1e-6;           // default Frank-Wolfe gap tolerance
    double pareto = 1e-5;           // default is_pareto_maximal improvement tolerance

    // All fields scaled so that lp_feasibility == feas and ratios match defaults.
    static Tolerances scaled(double feas) {
        Tolerances t;
        const double k = feas / 1e-8;
        t.lp_feasibility = feas;
        t.lp_pivot = 1e-9 * k;
        t.lp_duality = 1e-7 * k;
        t.membership = 1e-6 * k;
        t.strict_margin = 1e-7 * k;
        t.na_value = 1e-7 * k;
        t.martingale = 1e-8 * k;
        t.fw_gap = 1e-6 * k;
        t.pareto = 1e-5 * k;
        return t;
    }

    static Tolerances defaults() {
        if (const char* env = std::getenv("CONEMKT_TOL")) {
            try {
                const double v = std::stod(env);
                if (v > 0.0) return scaled(v);
            } catch (...) {
                // unparsable value: fall through to stock defaults
            }
        }
        return Tolerances{};
    }
};

}  // namespace conemkt
