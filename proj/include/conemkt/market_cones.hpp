#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenario_tree.hpp"

namespace conemkt {

// d x d matrix of bid-ask exchange rates: pi(i,j) units of asset i buy one
// unit of asset j. Unit diagonal, strictly positive, triangle inequality.
class BidAskMatrix {
  public:
    BidAskMatrix() : d_(0) {}
    explicit BidAskMatrix(int d, double fill = 1.0) : d_(d), pi_(d * d, fill) {
        for (int i = 0; i < d; ++i) at(i, i) = 1.0;
    }
    static BidAskMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const int d = static_cast<int>(rows.size());
        BidAskMatrix m(d);
        for (int i = 0; i < d; ++i) {
            if (static_cast<int>(rows[i].size()) != d)
                throw std::invalid_argument("bid-ask matrix must be square");
            for (int j = 0; j < d; ++j) m.at(i, j) = rows[i][j];
        }
        return m;
    }

    int dim() const { return d_; }
    double& at(int i, int j) { return pi_[i * d_ + j]; }
    double at(int i, int j) const { return pi_[i * d_ + j]; }
    double operator()(int i, int j) const { return pi_[i * d_ + j]; }

    double max_entry() const {
        double m = 0.0;
        for (double v : pi_) m = std::max(m, v);
        return m;
    }

    // spread is degenerate (frictionless) when the round trip loses nothing
    bool degenerate_pair(int i, int j) const {
        return at(i, j) * at(j, i) <= 1.0 + 1e-10;
    }

  private:
    int d_;
    std::vector<double> pi_;
};

struct BidAskProcess {
    int d = 0;
    AdaptedProcess<BidAskMatrix> matrices;

    const BidAskMatrix& at(int node) const { return matrices[node]; }
    BidAskMatrix& at(int node) { return matrices[node]; }

    double max_entry() const {
        double m = 0.0;
        for (const auto& mat : matrices.values) m = std::max(m, mat.max_entry());
        return m;
    }
};

inline ValidationReport validate_bid_ask(const BidAskMatrix& pi) {
    ValidationReport report;
    const int d = pi.dim();
    auto cell = [](int i, int j) {
        return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
    };
    for (int i = 0; i < d; ++i) {
        if (pi(i, i) != 1.0)
            report.add(cell(i, i), "diagonal entry must equal 1");
        for (int j = 0; j < d; ++j) {
            if (!(pi(i, j) > 0.0))
                report.add(cell(i, j), "entry must be strictly positive");
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                const double lhs = pi(i, j);
                const double rhs = pi(i, k) * pi(k, j);
                if (lhs > rhs * (1.0 + 1e-10))
                    report.add("(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," +
                                   std::to_string(k + 1) + ")",
                               "triangle violation: pi" + cell(i, j) + " > pi" + cell(i, k) +
                                   "*pi" + cell(k, j));
            }
    return report;
}

inline ValidationReport validate_bid_ask(const BidAskProcess& process, const ScenarioTree& tree) {
    ValidationReport report;
    for (int n = 0; n < tree.size(); ++n) {
        ValidationReport r = validate_bid_ask(process.at(n));
        for (auto& v : r.violations) report.add("node " + tree.node(n).id + " " + v.where, v.rule);
    }
    return report;
}

// Elementwise-smallest matrix <= input satisfying the triangle axiom:
// all-pairs min-plus closure in log space. Errors when a cycle creates value.
inline BidAskMatrix triangle_closure(const BidAskMatrix& raw) {
    const int d = raw.dim();
    std::vector<double> lg(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (!(raw(i, j) > 0.0))
                throw std::invalid_argument("triangle_closure: nonpositive entry");
            lg[i * d + j] = i == j ? 0.0 : std::log(raw(i, j));
        }
    const std::vector<double> lg0 = lg;
    // diagonal stays pinned at 0: round trips cannot create value in a valid
    // matrix, and letting rounding noise turn them into negative self-loops
    // would shave ulps off unrelated entries
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                if (i == j) continue;
                lg[i * d + j] = std::min(lg[i * d + j], lg[i * d + k] + lg[k * d + j]);
            }
    BidAskMatrix out(d);
    // entries improved by less than 1e-12 relative pass through bit-exactly:
    // multi-asset paths between frictionless entries can round to one ulp
    // below the direct rate, and taking those as repairs would break the
    // degenerate pairs. Real violations are orders of magnitude larger.
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) {
                out.at(i, j) = 1.0;
                continue;
            }
            const double gain = lg0[i * d + j] - lg[i * d + j];
            const double scale = std::max(1.0, std::abs(lg0[i * d + j]));
            out.at(i, j) = gain <= 1e-12 * scale ? raw(i, j) : std::exp(lg[i * d + j]);
        }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (out(i, j) * out(j, i) < 1.0 - 1e-10)
                throw std::invalid_argument(
                    "triangle_closure: exchange cycle creates value at pair (" +
                    std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    return out;
}

// Generators of -K(Pi): d disposals -e^i followed by d(d-1) exchanges
// -pi(i,j) e^i + e^j in lexicographic (i,j) order.
struct ConeGenerators {
    int d = 0;
    std::vector<std::vector<double>> vectors;
};

inline ConeGenerators cone_generators(const BidAskMatrix& pi) {
    const int d = pi.dim();
    ConeGenerators g;
    g.d = d;
    for (int i = 0; i < d; ++i) {
        std::vector<double> v(d, 0.0);
        v[i] = -1.0;
        g.vectors.push_back(std::move(v));
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            std::vector<double> v(d, 0.0);
            v[i] = -pi(i, j);
            v[j] = 1.0;
            g.vectors.push_back(std::move(v));
        }
    return g;
}

// w in K*(Pi): w >= 0 and w^j <= pi(i,j) w^i for all i != j. The closed form
// evaluates the same inner products as the generator list.
inline bool polar_membership(const BidAskMatrix& pi, const std::vector<double>& w, double tol) {
    const int d = pi.dim();
    if (static_cast<int>(w.size()) != d)
        throw std::invalid_argument("polar_membership: dimension mismatch");
    for (int i = 0; i < d; ++i)
        if (-w[i] > tol) return false;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            if (w[j] - pi(i, j) * w[i] > tol) return false;
        }
    return true;
}

// w in the relative interior of K*(Pi): componentwise floor, strict slack on
// nondegenerate pairs (relative to w^i), forced equality on frictionless pairs.
inline bool strict_polar_membership(const BidAskMatrix& pi, const std::vector<double>& w,
                                    double margin) {
    const int d = pi.dim();
    if (static_cast<int>(w.size()) != d)
        throw std::invalid_argument("strict_polar_membership: dimension mismatch");
    for (int i = 0; i < d; ++i)
        if (w[i] < margin) return false;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            if (pi(i, j) * pi(j, i) > 1.0 + 1e-10) {
                if (pi(i, j) * w[i] - w[j] < margin * w[i]) return false;
            } else {
                if (std::abs(w[j] - pi(i, j) * w[i]) > 1e-10 * std::max(w[i], w[j]))
                    return false;
            }
        }
    return true;
}

namespace detail {

// One shrink step at fixed theta; throws if closure breaks the strict-inside
// postcondition or creates a value cycle.
inline BidAskProcess shrink_spreads_once(const BidAskProcess& process, double theta) {
    BidAskProcess out;
    out.d = process.d;
    out.matrices = AdaptedProcess<BidAskMatrix>(process.matrices.size());
    const int d = process.d;
    for (int n = 0; n < process.matrices.size(); ++n) {
        const BidAskMatrix& pi = process.at(n);
        BidAskMatrix next(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                if (i == j) continue;
                if (pi.degenerate_pair(i, j)) {
                    next.at(i, j) = pi(i, j);
                } else {
                    const double mid = 0.5 * (std::log(pi(i, j)) - std::log(pi(j, i)));
                    next.at(i, j) = std::exp((1.0 - theta) * std::log(pi(i, j)) + theta * mid);
                }
            }
        BidAskMatrix closed = triangle_closure(next);
        // verify: nondegenerate shrunk intervals strictly inside the original
        // relative interior, degenerate pairs untouched
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                if (i == j) continue;
                if (pi.degenerate_pair(i, j)) {
                    if (closed(i, j) != pi(i, j))
                        throw std::runtime_error("shrink_spreads: closure moved degenerate pair");
                } else {
                    if (!(closed(i, j) < pi(i, j) && closed(i, j) * pi(j, i) > 1.0))
                        throw std::runtime_error("shrink_spreads: shrunk entry left the interior");
                }
            }
        out.matrices[n] = std::move(closed);
    }
    return out;
}

}  // namespace detail

// Pi-tilde with every nondegenerate spread pulled toward its log-midpoint.
// Closure can undo strictness, in which case theta is halved and the whole
// step retried (at most 20 times).
inline BidAskProcess shrink_spreads(const BidAskProcess& process, double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("shrink_spreads: theta must be in (0,1)");
    std::string last_error;
    for (int attempt = 0; attempt < 20; ++attempt) {
        try {
            return detail::shrink_spreads_once(process, theta);
        } catch (const std::exception& e) {
            last_error = e.what();
            theta *= 0.5;
        }
    }
    throw std::runtime_error("shrink_spreads: retry exhaustion: " + last_error);
}

}  // namespace conemkt
