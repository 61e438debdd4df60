#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tolerances.hpp"

namespace conemkt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LE, EQ, GE };
enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LinearProgram {
    int num_vars = 0;
    bool maximize = true;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<RowSense> senses;
    std::vector<double> rhs;
    std::vector<double> lower;
    std::vector<double> upper;

    int add_var(double lo, double up, double obj = 0.0) {
        lower.push_back(lo);
        upper.push_back(up);
        objective.push_back(obj);
        return num_vars++;
    }

    void add_row(RowSense sense, double b, std::vector<double> coeffs) {
        if (static_cast<int>(coeffs.size()) != num_vars)
            throw std::invalid_argument("lp row width does not match variable count");
        rows.push_back(std::move(coeffs));
        senses.push_back(sense);
        rhs.push_back(b);
    }

    void add_row_sparse(RowSense sense, double b,
                        const std::vector<std::pair<int, double>>& entries) {
        std::vector<double> r(num_vars, 0.0);
        for (const auto& [j, v] : entries) {
            if (j < 0 || j >= num_vars)
                throw std::invalid_argument("lp row entry index out of range");
            r[j] += v;
        }
        add_row(sense, b, std::move(r));
    }

    int num_rows() const { return static_cast<int>(rows.size()); }
};

struct LpOutcome {
    LpStatus status = LpStatus::Optimal;
    std::vector<double> primal;          // structural variables (feasible point when unbounded)
    std::vector<double> dual;            // one multiplier per row, in the user's direction
    double objective = 0.0;
    std::vector<double> ray;             // improving recession direction when unbounded
    double feasibility_residual = 0.0;
    double duality_residual = 0.0;
    double comp_slackness_residual = 0.0;
    long iterations = 0;
};

namespace detail {

// Bounded-variable primal simplex on dense data with an explicitly maintained
// basis inverse. Two phases; slack basis taken directly when the start is
// feasible. Dantzig pricing switches to Bland's rule after 5000 iterations.
class DenseSimplex {
  public:
    DenseSimplex(const LinearProgram& lp, const Tolerances& tol, int verbosity)
        : tol_(tol), verbosity_(verbosity), m_(lp.num_rows()), n_struct_(lp.num_vars) {
        for (int j = 0; j < lp.num_vars; ++j) {
            if (!(lp.lower[j] > -kInf))
                throw std::invalid_argument("lp variables need finite lower bounds");
            if (lp.upper[j] < lp.lower[j])
                throw std::invalid_argument("lp variable with upper < lower");
        }
        sign_ = lp.maximize ? -1.0 : 1.0;  // internal form minimizes
        b_ = lp.rhs;
        // columns: structural, then one slack per row, artificials appended on demand
        const int n0 = n_struct_ + m_;
        a_.assign(static_cast<size_t>(m_) * n0, 0.0);
        lo_.assign(n0, 0.0);
        up_.assign(n0, 0.0);
        cost_.assign(n0, 0.0);
        for (int j = 0; j < n_struct_; ++j) {
            for (int r = 0; r < m_; ++r) a_[col(j) + r] = lp.rows[r][j];
            lo_[j] = lp.lower[j];
            up_[j] = lp.upper[j];
            cost_[j] = sign_ * lp.objective[j];
        }
        for (int r = 0; r < m_; ++r) {
            const int j = n_struct_ + r;
            a_[col(j) + r] = 1.0;
            switch (lp.senses[r]) {
                case RowSense::LE: lo_[j] = 0.0; up_[j] = kInf; break;
                case RowSense::GE: lo_[j] = -kInf; up_[j] = 0.0; break;
                case RowSense::EQ: lo_[j] = 0.0; up_[j] = 0.0; break;
            }
        }
        n_ = n0;
    }

    LpOutcome run() {
        place_nonbasics();
        const bool need_phase1 = build_initial_basis();
        LpOutcome out;
        if (need_phase1) {
            phase_ = 1;
            iterate();
            double infeas = 0.0;
            for (int j = art_start_; j < n_; ++j) infeas += x_[j];
            if (infeas > tol_.lp_feasibility) {
                out.status = LpStatus::Infeasible;
                out.iterations = iterations_;
                return out;
            }
            expel_artificials();
        }
        phase_ = 2;
        const bool unbounded = !iterate();
        refresh_basics();
        out.iterations = iterations_;
        out.primal.assign(x_.begin(), x_.begin() + n_struct_);
        out.status = unbounded ? LpStatus::Unbounded : LpStatus::Optimal;
        if (unbounded) out.ray = ray_;
        return out;
    }

  private:
    size_t col(int j) const { return static_cast<size_t>(j) * m_; }

    void place_nonbasics() {
        x_.assign(n_, 0.0);
        state_.assign(n_, AT_LOWER);
        for (int j = 0; j < n_; ++j) {
            if (lo_[j] > -kInf) {
                state_[j] = AT_LOWER;
                x_[j] = lo_[j];
            } else {
                state_[j] = AT_UPPER;
                x_[j] = up_[j];
            }
        }
    }

    // Slack becomes basic where it can absorb the row residual; otherwise an
    // artificial column (phase-1 cost 1) is appended. Returns whether any
    // artificial was needed.
    bool build_initial_basis() {
        basis_.assign(m_, -1);
        std::vector<double> residual(m_);
        for (int r = 0; r < m_; ++r) {
            double acc = b_[r];
            for (int j = 0; j < n_struct_; ++j) acc -= a_[col(j) + r] * x_[j];
            residual[r] = acc;
        }
        art_start_ = n_;
        std::vector<int> needs_artificial;
        for (int r = 0; r < m_; ++r) {
            const int s = n_struct_ + r;
            if (residual[r] >= lo_[s] && residual[r] <= up_[s]) {
                basis_[r] = s;
                state_[s] = BASIC;
                x_[s] = residual[r];
            } else {
                needs_artificial.push_back(r);
            }
        }
        for (int r : needs_artificial) {
            const int s = n_struct_ + r;
            // slack pinned at the bound nearest the residual
            x_[s] = residual[r] > up_[s] ? up_[s] : lo_[s];
            state_[s] = residual[r] > up_[s] ? AT_UPPER : AT_LOWER;
            const double leftover = residual[r] - x_[s];
            const int j = n_;
            a_.resize(a_.size() + m_, 0.0);
            a_[col(j) + r] = leftover >= 0.0 ? 1.0 : -1.0;
            lo_.push_back(0.0);
            up_.push_back(kInf);
            cost_.push_back(0.0);
            basis_[r] = j;
            state_.push_back(BASIC);
            x_.push_back(std::abs(leftover));
            ++n_;
        }
        refactorize();
        return n_ > art_start_;
    }

    void refactorize() {
        binv_.assign(static_cast<size_t>(m_) * m_, 0.0);
        if (m_ == 0) return;
        // Gauss-Jordan with partial pivoting on the basis matrix
        std::vector<double> work(static_cast<size_t>(m_) * m_);
        for (int i = 0; i < m_; ++i) {
            for (int r = 0; r < m_; ++r) work[static_cast<size_t>(r) * m_ + i] = a_[col(basis_[i]) + r];
            binv_[static_cast<size_t>(i) * m_ + i] = 1.0;
        }
        for (int p = 0; p < m_; ++p) {
            int best = p;
            for (int r = p + 1; r < m_; ++r)
                if (std::abs(work[static_cast<size_t>(r) * m_ + p]) >
                    std::abs(work[static_cast<size_t>(best) * m_ + p]))
                    best = r;
            if (std::abs(work[static_cast<size_t>(best) * m_ + p]) < 1e-14)
                throw std::runtime_error("lp_core: singular basis during refactorization");
            if (best != p)
                for (int c = 0; c < m_; ++c) {
                    std::swap(work[static_cast<size_t>(best) * m_ + c], work[static_cast<size_t>(p) * m_ + c]);
                    std::swap(binv_[static_cast<size_t>(best) * m_ + c], binv_[static_cast<size_t>(p) * m_ + c]);
                }
            const double piv = work[static_cast<size_t>(p) * m_ + p];
            for (int c = 0; c < m_; ++c) {
                work[static_cast<size_t>(p) * m_ + c] /= piv;
                binv_[static_cast<size_t>(p) * m_ + c] /= piv;
            }
            for (int r = 0; r < m_; ++r) {
                if (r == p) continue;
                const double f = work[static_cast<size_t>(r) * m_ + p];
                if (f == 0.0) continue;
                for (int c = 0; c < m_; ++c) {
                    work[static_cast<size_t>(r) * m_ + c] -= f * work[static_cast<size_t>(p) * m_ + c];
                    binv_[static_cast<size_t>(r) * m_ + c] -= f * binv_[static_cast<size_t>(p) * m_ + c];
                }
            }
        }
        refresh_basics();
    }

    // x_B = Binv (b - sum over nonbasic columns at nonzero values)
    void refresh_basics() {
        if (m_ == 0) return;
        std::vector<double> rhs = b_;
        for (int j = 0; j < n_; ++j) {
            if (state_[j] == BASIC || x_[j] == 0.0) continue;
            const double v = x_[j];
            for (int r = 0; r < m_; ++r) rhs[r] -= a_[col(j) + r] * v;
        }
        for (int i = 0; i < m_; ++i) {
            double acc = 0.0;
            for (int r = 0; r < m_; ++r) acc += binv_[static_cast<size_t>(i) * m_ + r] * rhs[r];
            x_[basis_[i]] = acc;
        }
    }

    std::vector<double> price() const {
        std::vector<double> y(m_, 0.0);
        for (int i = 0; i < m_; ++i) {
            const double cb = cost_now(basis_[i]);
            if (cb == 0.0) continue;
            for (int r = 0; r < m_; ++r) y[r] += cb * binv_[static_cast<size_t>(i) * m_ + r];
        }
        return y;
    }

    double cost_now(int j) const {
        if (phase_ == 1) return j >= art_start_ ? 1.0 : 0.0;
        return cost_[j];
    }

    double reduced_cost(int j, const std::vector<double>& y) const {
        double d = cost_now(j);
        for (int r = 0; r < m_; ++r) d -= y[r] * a_[col(j) + r];
        return d;
    }

    std::vector<double> ftran(int j) const {
        std::vector<double> w(m_, 0.0);
        for (int i = 0; i < m_; ++i) {
            double acc = 0.0;
            for (int r = 0; r < m_; ++r) acc += binv_[static_cast<size_t>(i) * m_ + r] * a_[col(j) + r];
            w[i] = acc;
        }
        return w;
    }

    // Runs the current phase to optimality. Returns false when phase 2 proves
    // unboundedness (ray_ filled in).
    bool iterate() {
        int since_refactor = 0;
        while (true) {
            if (++iterations_ > 1000000)
                throw std::runtime_error("lp_core: iteration cap 1e6 exceeded");
            const bool bland = iterations_ > 5000;
            const std::vector<double> y = price();
            int enter = -1;
            double enter_dir = 0.0, best_score = tol_.lp_pivot;
            for (int j = 0; j < n_; ++j) {
                if (state_[j] == BASIC || lo_[j] == up_[j]) continue;
                if (phase_ == 2 && j >= art_start_) continue;
                const double d = reduced_cost(j, y);
                double score = 0.0, dir = 0.0;
                if (state_[j] == AT_LOWER && d < -tol_.lp_pivot) {
                    score = -d;
                    dir = 1.0;
                } else if (state_[j] == AT_UPPER && d > tol_.lp_pivot) {
                    score = d;
                    dir = -1.0;
                } else {
                    continue;
                }
                if (bland) {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if (score > best_score) {
                    best_score = score;
                    enter = j;
                    enter_dir = dir;
                }
            }
            if (enter < 0) return true;  // phase optimal

            const std::vector<double> w = ftran(enter);
            // ratio test: entering moves by enter_dir * t, basics by -enter_dir * t * w
            double t = up_[enter] - lo_[enter];  // bound-flip distance, may be inf
            int block = -1;                      // -1 = bound flip
            bool block_at_lower = false;
            for (int i = 0; i < m_; ++i) {
                const double wi = w[i] * enter_dir;
                const int bj = basis_[i];
                double ti;
                bool hits_lower;
                if (wi > tol_.lp_pivot) {
                    if (lo_[bj] == -kInf) continue;
                    ti = (x_[bj] - lo_[bj]) / wi;
                    hits_lower = true;
                } else if (wi < -tol_.lp_pivot) {
                    if (up_[bj] == kInf) continue;
                    ti = (up_[bj] - x_[bj]) / (-wi);
                    hits_lower = false;
                } else {
                    continue;
                }
                if (ti < 0.0) ti = 0.0;
                bool better = ti < t - 1e-12;
                if (!better && ti < t + 1e-12 && block >= 0) {
                    // tie: Bland takes the smallest basic index, Dantzig the biggest pivot
                    better = bland ? bj < basis_[block]
                                   : std::abs(w[i]) > std::abs(w[block]);
                }
                if (better) {
                    t = ti;
                    block = i;
                    block_at_lower = hits_lower;
                }
            }

            if (t == kInf) {
                // phase 1 minimizes a sum of nonnegatives; it cannot be unbounded
                if (phase_ == 1)
                    throw std::runtime_error("lp_core: phase-1 unbounded (internal error)");
                ray_.assign(n_struct_, 0.0);
                if (enter < n_struct_) ray_[enter] = enter_dir;
                for (int i = 0; i < m_; ++i)
                    if (basis_[i] < n_struct_) ray_[basis_[i]] = -enter_dir * w[i];
                return false;
            }

            x_[enter] += enter_dir * t;
            for (int i = 0; i < m_; ++i) x_[basis_[i]] -= enter_dir * t * w[i];

            if (block < 0) {
                state_[enter] = state_[enter] == AT_LOWER ? AT_UPPER : AT_LOWER;
                x_[enter] = state_[enter] == AT_LOWER ? lo_[enter] : up_[enter];
            } else {
                const int leave = basis_[block];
                state_[leave] = block_at_lower ? AT_LOWER : AT_UPPER;
                x_[leave] = block_at_lower ? lo_[leave] : up_[leave];
                basis_[block] = enter;
                state_[enter] = BASIC;
                pivot_binv(block, w);
                if (++since_refactor >= 100) {
                    refactorize();
                    since_refactor = 0;
                }
            }
            if (verbosity_ > 0)
                std::fprintf(stderr, "[lp] it=%ld phase=%d enter=%d leave_row=%d t=%.3e\n",
                             iterations_, phase_, enter, block, t);
        }
    }

    void pivot_binv(int r, const std::vector<double>& w) {
        const double piv = w[r];
        if (std::abs(piv) < 1e-14)
            throw std::runtime_error("lp_core: zero pivot");
        double* rowr = &binv_[static_cast<size_t>(r) * m_];
        for (int c = 0; c < m_; ++c) rowr[c] /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = w[i];
            if (f == 0.0) continue;
            double* rowi = &binv_[static_cast<size_t>(i) * m_];
            for (int c = 0; c < m_; ++c) rowi[c] -= f * rowr[c];
        }
    }

    // After phase 1: pivot basic artificials out on any usable column, or pin
    // them to zero if their row turned out redundant.
    void expel_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < art_start_) continue;
            const std::vector<double> binv_row(binv_.begin() + static_cast<size_t>(i) * m_,
                                               binv_.begin() + static_cast<size_t>(i + 1) * m_);
            int pick = -1;
            for (int j = 0; j < art_start_; ++j) {
                if (state_[j] == BASIC) continue;
                double wr = 0.0;
                for (int r = 0; r < m_; ++r) wr += binv_row[r] * a_[col(j) + r];
                if (std::abs(wr) > 1e-9) {
                    pick = j;
                    break;
                }
            }
            if (pick < 0) continue;  // redundant row; artificial stays basic at 0
            const std::vector<double> w = ftran(pick);
            const int leave = basis_[i];
            state_[leave] = AT_LOWER;
            x_[leave] = 0.0;
            basis_[i] = pick;
            state_[pick] = BASIC;
            pivot_binv(i, w);
            refresh_basics();
        }
        for (int j = art_start_; j < n_; ++j) {
            lo_[j] = up_[j] = 0.0;  // fixed at zero for phase 2
        }
    }

  public:
    // duals in the internal (minimize) sign convention
    std::vector<double> final_duals() const {
        std::vector<double> y = price();
        return y;
    }
    double sign() const { return sign_; }

  private:
    enum State : signed char { BASIC = -1, AT_LOWER = 0, AT_UPPER = 1 };

    Tolerances tol_;
    int verbosity_;
    int m_, n_struct_, n_ = 0, art_start_ = 0;
    int phase_ = 1;
    double sign_ = 1.0;
    long iterations_ = 0;
    std::vector<double> a_, b_, lo_, up_, cost_, x_, binv_;
    std::vector<double> ray_;
    std::vector<int> basis_;
    std::vector<signed char> state_;
};

}  // namespace detail

inline LpOutcome solve_lp(const LinearProgram& lp, const Tolerances& tol = Tolerances::defaults(),
                          int verbosity = 0) {
    for (const auto& row : lp.rows)
        if (static_cast<int>(row.size()) != lp.num_vars)
            throw std::invalid_argument("lp row width does not match variable count");
    for (int j = 0; j < lp.num_vars; ++j)
        if (lp.lower[j] == -kInf && lp.upper[j] == kInf)
            throw std::invalid_argument("free variables are not supported; give one finite bound");

    detail::DenseSimplex simplex(lp, tol, verbosity);
    LpOutcome out = simplex.run();
    if (out.status == LpStatus::Infeasible) return out;

    const auto& x = out.primal;
    double obj = 0.0;
    for (int j = 0; j < lp.num_vars; ++j) obj += lp.objective[j] * x[j];
    out.objective = obj;

    // residuals on the original statement
    double feas = 0.0;
    std::vector<double> slack(lp.num_rows());
    for (int r = 0; r < lp.num_rows(); ++r) {
        double ax = 0.0;
        for (int j = 0; j < lp.num_vars; ++j) ax += lp.rows[r][j] * x[j];
        slack[r] = lp.rhs[r] - ax;
        const double scale = std::max(1.0, std::abs(lp.rhs[r]));
        switch (lp.senses[r]) {
            case RowSense::LE: feas = std::max(feas, -slack[r] / scale); break;
            case RowSense::GE: feas = std::max(feas, slack[r] / scale); break;
            case RowSense::EQ: feas = std::max(feas, std::abs(slack[r]) / scale); break;
        }
    }
    for (int j = 0; j < lp.num_vars; ++j) {
        feas = std::max(feas, lp.lower[j] - x[j]);
        if (lp.upper[j] < kInf) feas = std::max(feas, x[j] - lp.upper[j]);
    }
    out.feasibility_residual = feas;

    if (out.status == LpStatus::Unbounded) return out;

    // user-direction duals: internal minimize used cost sign*c
    std::vector<double> y = simplex.final_duals();
    const double s = simplex.sign();
    out.dual.resize(lp.num_rows());
    for (int r = 0; r < lp.num_rows(); ++r) out.dual[r] = s * y[r];

    // dual objective with bound contributions from user-direction reduced costs
    double dual_obj = 0.0, comp = 0.0;
    for (int r = 0; r < lp.num_rows(); ++r) {
        dual_obj += out.dual[r] * lp.rhs[r];
        comp = std::max(comp, std::abs(out.dual[r] * slack[r]) /
                                  std::max(1.0, std::abs(lp.rhs[r])));
    }
    for (int j = 0; j < lp.num_vars; ++j) {
        double rc = lp.objective[j];
        for (int r = 0; r < lp.num_rows(); ++r) rc -= out.dual[r] * lp.rows[r][j];
        double contrib;
        if (lp.maximize)
            contrib = rc > 0.0 ? rc * lp.upper[j] : rc * lp.lower[j];
        else
            contrib = rc > 0.0 ? rc * lp.lower[j] : rc * lp.upper[j];
        if (std::isnan(contrib)) contrib = 0.0;  // 0 * inf from a zero reduced cost
        if (std::abs(rc) > tol.lp_duality && std::abs(contrib) == kInf) contrib = 0.0;
        dual_obj += contrib;
        const double interior = std::min(x[j] - lp.lower[j],
                                         lp.upper[j] < kInf ? lp.upper[j] - x[j] : kInf);
        if (interior > tol.lp_feasibility)
            comp = std::max(comp, std::abs(rc) * std::min(1.0, interior) /
                                      std::max(1.0, std::abs(lp.objective[j])));
    }
    out.duality_residual = std::abs(obj - dual_obj) / std::max(1.0, std::abs(obj));
    out.comp_slackness_residual = comp;
    return out;
}

struct MarginResult {
    LpStatus status = LpStatus::Optimal;
    double epsilon = 0.0;
    std::vector<double> point;
    LpOutcome outcome;
};

// Adds one scalar eps >= 0 to each designated <=-row (A_r x + eps <= b_r)
// and maximizes it; eps* > 0 certifies a uniformly strict solution, and an
// infeasible base system stays infeasible.
inline MarginResult feasibility_with_margin(const LinearProgram& constraints,
                                            const std::vector<int>& margin_rows,
                                            const Tolerances& tol = Tolerances::defaults()) {
    LinearProgram lp = constraints;
    lp.maximize = true;
    std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
    const int eps = lp.add_var(0.0, 1e3, 1.0);
    for (auto& row : lp.rows) row.push_back(0.0);
    for (int r : margin_rows) {
        if (r < 0 || r >= lp.num_rows())
            throw std::invalid_argument("feasibility_with_margin: row index out of range");
        if (lp.senses[r] != RowSense::LE)
            throw std::invalid_argument("feasibility_with_margin: designated row must be <=");
        lp.rows[r][eps] = 1.0;
    }
    LpOutcome res = solve_lp(lp, tol);
    MarginResult out;
    out.status = res.status;
    if (res.status == LpStatus::Optimal) {
        out.epsilon = res.primal[eps];
        out.point.assign(res.primal.begin(), res.primal.begin() + constraints.num_vars);
    }
    out.outcome = std::move(res);
    return out;
}

}  // namespace conemkt
