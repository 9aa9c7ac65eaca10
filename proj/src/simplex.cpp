#include "stochmatch/simplex.hpp"

#include <algorithm>
#include <cmath>

#include "stochmatch/errors.hpp"

namespace stochmatch {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

class Tableau {
public:
    Tableau(int rows, int cols) : m_(rows), n_(cols), a_((rows + 1) * static_cast<std::size_t>(cols + 1), 0.0) {}

    double& at(int r, int c) { return a_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double& rhs(int r) { return at(r, n_); }
    double& obj(int c) { return at(m_, c); }

    void pivot(int pr, int pc) {
        double inv = 1.0 / at(pr, pc);
        for (int c = 0; c <= n_; ++c) {
            at(pr, c) *= inv;
        }
        at(pr, pc) = 1.0;
        for (int r = 0; r <= m_; ++r) {
            if (r == pr) {
                continue;
            }
            double f = at(r, pc);
            if (f == 0.0) {
                continue;
            }
            for (int c = 0; c <= n_; ++c) {
                at(r, c) -= f * at(pr, c);
            }
            at(r, pc) = 0.0;
        }
    }

    int rows() const { return m_; }
    int cols() const { return n_; }

private:
    int m_;
    int n_;
    std::vector<double> a_;
};

struct Standardized {
    int vars = 0;                 // shifted structural variables
    std::vector<double> cost;     // per tableau column
    std::vector<int> basis;       // per row
    std::vector<int> identity;    // column holding e_r initially
    std::vector<double> sign;     // internal row = sign * original row
    std::vector<int> origin;      // original row index, or -1 for a bound row
    int first_artificial = 0;
};

// Runs simplex iterations on the current objective row. `allowed` is the
// number of leading columns eligible to enter.
LpStatus iterate(Tableau& tab, std::vector<int>& basis, int allowed, int& iterations, int guard) {
    for (;;) {
        int enter = -1;
        for (int c = 0; c < allowed; ++c) {
            if (tab.obj(c) < -kPivotTol) {
                enter = c;
                break;
            }
        }
        if (enter < 0) {
            return LpStatus::Optimal;
        }
        int leave = -1;
        double best = kInf;
        for (int r = 0; r < tab.rows(); ++r) {
            double v = tab.at(r, enter);
            if (v > kPivotTol) {
                double ratio = tab.rhs(r) / v;
                if (ratio < best - 1e-12 || (std::fabs(ratio - best) <= 1e-12 && basis[r] < basis[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
        }
        if (leave < 0) {
            return LpStatus::Unbounded;
        }
        if (++iterations > guard) {
            throw SolverStalled("simplex iteration guard exceeded");
        }
        tab.pivot(leave, enter);
        basis[leave] = enter;
        if (!std::isfinite(tab.obj(tab.cols()))) {
            throw NumericalFailure("non-finite simplex tableau");
        }
    }
}

void load_objective(Tableau& tab, const std::vector<int>& basis, const std::vector<double>& cost) {
    for (int c = 0; c <= tab.cols(); ++c) {
        double v = c < tab.cols() ? -cost[c] : 0.0;
        for (int r = 0; r < tab.rows(); ++r) {
            v += cost[basis[r]] * tab.at(r, c);
        }
        tab.obj(c) = v;
    }
}

}  // namespace

int LinearProgram::add_variable(double cost, double lo, double hi) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return variable_count() - 1;
}

int LinearProgram::add_row(std::vector<std::pair<int, double>> terms, Relation relation, double rhs) {
    rows.push_back({std::move(terms), relation, rhs});
    return row_count() - 1;
}

const char* to_string(LpStatus status) {
    switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

LpSolution solve_lp(const LinearProgram& lp) {
    const int nv = lp.variable_count();
    for (int j = 0; j < nv; ++j) {
        if (!std::isfinite(lp.lower[j]) || lp.lower[j] > lp.upper[j]) {
            throw InvalidParams("variable bounds must satisfy finite lo <= hi");
        }
    }

    // Collect internal rows as dense coefficient vectors over shifted vars.
    struct Row {
        std::vector<double> a;
        Relation rel;
        double b;
        double sign;
        int origin;
    };
    std::vector<Row> rows;
    std::vector<double> implied(nv, kInf);
    for (int k = 0; k < lp.row_count(); ++k) {
        const LpRow& src = lp.rows[k];
        Row row{std::vector<double>(nv, 0.0), src.relation, src.rhs, 1.0, k};
        for (auto [j, v] : src.terms) {
            if (j < 0 || j >= nv) {
                throw InvalidParams("row references unknown variable");
            }
            row.a[j] += v;
        }
        for (int j = 0; j < nv; ++j) {
            row.b -= row.a[j] * lp.lower[j];
        }
        if (row.rel == Relation::GreaterEq) {
            for (double& v : row.a) {
                v = -v;
            }
            row.b = -row.b;
            row.rel = Relation::LessEq;
            row.sign = -1.0;
        }
        if (row.rel == Relation::LessEq && row.b >= 0.0 &&
            std::all_of(row.a.begin(), row.a.end(), [](double v) { return v >= 0.0; })) {
            for (int j = 0; j < nv; ++j) {
                if (row.a[j] > 0.0) {
                    implied[j] = std::min(implied[j], row.b / row.a[j]);
                }
            }
        }
        rows.push_back(std::move(row));
    }
    for (int j = 0; j < nv; ++j) {
        double span = lp.upper[j] - lp.lower[j];
        if (std::isfinite(span) && implied[j] > span) {
            Row row{std::vector<double>(nv, 0.0), Relation::LessEq, span, 1.0, -1};
            row.a[j] = 1.0;
            rows.push_back(std::move(row));
        }
    }
    // Make every rhs non-negative.
    for (Row& row : rows) {
        if (row.b < 0.0) {
            for (double& v : row.a) {
                v = -v;
            }
            row.b = -row.b;
            row.sign = -row.sign;
            if (row.rel == Relation::LessEq) {
                row.rel = Relation::GreaterEq;
            }
        }
    }

    const int m = static_cast<int>(rows.size());
    int slack_count = 0;
    int art_count = 0;
    for (const Row& row : rows) {
        slack_count += row.rel != Relation::Equal;
        art_count += row.rel != Relation::LessEq;
    }
    const int first_art = nv + slack_count;
    const int ncols = first_art + art_count;
    Tableau tab(m, ncols);
    std::vector<int> basis(m);
    std::vector<int> identity(m);
    int next_slack = nv;
    int next_art = first_art;
    for (int r = 0; r < m; ++r) {
        const Row& row = rows[r];
        for (int j = 0; j < nv; ++j) {
            tab.at(r, j) = row.a[j];
        }
        tab.rhs(r) = row.b;
        if (row.rel == Relation::LessEq) {
            tab.at(r, next_slack) = 1.0;
            basis[r] = identity[r] = next_slack++;
        } else {
            if (row.rel == Relation::GreaterEq) {
                tab.at(r, next_slack++) = -1.0;
            }
            tab.at(r, next_art) = 1.0;
            basis[r] = identity[r] = next_art++;
        }
    }

    LpSolution sol;
    const int guard = 10 * (m + ncols) * (m + ncols);
    if (art_count > 0) {
        std::vector<double> phase1(ncols, 0.0);
        for (int c = first_art; c < ncols; ++c) {
            phase1[c] = -1.0;
        }
        load_objective(tab, basis, phase1);
        iterate(tab, basis, ncols, sol.iterations, guard);
        double scale = 1.0;
        for (const Row& row : rows) {
            scale = std::max(scale, std::fabs(row.b));
        }
        if (tab.obj(ncols) < -1e-9 * scale) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        // Drive zero-level artificials out where a structural pivot exists.
        for (int r = 0; r < m; ++r) {
            if (basis[r] < first_art) {
                continue;
            }
            for (int c = 0; c < first_art; ++c) {
                if (std::fabs(tab.at(r, c)) > kPivotTol) {
                    tab.pivot(r, c);
                    basis[r] = c;
                    break;
                }
            }
        }
    }

    std::vector<double> cost(ncols, 0.0);
    for (int j = 0; j < nv; ++j) {
        cost[j] = lp.objective[j];
    }
    load_objective(tab, basis, cost);
    LpStatus status = iterate(tab, basis, first_art, sol.iterations, guard);
    if (status == LpStatus::Unbounded) {
        sol.status = status;
        return sol;
    }

    sol.status = LpStatus::Optimal;
    sol.primal.assign(lp.lower.begin(), lp.lower.end());
    for (int r = 0; r < m; ++r) {
        if (basis[r] < nv) {
            sol.primal[basis[r]] += tab.rhs(r);
        }
    }
    sol.duals.assign(lp.row_count(), 0.0);
    for (int r = 0; r < m; ++r) {
        if (rows[r].origin >= 0) {
            sol.duals[rows[r].origin] = rows[r].sign * tab.obj(identity[r]);
        }
    }
    double value = 0.0;
    for (int j = 0; j < nv; ++j) {
        value += lp.objective[j] * sol.primal[j];
    }
    sol.objective = value;
    return sol;
}

double check_feasibility(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    for (int j = 0; j < lp.variable_count(); ++j) {
        worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
    }
    for (const LpRow& row : lp.rows) {
        double lhs = 0.0;
        for (auto [j, v] : row.terms) {
            lhs += v * x[j];
        }
        double gap = lhs - row.rhs;
        switch (row.relation) {
        case Relation::LessEq: worst = std::max(worst, gap); break;
        case Relation::GreaterEq: worst = std::max(worst, -gap); break;
        case Relation::Equal: worst = std::max(worst, std::fabs(gap)); break;
        }
    }
    return worst;
}

double dual_objective(const LinearProgram& lp, const std::vector<double>& y) {
    const int nv = lp.variable_count();
    std::vector<double> reduced(lp.objective);  // c - A^T y
    double value = 0.0;
    for (int k = 0; k < lp.row_count(); ++k) {
        const LpRow& row = lp.rows[k];
        if ((row.relation == Relation::LessEq && y[k] < -1e-12) ||
            (row.relation == Relation::GreaterEq && y[k] > 1e-12)) {
            return kInf;
        }
        value += y[k] * row.rhs;
        for (auto [j, v] : row.terms) {
            reduced[j] -= v * y[k];
        }
    }
    for (int j = 0; j < nv; ++j) {
        if (reduced[j] > 0.0) {
            if (!std::isfinite(lp.upper[j])) {
                if (reduced[j] > 1e-9) {
                    return kInf;
                }
                continue;
            }
            value += reduced[j] * lp.upper[j];
        } else {
            value += reduced[j] * lp.lower[j];
        }
    }
    return value;
}

}  // namespace stochmatch
