#pragma once

#include <limits>
#include <utility>
#include <vector>

namespace stochmatch {

enum class Relation { LessEq, Equal, GreaterEq };

struct LpRow {
    std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
    Relation relation = Relation::LessEq;
    double rhs = 0.0;
};

// maximize objective . x  subject to rows and lower <= x <= upper.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LpRow> rows;

    int variable_count() const { return static_cast<int>(objective.size()); }
    int row_count() const { return static_cast<int>(rows.size()); }

    int add_variable(double cost, double lo = 0.0, double hi = std::numeric_limits<double>::infinity());
    int add_row(std::vector<std::pair<int, double>> terms, Relation relation, double rhs);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> primal;
    std::vector<double> duals;  // one per row of the original program
    int iterations = 0;
};

// Two-phase dense tableau simplex with Bland's rule. Throws SolverStalled when
// the iteration guard 10 (rows + cols)^2 is exceeded, NumericalFailure on a
// non-finite tableau.
LpSolution solve_lp(const LinearProgram& lp);

// Largest violation over rows and bounds; 0 for a feasible point.
double check_feasibility(const LinearProgram& lp, const std::vector<double>& x);

// Objective of the Lagrangian dual at row multipliers y, with bound multipliers
// chosen optimally. +inf when y is dual infeasible (wrong sign or an unbounded
// variable with positive reduced profit).
double dual_objective(const LinearProgram& lp, const std::vector<double>& y);

}  // namespace stochmatch
