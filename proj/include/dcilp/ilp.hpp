#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dcilp::ilp {

enum class Sense { le, ge, eq };

struct Constraint {
    std::string name;
    std::vector<std::pair<int, int>> terms;  // (variable index, integer coefficient)
    Sense sense = Sense::le;
    int rhs = 0;
};

// 0/1 program: maximize a real linear objective over binary variables
// subject to integer-coefficient rows and per-variable fixings.
struct IlpModel {
    std::vector<std::string> var_names;
    std::vector<double> objective;
    std::vector<Constraint> rows;
    std::vector<std::int8_t> fixed;  // -1 free, else forced value

    int num_vars() const { return static_cast<int>(var_names.size()); }
    int add_var(std::string name, double obj_coef = 0.0);
    void fix(int var, int value);
    void add_row(std::string name, std::vector<std::pair<int, int>> terms, Sense sense, int rhs);
};

struct SolverStats {
    long nodes = 0;
    long propagations = 0;
    double wall_ms = 0.0;          // volatile, excluded from reproducible artifacts
    bool proven = true;            // false when the time budget ran out
    std::vector<double> incumbent_trace;
    std::vector<std::pair<int, int>> root_fixings;  // (var, value) forced before branching
};

enum class SolveStatus { optimal, infeasible, budget_exceeded };

struct SolutionPool {
    SolveStatus status = SolveStatus::infeasible;
    double objective_value = 0.0;
    std::vector<std::vector<std::uint8_t>> solutions;  // complete assignments
    SolverStats stats;
};

// Exact optimum by depth-first branch and bound: bound propagation fixes
// forced variables, the admissible bound is the fixed objective plus the sum
// of positive coefficients over unfixed variables, branching picks the
// unfixed variable with the largest |objective coefficient| (ties by index)
// and tries the improving value first. Independent constraint components are
// solved separately and recombined. Once the optimum is proven a second
// bounded search enumerates up to pool_capacity optimal assignments.
SolutionPool solve(const IlpModel& model, int pool_capacity = 16, double time_budget_s = 300.0);

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> violated;  // row names, plus "fix:<var>" entries
};

// Row-by-row check of a complete assignment; independent of the solver.
VerifyResult verify(const IlpModel& model, const std::vector<std::uint8_t>& assignment);

// LP text format: Maximize/obj line, Subject To rows, a Bounds section for
// fixings when present, Binary listing every variable, End. Deterministic
// variable and row ordering.
std::string export_lp(const IlpModel& model);

// Reader for the exact dialect emitted by export_lp.
IlpModel parse_lp(const std::string& text);

std::string stats_to_json(const SolverStats& stats, bool include_wall_time = false);

}  // namespace dcilp::ilp
