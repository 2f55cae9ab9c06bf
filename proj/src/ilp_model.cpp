#include "dcilp/ilp.hpp"

#include "dcilp/io.hpp"

#include <sstream>
#include <stdexcept>

namespace dcilp::ilp {

int IlpModel::add_var(std::string name, double obj_coef) {
    var_names.push_back(std::move(name));
    objective.push_back(obj_coef);
    fixed.push_back(-1);
    return num_vars() - 1;
}

void IlpModel::fix(int var, int value) {
    if (var < 0 || var >= num_vars()) throw std::out_of_range("fix: bad variable index");
    if (value != 0 && value != 1) throw std::invalid_argument("fix: value must be 0 or 1");
    fixed[var] = static_cast<std::int8_t>(value);
}

void IlpModel::add_row(std::string name, std::vector<std::pair<int, int>> terms, Sense sense,
                       int rhs) {
    for (auto& [v, c] : terms)
        if (v < 0 || v >= num_vars()) throw std::out_of_range("add_row: bad variable index");
    rows.push_back(Constraint{std::move(name), std::move(terms), sense, rhs});
}

VerifyResult verify(const IlpModel& model, const std::vector<std::uint8_t>& assignment) {
    if (static_cast<int>(assignment.size()) != model.num_vars())
        throw std::invalid_argument("verify: assignment size mismatch");
    VerifyResult res;
    for (int v = 0; v < model.num_vars(); ++v) {
        if (assignment[v] != 0 && assignment[v] != 1) {
            res.ok = false;
            res.violated.push_back("binary:" + model.var_names[v]);
        }
        if (model.fixed[v] >= 0 && assignment[v] != model.fixed[v]) {
            res.ok = false;
            res.violated.push_back("fix:" + model.var_names[v]);
        }
    }
    for (const auto& row : model.rows) {
        long lhs = 0;
        for (auto& [v, c] : row.terms) lhs += static_cast<long>(c) * assignment[v];
        bool sat = true;
        switch (row.sense) {
            case Sense::le: sat = lhs <= row.rhs; break;
            case Sense::ge: sat = lhs >= row.rhs; break;
            case Sense::eq: sat = lhs == row.rhs; break;
        }
        if (!sat) {
            res.ok = false;
            res.violated.push_back(row.name);
        }
    }
    return res;
}

namespace {

void append_terms(std::ostringstream& ss, const std::vector<std::pair<int, double>>& terms,
                  const std::vector<std::string>& names) {
    bool first = true;
    for (auto& [v, c] : terms) {
        if (c == 0.0) continue;
        const double mag = c < 0 ? -c : c;
        if (first) {
            ss << (c < 0 ? "- " : "");
            first = false;
        } else {
            ss << (c < 0 ? " - " : " + ");
        }
        if (mag != 1.0) ss << fmt_double(mag) << " ";
        ss << names[v];
    }
    if (first) ss << "0";
}

}  // namespace

std::string export_lp(const IlpModel& model) {
    std::ostringstream ss;
    ss << "Maximize\n obj: ";
    std::vector<std::pair<int, double>> obj_terms;
    for (int v = 0; v < model.num_vars(); ++v)
        if (model.objective[v] != 0.0) obj_terms.emplace_back(v, model.objective[v]);
    append_terms(ss, obj_terms, model.var_names);
    ss << "\nSubject To\n";
    for (const auto& row : model.rows) {
        ss << " " << row.name << ": ";
        std::vector<std::pair<int, double>> terms;
        for (auto& [v, c] : row.terms) terms.emplace_back(v, static_cast<double>(c));
        append_terms(ss, terms, model.var_names);
        switch (row.sense) {
            case Sense::le: ss << " <= "; break;
            case Sense::ge: ss << " >= "; break;
            case Sense::eq: ss << " = "; break;
        }
        ss << row.rhs << "\n";
    }
    bool any_fixed = false;
    for (auto f : model.fixed) any_fixed = any_fixed || f >= 0;
    if (any_fixed) {
        ss << "Bounds\n";
        for (int v = 0; v < model.num_vars(); ++v)
            if (model.fixed[v] >= 0)
                ss << " " << model.var_names[v] << " = " << static_cast<int>(model.fixed[v])
                   << "\n";
    }
    ss << "Binary\n";
    for (const auto& name : model.var_names) ss << " " << name << "\n";
    ss << "End\n";
    return ss.str();
}

namespace {

struct Tokenizer {
    std::istringstream in;
    explicit Tokenizer(const std::string& text) : in(text) {}
    bool next(std::string& tok) { return static_cast<bool>(in >> tok); }
};

bool is_number(const std::string& tok) {
    return !tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '.' ||
                            ((tok[0] == '-' || tok[0] == '+') && tok.size() > 1));
}

}  // namespace

IlpModel parse_lp(const std::string& text) {
    // 1st pass: variable names from the Binary section, in order
    IlpModel model;
    {
        std::istringstream in(text);
        std::string line;
        bool in_binary = false;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string tok;
            if (!(ls >> tok)) continue;
            if (tok == "Binary") {
                in_binary = true;
                continue;
            }
            if (tok == "End") in_binary = false;
            if (in_binary) model.add_var(tok);
        }
    }
    auto var_index = [&](const std::string& name) {
        for (int v = 0; v < model.num_vars(); ++v)
            if (model.var_names[v] == name) return v;
        throw std::runtime_error("parse_lp: unknown variable " + name);
    };

    std::istringstream in(text);
    std::string line;
    enum { none, objective, subject_to, bounds } section = none;
    while (std::getline(in, line)) {
        std::istringstream probe(line);
        std::string head;
        if (!(probe >> head)) continue;
        if (head == "Maximize") { section = objective; continue; }
        if (head == "Subject") { section = subject_to; continue; }
        if (head == "Bounds") { section = bounds; continue; }
        if (head == "Binary" || head == "End") { section = none; continue; }

        if (section == objective || section == subject_to) {
            // "<name>: <terms> [<sense> <rhs>]"
            const auto colon = line.find(':');
            if (colon == std::string::npos) throw std::runtime_error("parse_lp: missing row name");
            std::string row_name = line.substr(0, colon);
            row_name.erase(0, row_name.find_first_not_of(" \t"));
            std::string body = line.substr(colon + 1);

            std::vector<std::pair<int, double>> terms;
            Sense sense = Sense::le;
            bool has_sense = false;
            double rhs = 0;

            Tokenizer tok(body);
            std::string t;
            double sign = 1.0;
            double coef = 1.0;
            bool coef_set = false;
            while (tok.next(t)) {
                if (t == "+") { sign = 1.0; continue; }
                if (t == "-") { sign = -1.0; continue; }
                if (t == "<=" || t == ">=" || t == "=") {
                    sense = t == "<=" ? Sense::le : (t == ">=" ? Sense::ge : Sense::eq);
                    has_sense = true;
                    std::string rtok;
                    if (!tok.next(rtok)) throw std::runtime_error("parse_lp: missing rhs");
                    rhs = std::stod(rtok);
                    break;
                }
                if (is_number(t)) {
                    coef = std::stod(t);
                    coef_set = true;
                    continue;
                }
                terms.emplace_back(var_index(t), sign * (coef_set ? coef : 1.0));
                sign = 1.0;
                coef = 1.0;
                coef_set = false;
            }
            // a dangling constant ("obj: 0") contributes nothing

            if (section == objective) {
                for (auto& [v, c] : terms) model.objective[v] = c;
            } else {
                if (!has_sense) throw std::runtime_error("parse_lp: row without sense");
                std::vector<std::pair<int, int>> iterms;
                for (auto& [v, c] : terms) {
                    const int ic = static_cast<int>(c);
                    if (static_cast<double>(ic) != c)
                        throw std::runtime_error("parse_lp: non-integer constraint coefficient");
                    iterms.emplace_back(v, ic);
                }
                model.add_row(row_name, std::move(iterms), sense, static_cast<int>(rhs));
            }
        } else if (section == bounds) {
            std::istringstream ls(line);
            std::string name, eq;
            int value;
            if (ls >> name >> eq >> value && eq == "=") model.fix(var_index(name), value);
        }
    }
    return model;
}

std::string stats_to_json(const SolverStats& stats, bool include_wall_time) {
    std::ostringstream ss;
    ss << "{\"nodes\": " << stats.nodes << ", \"propagations\": " << stats.propagations
       << ", \"proven\": " << (stats.proven ? "true" : "false");
    if (include_wall_time) ss << ", \"wall_ms\": " << fmt_double(stats.wall_ms);
    ss << "}";
    return ss.str();
}

}  // namespace dcilp::ilp
