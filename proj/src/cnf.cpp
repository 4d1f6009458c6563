#include "rtdlab/cnf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "propagator.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::cnf {

bool Clause::is_tautology() const {
  for (std::size_t i = 0; i < literals.size(); ++i) {
    for (std::size_t j = i + 1; j < literals.size(); ++j) {
      if (literals[i].variable == literals[j].variable && literals[i].negated != literals[j].negated)
        return true;
    }
  }
  return false;
}

bool Clause::is_horn() const {
  return std::count_if(literals.begin(), literals.end(), [](Literal l) { return !l.negated; }) <= 1;
}

bool satisfies(const Formula& f, const Assignment& assignment) {
  return count_unsatisfied(f, assignment) == 0;
}

std::size_t count_unsatisfied(const Formula& f, const Assignment& assignment) {
  if (assignment.size() < static_cast<std::size_t>(f.num_vars) + 1) return f.clauses.size();
  std::size_t unsat = 0;
  for (const auto& clause : f.clauses) {
    const bool sat = std::any_of(clause.literals.begin(), clause.literals.end(),
                                 [&](Literal l) { return assignment[l.variable] != l.negated; });
    if (!sat) ++unsat;
  }
  return unsat;
}

namespace {

template <class T>
bool parse_number(std::string_view token, T& out) {
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

// Reads generator metadata from a comment line body such as
// " seed=7 ratio=4.26" or " id=inst_0001".
void read_comment(std::string_view body, FormulaMetadata& meta) {
  std::istringstream words{std::string(body)};
  std::string word;
  while (words >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) continue;
    const std::string_view key(word.data(), eq);
    const std::string_view value(word.data() + eq + 1, word.size() - eq - 1);
    if (key == "seed") {
      std::uint64_t seed = 0;
      if (parse_number(value, seed)) meta.seed = seed;
    } else if (key == "ratio") {
      double ratio = 0;
      if (parse_number(value, ratio)) meta.ratio = ratio;
    } else if (key == "id") {
      meta.instance_id = std::string(value);
    }
  }
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

Formula parse_dimacs(std::istream& in) {
  Formula f;
  bool have_header = false;
  std::size_t declared_clauses = 0;
  Clause current;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& msg) {
    throw DataError("dimacs line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == 'c') {
      read_comment(std::string_view(line).substr(first + 1), f.metadata);
      continue;
    }
    if (line[first] == '%') break;  // SATLIB trailer
    if (line[first] == 'p') {
      if (have_header) fail("duplicate header");
      std::istringstream header(line.substr(first));
      std::string p, format;
      long long vars = -1, clauses = -1;
      std::string extra;
      if (!(header >> p >> format >> vars >> clauses) || format != "cnf" || vars < 0 || clauses < 0 ||
          (header >> extra)) {
        fail("malformed header '" + line + "'");
      }
      f.num_vars = static_cast<Var>(vars);
      declared_clauses = static_cast<std::size_t>(clauses);
      f.clauses.reserve(declared_clauses);
      have_header = true;
      continue;
    }
    if (!have_header) fail("clause before header");

    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      long long lit = 0;
      if (!parse_number(std::string_view(token), lit)) fail("bad literal '" + token + "'");
      if (lit == 0) {
        if (current.literals.empty()) fail("empty clause");
        // Normalize duplicates while preserving first-occurrence order.
        std::vector<Literal> unique;
        for (const Literal l : current.literals) {
          if (std::find(unique.begin(), unique.end(), l) == unique.end()) unique.push_back(l);
        }
        current.literals = std::move(unique);
        if (current.is_tautology()) f.metadata.has_tautology = true;
        f.clauses.push_back(std::move(current));
        current = Clause{};
        continue;
      }
      const long long var = lit < 0 ? -lit : lit;
      if (var > static_cast<long long>(f.num_vars)) {
        fail("variable " + std::to_string(var) + " exceeds declared count " + std::to_string(f.num_vars));
      }
      current.literals.push_back(Literal::from_dimacs(static_cast<int>(lit)));
    }
  }
  if (!have_header) throw DataError("dimacs: missing header");
  if (!current.literals.empty()) throw DataError("dimacs: unterminated final clause");
  if (f.clauses.size() != declared_clauses) {
    throw DataError("dimacs: clause count mismatch (header " + std::to_string(declared_clauses) + ", found " +
                    std::to_string(f.clauses.size()) + ")");
  }
  return f;
}

Formula parse_dimacs(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dimacs(in);
}

void write_dimacs(std::ostream& out, const Formula& f) {
  if (f.metadata.instance_id) out << "c id=" << *f.metadata.instance_id << '\n';
  if (f.metadata.seed || f.metadata.ratio) {
    out << 'c';
    if (f.metadata.seed) out << " seed=" << *f.metadata.seed;
    if (f.metadata.ratio) out << " ratio=" << format_double(*f.metadata.ratio);
    out << '\n';
  }
  out << "p cnf " << f.num_vars << ' ' << f.clauses.size() << '\n';
  for (const auto& clause : f.clauses) {
    for (const Literal lit : clause.literals) out << lit.to_dimacs() << ' ';
    out << "0\n";
  }
}

std::string write_dimacs(const Formula& f) {
  std::ostringstream out;
  write_dimacs(out, f);
  return out.str();
}

Formula generate_random_3sat(Var n, double ratio, std::uint64_t seed) {
  if (n < 3) throw DataError("generate_random_3sat: need at least 3 variables");
  if (!(ratio > 0) || !std::isfinite(ratio)) throw DataError("generate_random_3sat: ratio must be positive");

  Formula f;
  f.num_vars = n;
  // 4.27 * 1500 is 6404.999... in binary; ratios are decimal, so absorb
  // representation error before flooring.
  const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) * (1 + 1e-12)));
  f.clauses.reserve(m);
  Rng rng(seed);
  for (std::size_t c = 0; c < m; ++c) {
    Clause clause;
    while (clause.literals.size() < 3) {
      const auto v = static_cast<Var>(rng.below(n) + 1);
      const bool repeated = std::any_of(clause.literals.begin(), clause.literals.end(),
                                        [v](Literal l) { return l.variable == v; });
      if (repeated) continue;
      clause.literals.push_back({v, rng.coin()});
    }
    f.clauses.push_back(std::move(clause));
  }
  f.metadata.seed = seed;
  f.metadata.ratio = ratio;
  return f;
}

std::string to_string(SatVerdict::Kind kind) {
  switch (kind) {
    case SatVerdict::Kind::Satisfiable: return "satisfiable";
    case SatVerdict::Kind::Unsatisfiable: return "unsatisfiable";
    case SatVerdict::Kind::Unknown: return "unknown";
  }
  return "unknown";
}

namespace {

enum class Search { Sat, Unsat, Budget };

class Dpll {
 public:
  Dpll(const Formula& f, std::uint64_t budget) : prop_(f), budget_(budget) {}

  Search run() {
    if (!prop_.propagate()) return Search::Unsat;
    return search();
  }

  [[nodiscard]] Assignment model() const { return prop_.model(); }
  [[nodiscard]] std::uint64_t decisions() const { return decisions_; }

 private:
  Search search() {
    prop_.eliminate_pure_literals();
    if (prop_.all_satisfied()) return Search::Sat;
    const auto lit = prop_.branch_literal();
    if (!lit) return Search::Unsat;  // an open clause with no free literal
    if (decisions_ >= budget_) return Search::Budget;
    ++decisions_;

    const auto mark = prop_.trail_size();
    for (const Literal choice : {*lit, ~*lit}) {
      if (prop_.assign(choice)) {
        const auto r = search();
        if (r != Search::Unsat) return r;
      }
      prop_.backtrack(mark);
    }
    return Search::Unsat;
  }

  Propagator prop_;
  std::uint64_t budget_;
  std::uint64_t decisions_ = 0;
};

}  // namespace

SatVerdict dpll_satisfiable(const Formula& f, std::uint64_t node_budget) {
  Dpll solver(f, node_budget);
  SatVerdict verdict;
  switch (solver.run()) {
    case Search::Sat:
      verdict.kind = SatVerdict::Kind::Satisfiable;
      verdict.model = solver.model();
      break;
    case Search::Unsat: verdict.kind = SatVerdict::Kind::Unsatisfiable; break;
    case Search::Budget: verdict.kind = SatVerdict::Kind::Unknown; break;
  }
  verdict.decisions = solver.decisions();
  return verdict;
}

Simplification simplify(const Formula& f) {
  Simplification out;
  out.formula.num_vars = f.num_vars;
  out.formula.metadata = f.metadata;

  Propagator prop(f);
  bool ok = prop.propagate();
  if (ok) {
    prop.eliminate_pure_literals();
    ok = prop.propagate();
  }
  if (!ok) {
    out.conflict = true;
    out.formula.clauses.push_back(Clause{});
    out.removed_clauses = f.clauses.size();
    out.removed_vars = f.num_vars;
    return out;
  }

  std::vector<bool> seen(static_cast<std::size_t>(f.num_vars) + 1, false);
  for (std::size_t c = 0; c < f.clauses.size(); ++c) {
    if (!prop.clause_open(c)) continue;
    Clause reduced;
    for (const Literal lit : f.clauses[c].literals) {
      if (prop.value(lit) == 0) {
        reduced.literals.push_back(lit);
        if (!seen[lit.variable]) {
          seen[lit.variable] = true;
          ++out.remaining_vars;
        }
      }
    }
    out.formula.clauses.push_back(std::move(reduced));
  }
  out.removed_clauses = f.clauses.size() - out.formula.clauses.size();
  out.removed_vars = f.num_vars - out.remaining_vars;
  return out;
}

}  // namespace rtdlab::cnf
