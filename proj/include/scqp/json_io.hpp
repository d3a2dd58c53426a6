#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>

#include "scqp/bench.hpp"
#include "scqp/objectives.hpp"
#include "scqp/solver.hpp"

namespace scqp {

// JSON shapes used by the command line tool and the benchmark reports.
//
// Problem spec:
//   {"objective": {"kind": "markowitz", "alpha": 2.0},
//    "return_floors": [0.1, null], "risk_caps": ["inf", 0.5]}
// Floors and caps may be omitted, null, or empty (no constraints). Entry
// values are numbers, null (constraint off), or the strings "inf"/"-inf".
// Kinds: markowitz, sharpe_ratio, generalized_sharpe, worst_case,
// exp_utility, kelly, min_variance, max_return. Custom-utility objectives
// carry code callbacks and have no JSON form.
//
// Trace stream: one JSON object per line,
//   {"k":0,"t":0.0021,"f":-0.31,"step":0.4,"inner_iters":0,"qp_iters":3}
//
// Benchmark report:
//   {"cells":[{"method":...,"size":...,"seed":...,"objective":...,
//              "gap":...,"seconds":...,"iterations":...,"failed":...,
//              "error":...}, ...],
//    "fits":{"scqp":1.2, ...}}

nlohmann::json objective_to_json(const ObjectiveModel& model);
ObjectiveModel objective_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const MvpSpec& spec);
MvpSpec spec_from_json(const nlohmann::json& j);

nlohmann::json trace_record_to_json(const TraceRecord& record);
void write_trace_ldjson(std::ostream& os, const SolveTrace& trace);

// {"application","sizes","seeds","methods","oracle_resolution","output",
//  "termination":{"outer_tol","step_tol","max_outer","max_inner"},
//  "spec": <problem spec>}  -- all but sizes/seeds optional; "spec" is
// required exactly when application is 0.
BenchConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const BenchConfig& config);

nlohmann::json report_to_json(const BenchReport& report);

// Full solve output for the command line: weights, objective, status,
// iteration count, terminal residual, and the moments at the solution.
nlohmann::json solution_to_json(const SolveResult& result, const MarketModel& market);

// Parses text as JSON, rethrowing malformed input as InvalidProblem with
// the parser's position message.
nlohmann::json parse_json_text(const std::string& text, const std::string& what);

// Reads and parses a JSON file; InvalidProblem when unreadable or invalid.
nlohmann::json load_json_file(const std::string& path);

}  // namespace scqp
