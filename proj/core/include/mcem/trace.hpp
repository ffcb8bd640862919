#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcem/theta.hpp"

namespace mcem {

// One post-update state of an iterative run.
//
// t starts at 1 for the first update and increases by 1 per record.
// m is the Monte Carlo sample size used for that update (0 for exact EM).
// p counts restarts/reinitializations so far (0 when the run has none).
// loglik may be NaN when the model cannot evaluate it.
struct IterationRecord {
    std::int64_t t = 0;
    Theta theta;
    double loglik = 0.0;
    std::int64_t m = 0;
    std::int64_t p = 0;
    double wall_ms = 0.0; // not serialized; wall time is never reproducible
};

struct Trace {
    std::vector<std::string> component_names;
    std::vector<IterationRecord> records;

    // Set by the sample-size-adaptive driver when the cap was reached while
    // the accuracy rule still asked for more draws. The run continues.
    bool m_cap_hit = false;

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }
    const IterationRecord& back() const;
    void push(IterationRecord rec); // enforces t monotonicity, p nondecreasing
};

// Shortest decimal string that round-trips a double (printf %.17g, with
// the usual nan/inf spellings). All numeric CSV output goes through this
// so identical runs produce identical bytes.
std::string format_double(double x);

// CSV layout: header "t,m,p,loglik,<component names...>", one row per
// record, '\n' line endings, no trailing blank line beyond the final '\n'.
void trace_write(const Trace& trace, const std::string& path);
std::string trace_to_csv(const Trace& trace);

// Inverse of trace_write for the columns it stores. Domain tags are not
// serialized, so thetas read back carry unconstrained tags; values, t, m,
// p and loglik round-trip bit-exactly.
Trace trace_read(const std::string& path);

} // namespace mcem
