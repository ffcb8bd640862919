#pragma once

#include <cstdint>

namespace mcem {

enum class ScheduleKind {
    constant,   // m_t = m0
    polynomial, // m_t = ceil(m0 * (1+t)^alpha), alpha > 1
};

// Monte Carlo sample size per iteration, t = 0, 1, 2, ...
//
// The polynomial kind has summable reciprocals (sum m_t^-1 <= pi^2/(6 m0)
// for alpha = 2), which the stabilized driver requires; constant schedules
// do not qualify and are rejected there.
struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::constant;
    std::int64_t m0 = 2;
    double alpha = 2.0; // only meaningful for polynomial

    // Throws config_error: m0 < 2 always, alpha <= 1 for polynomial.
    void validate() const;
};

ScheduleConfig constant_schedule(std::int64_t m0);
ScheduleConfig polynomial_schedule(std::int64_t m0, double alpha);

std::int64_t schedule_size(const ScheduleConfig& cfg, std::int64_t t);

} // namespace mcem
