#include "mcem/schedule.hpp"

#include <cmath>

#include "mcem/errors.hpp"

namespace mcem {

void ScheduleConfig::validate() const {
    if (m0 < 2) throw config_error("schedule: m0 must be >= 2");
    if (kind == ScheduleKind::polynomial && !(alpha > 1.0))
        throw config_error("schedule: polynomial growth needs alpha > 1");
}

ScheduleConfig constant_schedule(std::int64_t m0) {
    ScheduleConfig cfg;
    cfg.kind = ScheduleKind::constant;
    cfg.m0 = m0;
    cfg.validate();
    return cfg;
}

ScheduleConfig polynomial_schedule(std::int64_t m0, double alpha) {
    ScheduleConfig cfg;
    cfg.kind = ScheduleKind::polynomial;
    cfg.m0 = m0;
    cfg.alpha = alpha;
    cfg.validate();
    return cfg;
}

std::int64_t schedule_size(const ScheduleConfig& cfg, std::int64_t t) {
    cfg.validate();
    if (t < 0) throw config_error("schedule: iteration index must be >= 0");
    if (cfg.kind == ScheduleKind::constant) return cfg.m0;
    double v = static_cast<double>(cfg.m0) *
               std::pow(1.0 + static_cast<double>(t), cfg.alpha);
    return static_cast<std::int64_t>(std::ceil(v));
}

} // namespace mcem
