#include "mcem/theta.hpp"

#include <cmath>

#include "mcem/errors.hpp"

namespace mcem {

Theta::Theta(std::vector<std::string> names, std::vector<double> values,
             std::vector<Domain> domains)
    : names_(std::move(names)), values_(std::move(values)),
      domains_(std::move(domains)) {
    if (names_.size() != values_.size() || names_.size() != domains_.size())
        throw config_error("Theta: names, values and domains must have equal length");
}

Theta Theta::with_values(std::vector<double> v) const {
    if (v.size() != values_.size())
        throw config_error("Theta::with_values: dimension mismatch");
    Theta out = *this;
    out.values_ = std::move(v);
    return out;
}

void Theta::validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw domain_error("parameter '" + names_[i] + "' is not finite");
        if (domains_[i] == Domain::positive && !(values_[i] > 0.0))
            throw domain_error("parameter '" + names_[i] +
                               "' must be strictly positive, got " +
                               std::to_string(values_[i]));
    }
}

bool Theta::same_shape(const Theta& other) const {
    return names_ == other.names_ && domains_ == other.domains_;
}

} // namespace mcem
