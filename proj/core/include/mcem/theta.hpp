#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mcem {

enum class Domain {
    unconstrained,
    positive, // strictly > 0; 0 itself is out of the domain
};

// A named parameter vector with per-component domain tags.
//
// Algorithms never clamp: any operation that would produce a value outside
// its domain throws domain_error naming the component instead.
class Theta {
public:
    Theta() = default;
    Theta(std::vector<std::string> names,
          std::vector<double> values,
          std::vector<Domain> domains);

    std::size_t dim() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    const std::vector<double>& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Domain>& domains() const { return domains_; }

    // Same names/domains, new values. Does not validate; call validate().
    Theta with_values(std::vector<double> v) const;

    // Throws domain_error naming the first offending component: NaN or
    // infinite anywhere, or a `positive` component <= 0.
    void validate() const;

    bool same_shape(const Theta& other) const;

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::vector<Domain> domains_;
};

} // namespace mcem
