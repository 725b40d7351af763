#ifndef SCFD_ERRORS_HPP
#define SCFD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace scfd {

// Sampling depth too shallow for the requested frequency or radius.
// Carries the minimal admissible depth so callers can retry or report it.
class ResolutionError : public std::runtime_error {
public:
    ResolutionError(const std::string& what, int min_depth)
        : std::runtime_error(what), min_depth_(min_depth) {}
    int min_depth() const { return min_depth_; }

private:
    int min_depth_;
};

class WordTooShortError : public std::runtime_error {
public:
    explicit WordTooShortError(const std::string& what)
        : std::runtime_error(what) {}
};

class DegenerateVarianceError : public std::runtime_error {
public:
    explicit DegenerateVarianceError(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace scfd

#endif
