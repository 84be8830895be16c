#pragma once

#include <stdexcept>
#include <string>

namespace stochci {

//! A parameter relation the construction needs (integrality, ordering,
//! a catalogued inequality) does not hold.
struct LedgerError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

//! The grid is too coarse for the requested quantity.
struct ResolutionError : std::runtime_error {
    ResolutionError(const std::string& what, int min_n_) : std::runtime_error(what), min_n(min_n_) {}
    int min_n;
};

} // namespace stochci
