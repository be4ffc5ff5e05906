#pragma once

#include <complex>
#include <span>

#include "uffia/core.hpp"

UFFIA_NAMESPACE_BEGIN
namespace detail {

/// Unnormalised real DFT of length in.size(); out holds n/2+1 bins.
void rfft(std::span<const double> in, std::span<std::complex<double>> out);
/// Unnormalised inverse of rfft for length out.size(); in holds n/2+1 bins.
void irfft(std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace detail
UFFIA_NAMESPACE_END
