#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace collapse {

using cplx = std::complex<double>;

// In-place radix-2 FFT, n a power of two. Forward is unnormalized;
// inverse divides by n so ifft(fft(a)) == a.
void fft_radix2(std::vector<cplx>& a, bool inverse);

bool is_power_of_two(std::size_t n);

// Angular frequency of FFT bin j on an n-point grid of spacing h,
// mapped to the symmetric band (-pi/h, pi/h].
double fft_wavenumber(std::size_t j, std::size_t n, double h);

}  // namespace collapse
