#pragma once

#include "segforge/kernels.hpp"

namespace segforge::kernels {

// Defined in kernels_avx2.cpp when SEGFORGE_HAVE_AVX2 is set.
const KernelTable& avx2_table_unchecked();

}  // namespace segforge::kernels
