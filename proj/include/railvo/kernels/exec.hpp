#pragma once

namespace railvo::kernels {

/// Selects between the OpenMP kernel and the single-threaded reference loop.
/// Both produce bit-identical results; the serial path exists for testing and
/// benchmarking.
enum class Exec { Serial, Parallel };

}  // namespace railvo::kernels
