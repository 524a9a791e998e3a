#pragma once

namespace qamcs {

/// Execution policy for the data-parallel drivers. `serial` runs the same
/// arithmetic on one thread and is the reference the parallel path is
/// checked against bit for bit.
enum class Exec { serial, parallel };

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace qamcs
