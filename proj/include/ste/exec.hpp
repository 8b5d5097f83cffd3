#pragma once

namespace ste {

// Every data-parallel kernel has a plain serial reference and an OpenMP
// version. Both produce bit-identical results: work is split only across
// independent outputs, never across a floating-point reduction.
enum class Exec { serial, parallel };

int max_threads();

}  // namespace ste
