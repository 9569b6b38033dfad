#pragma once

#include <cstddef>

namespace uot {

// Every parallel kernel in this project also has a serial execution mode
// running the exact same chunking and reduction order, so Serial and
// Parallel results are bitwise identical. Serial is the reference used in
// tests; Parallel is the OpenMP path.
enum class ExecPolicy { Serial, Parallel };

// Fixed chunk count for batch reductions. Independent of the number of
// OpenMP threads so that results do not depend on the machine.
inline constexpr std::size_t kReductionChunks = 32;

inline std::size_t chunk_begin(std::size_t n, std::size_t chunk) {
    return n * chunk / kReductionChunks;
}
inline std::size_t chunk_end(std::size_t n, std::size_t chunk) {
    return n * (chunk + 1) / kReductionChunks;
}

} // namespace uot
