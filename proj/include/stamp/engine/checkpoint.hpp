#pragma once

#include <string>

#include "stamp/engine/engine.hpp"

namespace stamp::engine {

// Versioned binary container for the full message state. Records are indexed
// by (t, kind, j) and round-trip exactly.
void write_checkpoint(const std::string& path, const Engine::Messages& msgs,
                      const sparse::SparseSym& msg_pattern);

Engine::Messages read_checkpoint(const std::string& path, sparse::SparseSym* pattern_out);

}  // namespace stamp::engine
