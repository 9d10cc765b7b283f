#pragma once

#include <string>

namespace eobs {

// Locale-independent number formatting: shortest-faithful general format
// with 17 significant digits, '.' decimal point.  All CSV/JSON writers go
// through this so identical runs produce byte-identical files.
[[nodiscard]] std::string format_number(double value);

}  // namespace eobs
