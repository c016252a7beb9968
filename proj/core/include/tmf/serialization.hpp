#pragma once

#include <filesystem>
#include <iosfwd>

#include "tmf/factorizer.hpp"

namespace tmf {

/// Versioned JSON container: {"format": "tmf-factor-model", "version": 1,
/// "D", "M", "N", "hyperparams", "P", "Q"} with P (D x M) and Q (D x N)
/// flattened row-major. Doubles are written in shortest round-trip form.
void write_model_json(std::ostream& out, const FactorModel& model);
FactorModel read_model_json(std::istream& in);

void save_model(const std::filesystem::path& path, const FactorModel& model);
FactorModel load_model(const std::filesystem::path& path);

}  // namespace tmf
