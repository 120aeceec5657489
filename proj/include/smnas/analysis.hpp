#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "smnas/pareto.hpp"

namespace smnas {

// Architecture factors behind the correlation analysis. Doubling positions
// DC_x are the 1-based block index of the x-th code-2 block, counted across
// the whole encoded backbone (stem excluded) and normalized by depth; len_x
// is the share of blocks in resolution stage x.
struct FactorVector {
  int depth = 0;
  int width = 0;
  std::array<std::optional<double>, 4> dc;  // DC_1..DC_4, absent if fewer doublings
  std::array<double, 4> len{};              // len_2..len_5, sums to 1
  double accuracy = 0;
  double flops = 0;  // backbone GFLOPs (the stage-two objective)
};

FactorVector extract_factors(const EvalRecord& record);  // modular + ok only

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> r;  // NaN marks undefined (zero variance / too few pairs)
};

// Pairwise-complete Pearson matrix over the factor columns; requires at
// least 3 records. Zero-variance factors come out undefined, not 0.
CorrelationMatrix correlation_matrix(const std::vector<FactorVector>& records);

std::string correlation_csv(const CorrelationMatrix& m);

// Front/archive export: all records with their dominance rank (front = 0),
// sorted by cost ascending; byte-stable for identical archives.
std::string export_front_csv(const ParetoArchive& archive);
json export_front_json(const ParetoArchive& archive);

}  // namespace smnas
