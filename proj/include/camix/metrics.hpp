#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace camix {

// Confusion-matrix report; positive = changed.
struct MetricReport {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t oe = 0;
  double pcc = 0.0;
  double kc = 0.0;
  bool degenerate_kappa = false;  // chance agreement was 1

  std::string csv_row() const;
  static std::string csv_header();
  // Human-readable block in column order FP, FN, OE, PCC%, KC%.
  std::string table() const;
};

MetricReport evaluate(const std::vector<std::uint8_t>& pred,
                      const std::vector<std::uint8_t>& truth);

}  // namespace camix
