#include "camix/metrics.hpp"

#include <cassert>
#include <cstdio>

#include "camix/errors.hpp"

namespace camix {

MetricReport evaluate(const std::vector<std::uint8_t>& pred,
                      const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw DataError("evaluate: extent mismatch, " +
                    std::to_string(pred.size()) + " vs " +
                    std::to_string(truth.size()));
  MetricReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint8_t p = pred[i], t = truth[i];
    if (p > 1 || t > 1)
      throw DataError("evaluate: maps must be binary (pixel " +
                      std::to_string(i) + ")");
    if (p && t)
      ++r.tp;
    else if (!p && !t)
      ++r.tn;
    else if (p)
      ++r.fp;
    else
      ++r.fn;
  }
  const double total = static_cast<double>(pred.size());
  r.oe = r.fp + r.fn;
  r.pcc = static_cast<double>(r.tp + r.tn) / total;
  const double pe =
      (static_cast<double>(r.tp + r.fp) * static_cast<double>(r.tp + r.fn) +
       static_cast<double>(r.tn + r.fn) * static_cast<double>(r.tn + r.fp)) /
      (total * total);
  if (pe >= 1.0) {
    // Both maps single-class: kappa is 1 on exact agreement, else 0.
    r.degenerate_kappa = true;
    r.kc = (r.oe == 0) ? 1.0 : 0.0;
  } else {
    r.kc = (r.pcc - pe) / (1.0 - pe);
  }
  assert(r.oe == r.fp + r.fn);
  return r;
}

std::string MetricReport::csv_header() { return "fp,fn,oe,pcc,kc"; }

std::string MetricReport::csv_row() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%llu,%llu,%llu,%.6f,%.6f",
                static_cast<unsigned long long>(fp),
                static_cast<unsigned long long>(fn),
                static_cast<unsigned long long>(oe), pcc, kc);
  return buf;
}

std::string MetricReport::table() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "FP      FN      OE      PCC(%%)  KC(%%)\n"
                "%-7llu %-7llu %-7llu %-7.2f %-7.2f\n",
                static_cast<unsigned long long>(fp),
                static_cast<unsigned long long>(fn),
                static_cast<unsigned long long>(oe), 100.0 * pcc, 100.0 * kc);
  return buf;
}

}  // namespace camix
