#include "camix/preclassify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "camix/errors.hpp"

namespace camix {

DifferenceImage log_ratio(const ImagePair& pair) {
  if (pair.t1.size() != pair.t2.size() ||
      pair.t1.size() != pair.height * pair.width)
    throw DataError("log_ratio: image extents disagree");
  DifferenceImage di;
  di.height = pair.height;
  di.width = pair.width;
  di.values.resize(pair.t1.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < di.values.size(); ++i) {
    if (pair.t1[i] < 0.0 || pair.t2[i] < 0.0)
      throw DataError("log_ratio: negative intensity at pixel " +
                      std::to_string(i));
    const double v = std::abs(std::log((pair.t2[i] + 1.0) / (pair.t1[i] + 1.0)));
    di.values[i] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  di.raw_min = lo;
  di.raw_max = hi;
  const double range = hi - lo;
  if (range <= 0.0) {
    std::fill(di.values.begin(), di.values.end(), 0.0);
  } else {
    for (double& v : di.values) v = (v - lo) / range;
  }
  return di;
}

FcmResult fcm(const std::vector<double>& values, std::size_t c, double m,
              double tol, std::size_t max_iter) {
  const std::size_t n = values.size();
  if (c < 2) throw DataError("fcm: need at least 2 clusters");
  if (n < c) throw DataError("fcm: fewer points than clusters");

  FcmResult r;
  const double vmin = *std::min_element(values.begin(), values.end());
  const double vmax = *std::max_element(values.begin(), values.end());
  if (vmax - vmin <= 0.0) {
    // All points identical: memberships collapse, flag and bail out.
    r.degenerate = true;
    r.centroids.assign(c, vmin);
    r.memberships.assign(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i) r.memberships[i * c] = 1.0;
    return r;
  }

  // Quantile init keeps the run deterministic without an RNG.
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  r.centroids.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(c);
    r.centroids[k] = sorted[static_cast<std::size_t>(q * (n - 1))];
  }
  // Guard against duplicate initial centroids on heavily tied data.
  for (std::size_t k = 1; k < c; ++k)
    if (r.centroids[k] <= r.centroids[k - 1])
      r.centroids[k] = r.centroids[k - 1] + (vmax - vmin) * 1e-6;

  r.memberships.assign(n * c, 0.0);
  const double exponent = 2.0 / (m - 1.0);
  std::vector<double> prev_u;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // Membership update from current centroids.
    for (std::size_t i = 0; i < n; ++i) {
      double* u = r.memberships.data() + i * c;
      std::size_t exact = c;
      for (std::size_t k = 0; k < c; ++k)
        if (values[i] == r.centroids[k]) {
          exact = k;
          break;
        }
      if (exact < c) {
        std::fill(u, u + c, 0.0);
        u[exact] = 1.0;
        continue;
      }
      double denom = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double dist = std::abs(values[i] - r.centroids[k]);
        u[k] = 1.0 / std::pow(dist, exponent);
        denom += u[k];
      }
      for (std::size_t k = 0; k < c; ++k) u[k] /= denom;
    }

    // Objective with the fresh memberships.
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = values[i] - r.centroids[k];
        obj += std::pow(r.memberships[i * c + k], m) * d * d;
      }
    r.objective.push_back(obj);
    r.iterations = iter + 1;

    // Convergence on max membership change.
    if (!prev_u.empty()) {
      double delta = 0.0;
      for (std::size_t i = 0; i < n * c; ++i)
        delta = std::max(delta, std::abs(r.memberships[i] - prev_u[i]));
      if (delta < tol) break;
    }
    prev_u = r.memberships;
    // Keep the returned memberships consistent with the returned centroids.
    if (iter + 1 == max_iter) break;

    // Centroid update.
    for (std::size_t k = 0; k < c; ++k) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double um = std::pow(r.memberships[i * c + k], m);
        num += um * values[i];
        den += um;
      }
      if (den > 0.0) r.centroids[k] = num / den;
    }
  }
  return r;
}

namespace {

// Ranks of clusters by centroid, ascending.
std::vector<std::size_t> centroid_order(const std::vector<double>& centroids) {
  std::vector<std::size_t> idx(centroids.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return centroids[a] < centroids[b];
  });
  return idx;
}

std::size_t argmax_row(const double* u, std::size_t c) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (u[k] > u[best]) best = k;
  return best;
}

// Clustering feature: 3x3 local mean of the difference image. A single
// L-look pixel is too speckled for a threshold in DI space to be pure;
// averaging the immediate neighbourhood separates the modes while keeping
// the stored DI itself untouched.
std::vector<double> box_mean3(const std::vector<double>& v, std::size_t h,
                              std::size_t w) {
  std::vector<double> out(v.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
          s += v[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
          ++cnt;
        }
      }
      out[y * w + x] = s / cnt;
    }
  }
  return out;
}

PreclassLabels all_unchanged(const DifferenceImage& di) {
  PreclassLabels out;
  out.height = di.height;
  out.width = di.width;
  out.degenerate = true;
  out.labels.assign(di.values.size(), PixelClass::Unchanged);
  out.memberships.assign(di.values.size() * 3, 0.0);
  for (std::size_t i = 0; i < di.values.size(); ++i)
    out.memberships[i * 3] = 1.0;
  return out;
}

}  // namespace

PreclassLabels hierarchical_fcm(const DifferenceImage& di, std::size_t c1) {
  const std::size_t n = di.values.size();
  const std::vector<double> feat = box_mean3(di.values, di.height, di.width);
  FcmResult coarse = fcm(feat, c1);
  if (coarse.degenerate) return all_unchanged(di);

  const auto order = centroid_order(coarse.centroids);
  const std::size_t top = order[c1 - 1];
  const std::size_t second = order[c1 - 2];

  // Hard assignment at the coarse stage.
  std::vector<std::size_t> assign(n);
  std::vector<std::size_t> top_pixels;
  for (std::size_t i = 0; i < n; ++i) {
    assign[i] = argmax_row(coarse.memberships.data() + i * c1, c1);
    if (assign[i] == top) top_pixels.push_back(i);
  }

  PreclassLabels out;
  out.height = di.height;
  out.width = di.width;
  out.labels.assign(n, PixelClass::Unchanged);
  out.memberships.assign(n * 3, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    if (assign[i] == second) {
      out.labels[i] = PixelClass::Intermediate;
      out.memberships[i * 3 + 2] = 1.0;
    } else if (assign[i] != top) {
      out.labels[i] = PixelClass::Unchanged;
      out.memberships[i * 3 + 0] = 1.0;
    }
  }

  if (top_pixels.size() < 3) {
    // Too few candidates to re-cluster; treat them all as changed.
    for (std::size_t i : top_pixels) {
      out.labels[i] = PixelClass::Changed;
      out.memberships[i * 3 + 1] = 1.0;
    }
    return out;
  }

  std::vector<double> top_vals(top_pixels.size());
  for (std::size_t j = 0; j < top_pixels.size(); ++j)
    top_vals[j] = feat[top_pixels[j]];
  FcmResult fine = fcm(top_vals, 3);
  if (fine.degenerate) {
    for (std::size_t i : top_pixels) {
      out.labels[i] = PixelClass::Changed;
      out.memberships[i * 3 + 1] = 1.0;
    }
    return out;
  }
  const auto ford = centroid_order(fine.centroids);
  // ford: ascending -> [bottom, middle, top]
  for (std::size_t j = 0; j < top_pixels.size(); ++j) {
    const std::size_t i = top_pixels[j];
    const double* u = fine.memberships.data() + j * 3;
    const std::size_t k = argmax_row(u, 3);
    if (k == ford[2]) {
      out.labels[i] = PixelClass::Changed;
    } else if (k == ford[0]) {
      out.labels[i] = PixelClass::Unchanged;
    } else {
      out.labels[i] = PixelClass::Intermediate;
    }
    // Map the fine memberships onto {unchanged, changed, intermediate}.
    out.memberships[i * 3 + 0] = u[ford[0]];
    out.memberships[i * 3 + 1] = u[ford[2]];
    out.memberships[i * 3 + 2] = u[ford[1]];
  }
  return out;
}

PreclassLabels fcm_preclassify(const DifferenceImage& di) {
  const std::size_t n = di.values.size();
  FcmResult r = fcm(box_mean3(di.values, di.height, di.width), 3);
  if (r.degenerate) return all_unchanged(di);
  const auto order = centroid_order(r.centroids);

  PreclassLabels out;
  out.height = di.height;
  out.width = di.width;
  out.labels.assign(n, PixelClass::Unchanged);
  out.memberships.assign(n * 3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* u = r.memberships.data() + i * 3;
    const std::size_t k = argmax_row(u, 3);
    if (k == order[2])
      out.labels[i] = PixelClass::Changed;
    else if (k == order[1])
      out.labels[i] = PixelClass::Intermediate;
    out.memberships[i * 3 + 0] = u[order[0]];
    out.memberships[i * 3 + 1] = u[order[2]];
    out.memberships[i * 3 + 2] = u[order[1]];
  }
  return out;
}

InputStack build_input_stack(const ImagePair& pair, const DifferenceImage& di) {
  const std::size_t n = pair.height * pair.width;
  if (di.values.size() != n)
    throw DataError("build_input_stack: difference image extent mismatch");
  InputStack s;
  s.height = pair.height;
  s.width = pair.width;
  s.data.resize(3 * n);
  auto normalize_into = [&](const std::vector<double>& img, double* dst) {
    const auto [lo_it, hi_it] = std::minmax_element(img.begin(), img.end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    for (std::size_t i = 0; i < n; ++i)
      dst[i] = range > 0.0 ? (img[i] - lo) / range : 0.0;
  };
  normalize_into(pair.t1, s.data.data());
  normalize_into(pair.t2, s.data.data() + n);
  std::copy(di.values.begin(), di.values.end(), s.data.data() + 2 * n);
  return s;
}

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t extent) {
  const std::ptrdiff_t e = static_cast<std::ptrdiff_t>(extent);
  if (i < 0) i = -i - 1;
  if (i >= e) i = 2 * e - i - 1;
  return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<double> extract_patch(const InputStack& stack, std::size_t cy,
                                  std::size_t cx, std::size_t r) {
  const std::size_t side = 2 * r + 1;
  const std::size_t n = stack.height * stack.width;
  std::vector<double> patch(3 * side * side);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double* src = stack.data.data() + ch * n;
    for (std::size_t dy = 0; dy < side; ++dy) {
      const std::size_t y = reflect(
          static_cast<std::ptrdiff_t>(cy + dy) - static_cast<std::ptrdiff_t>(r),
          stack.height);
      for (std::size_t dx = 0; dx < side; ++dx) {
        const std::size_t x = reflect(static_cast<std::ptrdiff_t>(cx + dx) -
                                          static_cast<std::ptrdiff_t>(r),
                                      stack.width);
        patch[(ch * side + dy) * side + dx] = src[y * stack.width + x];
      }
    }
  }
  return patch;
}

SampleSet mine_samples(const ImagePair& pair, const DifferenceImage& di,
                       const PreclassLabels& labels, std::size_t r,
                       std::size_t cap, std::uint64_t seed) {
  if (labels.labels.size() != pair.height * pair.width)
    throw DataError("mine_samples: labels not aligned with pair");
  const InputStack stack = build_input_stack(pair, di);

  std::vector<std::size_t> changed, unchanged;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] == PixelClass::Changed)
      changed.push_back(i);
    else if (labels.labels[i] == PixelClass::Unchanged)
      unchanged.push_back(i);
  }
  if (changed.empty() || unchanged.empty())
    throw DataError(
        "mine_samples: no " +
        std::string(changed.empty() ? "changed" : "unchanged") +
        " pixels were labeled; adjust the preclassification thresholds");

  const std::size_t per_class =
      std::min({cap, changed.size(), unchanged.size()});
  std::mt19937_64 rng(seed);
  auto subsample = [&](std::vector<std::size_t>& idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(per_class);
    std::sort(idx.begin(), idx.end());  // raster order output
  };
  subsample(changed);
  subsample(unchanged);

  SampleSet set;
  set.patch_radius = r;
  set.samples.reserve(2 * per_class);
  auto emit = [&](const std::vector<std::size_t>& idx, std::uint8_t label) {
    for (std::size_t i : idx) {
      Sample s;
      s.label = label;
      s.cy = i / pair.width;
      s.cx = i % pair.width;
      s.patch = extract_patch(stack, s.cy, s.cx, r);
      set.samples.push_back(std::move(s));
    }
  };
  emit(unchanged, 0);
  emit(changed, 1);
  return set;
}

}  // namespace camix
