#include "vqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace vqa {

namespace {

void check_pairs(const ScorePairs& pairs, std::size_t min_len) {
  if (pairs.predicted.size() != pairs.subjective.size()) {
    throw std::invalid_argument("score pairs: length mismatch");
  }
  if (pairs.predicted.size() < min_len) {
    throw std::invalid_argument("score pairs: need at least " + std::to_string(min_len) +
                                " entries");
  }
  for (std::size_t i = 0; i < pairs.predicted.size(); ++i) {
    if (!std::isfinite(pairs.predicted[i]) || !std::isfinite(pairs.subjective[i])) {
      throw std::invalid_argument("score pairs: non-finite entry");
    }
  }
}

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 3) {
    throw std::invalid_argument("pearson: need two equal lists of length >= 3");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) {
    throw std::invalid_argument("pearson: zero variance makes the coefficient undefined");
  }
  return cov / std::sqrt(va * vb);
}

double srocc(const ScorePairs& pairs) {
  check_pairs(pairs, 3);
  return pearson(average_ranks(pairs.predicted), average_ranks(pairs.subjective));
}

// --- logistic fit -----------------------------------------------------------------

double LogisticParams::eval(double x) const {
  if (fallback_affine) return b1 * x + b2;
  return (b1 - b2) / (1.0 + std::exp(-(x - b3) / std::fabs(b4))) + b2;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double sse_of(const LogisticParams& p, const ScorePairs& pairs) {
  double s = 0.0;
  for (std::size_t i = 0; i < pairs.predicted.size(); ++i) {
    const double r = p.eval(pairs.predicted[i]) - pairs.subjective[i];
    s += r * r;
  }
  return s;
}

/// Damped Gauss-Newton least squares on the 4 logistic parameters.
/// Initialization follows the span/median/std heuristic, with b1/b2 swapped
/// when the raw correlation is negative so the initial curve already runs in
/// the right direction. Returns nullopt on divergence.
std::optional<LogisticParams> fit_logistic(const ScorePairs& pairs) {
  const std::size_t n = pairs.predicted.size();
  const auto [lo_it, hi_it] =
      std::minmax_element(pairs.subjective.begin(), pairs.subjective.end());
  double raw_r;
  try {
    raw_r = pearson(pairs.predicted, pairs.subjective);
  } catch (const std::invalid_argument&) {
    return std::nullopt;  // constant data; nothing sensible to fit
  }

  LogisticParams p;
  p.b1 = raw_r >= 0.0 ? *hi_it : *lo_it;
  p.b2 = raw_r >= 0.0 ? *lo_it : *hi_it;
  p.b3 = median_of(pairs.predicted);
  p.b4 = stddev_of(pairs.predicted);
  if (p.b4 == 0.0 || !std::isfinite(p.b4)) return std::nullopt;

  double sse = sse_of(p, pairs);
  double damping = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    // Normal equations J^T J delta = -J^T r with Levenberg damping.
    double jtj[4][4] = {};
    double jtr[4] = {};
    const double ab4 = std::fabs(p.b4);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pairs.predicted[i];
      const double z = -(x - p.b3) / ab4;
      const double ez = std::exp(std::clamp(z, -500.0, 500.0));
      const double denom = 1.0 + ez;
      const double s = 1.0 / denom;                       // logistic in (0,1]
      const double r = (p.b1 - p.b2) * s + p.b2 - pairs.subjective[i];
      const double ds = ez * s * s;                       // d s / d z * (-1) sign folded below
      const double j1 = s;                                // d f / d b1
      const double j2 = 1.0 - s;                          // d f / d b2
      const double j3 = -(p.b1 - p.b2) * ds / ab4;        // d f / d b3
      const double sgn = p.b4 >= 0.0 ? 1.0 : -1.0;
      const double j4 = -(p.b1 - p.b2) * ds * (x - p.b3) / (ab4 * ab4) * sgn;
      const double jrow[4] = {j1, j2, j3, j4};
      for (int a = 0; a < 4; ++a) {
        jtr[a] += jrow[a] * r;
        for (int b = 0; b < 4; ++b) jtj[a][b] += jrow[a] * jrow[b];
      }
    }
    // Solve (J^T J + damping I) delta = -J^T r by Gaussian elimination.
    double m[4][5];
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) m[a][b] = jtj[a][b] + (a == b ? damping : 0.0);
      m[a][4] = -jtr[a];
    }
    bool singular = false;
    for (int c = 0; c < 4; ++c) {
      int pivot = c;
      for (int rI = c + 1; rI < 4; ++rI) {
        if (std::fabs(m[rI][c]) > std::fabs(m[pivot][c])) pivot = rI;
      }
      if (std::fabs(m[pivot][c]) < 1e-300) {
        singular = true;
        break;
      }
      std::swap(m[c], m[pivot]);
      for (int rI = c + 1; rI < 4; ++rI) {
        const double f = m[rI][c] / m[c][c];
        for (int cc = c; cc < 5; ++cc) m[rI][cc] -= f * m[c][cc];
      }
    }
    double delta[4] = {};
    if (!singular) {
      for (int c = 3; c >= 0; --c) {
        double s = m[c][4];
        for (int cc = c + 1; cc < 4; ++cc) s -= m[c][cc] * delta[cc];
        delta[c] = s / m[c][c];
      }
    }
    if (singular || !std::isfinite(delta[0] + delta[1] + delta[2] + delta[3])) {
      damping *= 10.0;
      if (damping > 1e12) return std::nullopt;
      continue;
    }

    LogisticParams trial = p;
    trial.b1 += delta[0];
    trial.b2 += delta[1];
    trial.b3 += delta[2];
    trial.b4 += delta[3];
    if (trial.b4 == 0.0) trial.b4 = p.b4;  // keep the curve well defined
    const double trial_sse = sse_of(trial, pairs);
    if (std::isfinite(trial_sse) && trial_sse <= sse) {
      // Relative step for the convergence check.
      double step = 0.0, scale = 0.0;
      const double dp[4] = {delta[0], delta[1], delta[2], delta[3]};
      const double pv[4] = {p.b1, p.b2, p.b3, p.b4};
      for (int a = 0; a < 4; ++a) {
        step += dp[a] * dp[a];
        scale += pv[a] * pv[a];
      }
      p = trial;
      sse = trial_sse;
      damping = std::max(damping * 0.3, 1e-12);
      if (std::sqrt(step) < 1e-8 * (std::sqrt(scale) + 1e-12)) break;
    } else {
      damping *= 10.0;
      if (damping > 1e12) return std::nullopt;
    }
  }
  if (!std::isfinite(p.b1 + p.b2 + p.b3 + p.b4) || p.b4 == 0.0) return std::nullopt;
  return p;
}

}  // namespace

PlccResult plcc_after_logistic(const ScorePairs& pairs) {
  check_pairs(pairs, 5);
  PlccResult out;
  auto fitted = fit_logistic(pairs);
  if (fitted) {
    out.params = *fitted;
  } else {
    // Affine fallback: least-squares line, flagged in the report.
    const std::size_t n = pairs.predicted.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += pairs.predicted[i];
      sy += pairs.subjective[i];
      sxx += pairs.predicted[i] * pairs.predicted[i];
      sxy += pairs.predicted[i] * pairs.subjective[i];
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    out.params.fallback_affine = true;
    out.params.b1 = denom != 0.0 ? (dn * sxy - sx * sy) / denom : 0.0;
    out.params.b2 = (sy - out.params.b1 * sx) / dn;
  }
  std::vector<double> mapped(pairs.predicted.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    mapped[i] = out.params.eval(pairs.predicted[i]);
  }
  double r;
  try {
    r = pearson(mapped, pairs.subjective);
  } catch (const std::invalid_argument&) {
    // A flat fit (e.g. constant subjective data slipped through): correlate
    // the raw predictions instead of failing the whole report.
    r = pearson(pairs.predicted, pairs.subjective);
  }
  out.plcc = r;
  return out;
}

// --- PSNR ---------------------------------------------------------------------------

double psnr_video(const RawVideo& reference, const RawVideo& distorted) {
  if (reference.width != distorted.width || reference.height != distorted.height ||
      reference.frames != distorted.frames) {
    throw std::invalid_argument("psnr: videos are not congruent");
  }
  const std::int64_t frame_px = reference.width * reference.height;
  double mse_sum = 0.0;
  for (std::int64_t f = 0; f < reference.frames; ++f) {
    const std::uint8_t* rp = reference.luma.data() + f * frame_px;
    const std::uint8_t* dp = distorted.luma.data() + f * frame_px;
    double acc = 0.0;
    for (std::int64_t i = 0; i < frame_px; ++i) {
      const double diff = static_cast<double>(rp[i]) - static_cast<double>(dp[i]);
      acc += diff * diff;
    }
    mse_sum += acc / static_cast<double>(frame_px);
  }
  const double mean_mse = mse_sum / static_cast<double>(reference.frames);
  if (mean_mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mean_mse);
}

// --- aggregation ----------------------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty list");
  return median_of(std::move(values));
}

EvalReport aggregate_runs(std::vector<RunMetrics> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
  EvalReport report;
  report.runs = std::move(runs);
  std::vector<double> plccs, sroccs;
  for (const auto& r : report.runs) {
    plccs.push_back(r.plcc);
    sroccs.push_back(r.srocc);
  }
  report.median_plcc = median(std::move(plccs));
  report.median_srocc = median(std::move(sroccs));
  return report;
}

void save_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot open " + path.string());
  os << "run,seed,plcc,srocc,beta1,beta2,beta3,beta4,affine_fallback\n";
  os.precision(10);
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    os << i << "," << r.seed << "," << r.plcc << "," << r.srocc << "," << r.logistic.b1
       << "," << r.logistic.b2 << "," << r.logistic.b3 << "," << r.logistic.b4 << ","
       << (r.logistic.fallback_affine ? 1 : 0) << "\n";
  }
  os << "median,," << report.median_plcc << "," << report.median_srocc << ",,,,,\n";
  if (!os) throw std::runtime_error("report: write failed for " + path.string());
}

void save_report_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    j["runs"].push_back({{"run", i},
                         {"seed", r.seed},
                         {"plcc", r.plcc},
                         {"srocc", r.srocc},
                         {"logistic",
                          {{"beta1", r.logistic.b1},
                           {"beta2", r.logistic.b2},
                           {"beta3", r.logistic.b3},
                           {"beta4", r.logistic.b4},
                           {"affine_fallback", r.logistic.fallback_affine}}}});
  }
  j["median_plcc"] = report.median_plcc;
  j["median_srocc"] = report.median_srocc;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace vqa
