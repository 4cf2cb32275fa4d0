#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "synth.hpp"
#include "vqa/metrics.hpp"

using namespace vqa;

TEST_CASE("srocc: perfect, reversed, hand-computed Spearman") {
  ScorePairs same{{1, 2, 3, 4}, {10, 20, 30, 40}};
  CHECK(srocc(same) == doctest::Approx(1.0).epsilon(1e-12));

  ScorePairs rev{{1, 2, 3, 4}, {40, 30, 20, 10}};
  CHECK(srocc(rev) == doctest::Approx(-1.0).epsilon(1e-12));

  // rho = 1 - 6*2/(5*24) = 0.9
  ScorePairs hand{{1, 2, 3, 5, 4}, {1, 2, 3, 4, 5}};
  CHECK(srocc(hand) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("srocc: ties get average ranks; constant lists are errors") {
  // Ties on both sides, checked against the tie-corrected Pearson-of-ranks.
  ScorePairs tied{{1, 1, 2, 3}, {5, 6, 7, 8}};
  // ranks of predicted: 1.5, 1.5, 3, 4 ; subjective: 1,2,3,4
  // Pearson of those by hand:
  //   mp = 2.5, ms = 2.5; cov = (−1)(−1.5)+(−1)(−0.5)+0.5·0.5+1.5·1.5 = 4.5
  //   vp = 1+1+0.25+2.25 = 4.5 ; vs = 2.25+0.25+0.25+2.25 = 5
  const double want = 4.5 / std::sqrt(4.5 * 5.0);
  CHECK(srocc(tied) == doctest::Approx(want).epsilon(1e-12));

  ScorePairs constant{{2, 2, 2}, {1, 2, 3}};
  CHECK_THROWS_AS(srocc(constant), std::invalid_argument);
  ScorePairs tiny{{1, 2}, {1, 2}};
  CHECK_THROWS_AS(srocc(tiny), std::invalid_argument);
  ScorePairs bad{{1, 2, 3}, {1, 2, std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(srocc(bad), std::invalid_argument);
}

TEST_CASE("srocc is bitwise invariant under strictly increasing transforms") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    ScorePairs pairs;
    for (int i = 0; i < 17; ++i) {
      pairs.predicted.push_back(rng.uniform(-2.0, 2.0));
      pairs.subjective.push_back(rng.uniform(0.0, 100.0));
    }
    const double base = srocc(pairs);
    ScorePairs mapped = pairs;
    for (auto& x : mapped.predicted) x = std::exp(0.7 * x) + x * x * x;
    CHECK(srocc(mapped) == base);  // identical ranks, identical bits
  }
}

TEST_CASE("plcc_after_logistic: synthetic recovery, identity, sign flip") {
  SUBCASE("recovers a synthetic logistic curve") {
    Rng rng(6);
    LogisticParams truth;
    truth.b1 = 9.0;
    truth.b2 = 1.5;
    truth.b3 = 0.2;
    truth.b4 = 0.6;
    ScorePairs pairs;
    for (int i = 0; i < 40; ++i) {
      const double x = -2.0 + 4.0 * i / 39.0;
      pairs.predicted.push_back(x);
      pairs.subjective.push_back(truth.eval(x));
    }
    auto res = plcc_after_logistic(pairs);
    CHECK(res.plcc >= 0.999);
    CHECK_FALSE(res.params.fallback_affine);
    // Curve recovery: RMSE of the fit against the generator, over the
    // observed range, at most 1% of the score range.
    double rmse = 0.0;
    for (std::size_t i = 0; i < pairs.predicted.size(); ++i) {
      const double d = res.params.eval(pairs.predicted[i]) - pairs.subjective[i];
      rmse += d * d;
    }
    rmse = std::sqrt(rmse / static_cast<double>(pairs.predicted.size()));
    CHECK(rmse <= 0.01 * (truth.b1 - truth.b2));
  }

  SUBCASE("identity data fits to PLCC >= 0.999") {
    ScorePairs pairs;
    for (int i = 0; i < 25; ++i) {
      const double x = i / 24.0;
      pairs.predicted.push_back(x);
      pairs.subjective.push_back(x);
    }
    auto res = plcc_after_logistic(pairs);
    CHECK(res.plcc >= 0.999);
  }

  SUBCASE("negated data fits a decreasing curve with |PLCC| >= 0.999") {
    ScorePairs pairs;
    for (int i = 0; i < 25; ++i) {
      const double x = i / 24.0;
      pairs.predicted.push_back(x);
      pairs.subjective.push_back(-x);
    }
    auto res = plcc_after_logistic(pairs);
    CHECK(std::fabs(res.plcc) >= 0.999);
  }

  SUBCASE("needs at least five pairs") {
    ScorePairs four{{1, 2, 3, 4}, {1, 2, 3, 4}};
    CHECK_THROWS_AS(plcc_after_logistic(four), std::invalid_argument);
  }
}

TEST_CASE("plcc_after_logistic is invariant under positive affine input maps") {
  Rng rng(7);
  ScorePairs pairs;
  for (int i = 0; i < 30; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    pairs.predicted.push_back(x);
    pairs.subjective.push_back(std::tanh(2.0 * x) + 0.05 * rng.gaussian());
  }
  const double base = plcc_after_logistic(pairs).plcc;
  ScorePairs mapped = pairs;
  for (auto& x : mapped.predicted) x = 3.5 * x + 11.0;
  const double transformed = plcc_after_logistic(mapped).plcc;
  CHECK(std::fabs(base - transformed) <= 1e-6);
}

TEST_CASE("psnr_video: identical, constant offset, brute-force oracle") {
  auto ref = synth::make_reference(24, 16, 5, 9);

  SUBCASE("identical videos report +infinity") {
    CHECK(std::isinf(psnr_video(ref, ref)));
    CHECK(psnr_video(ref, ref) > 0);
  }

  SUBCASE("constant offset of 2 gives 10*log10(255^2/4)") {
    RawVideo dist = ref;
    for (auto& px : dist.luma) {
      px = static_cast<std::uint8_t>(px >= 2 ? px - 2 : px + 2);
    }
    const double want = 10.0 * std::log10(255.0 * 255.0 / 4.0);
    CHECK(psnr_video(ref, dist) == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("random noise matches the naive per-pixel oracle within 1e-9") {
    auto dist = synth::add_noise(ref, 15.0, 10);
    const double got = psnr_video(ref, dist);
    // Direct 64-bit recomputation of the definition.
    const std::int64_t fp = ref.width * ref.height;
    double mse_sum = 0.0;
    for (std::int64_t f = 0; f < ref.frames; ++f) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < fp; ++i) {
        const double d = static_cast<double>(ref.luma[f * fp + i]) -
                         static_cast<double>(dist.luma[f * fp + i]);
        acc += d * d;
      }
      mse_sum += acc / static_cast<double>(fp);
    }
    const double want = 10.0 * std::log10(255.0 * 255.0 / (mse_sum / ref.frames));
    CHECK(std::fabs(got - want) <= 1e-9);
  }

  SUBCASE("shape mismatch is an error") {
    RawVideo other;
    other.width = ref.width;
    other.height = ref.height;
    other.frames = ref.frames + 1;
    other.luma.resize(ref.luma.size() + static_cast<std::size_t>(ref.width * ref.height));
    CHECK_THROWS_AS(psnr_video(ref, other), std::invalid_argument);
  }
}

TEST_CASE("median and run aggregation") {
  CHECK(median({0.8}) == 0.8);
  CHECK(median({0.1, 0.9, 0.5}) == 0.5);
  CHECK(median({0.2, 0.4, 0.6, 0.8}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(median({}), std::invalid_argument);

  std::vector<RunMetrics> runs(3);
  runs[0].plcc = 0.7;
  runs[0].srocc = 0.6;
  runs[1].plcc = 0.9;
  runs[1].srocc = 0.8;
  runs[2].plcc = 0.8;
  runs[2].srocc = 0.99;
  auto report = aggregate_runs(runs);
  CHECK(report.median_plcc == 0.8);
  CHECK(report.median_srocc == 0.8);
  CHECK(report.runs.size() == 3);
}

TEST_CASE("report files: CSV rows = runs + median, JSON mirrors fields") {
  auto dir = std::filesystem::temp_directory_path() / "vqa_report";
  std::filesystem::create_directories(dir);

  std::vector<RunMetrics> runs(4);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].seed = 100 + i;
    runs[i].plcc = 0.5 + 0.1 * static_cast<double>(i);
    runs[i].srocc = 0.4 + 0.1 * static_cast<double>(i);
  }
  auto report = aggregate_runs(runs);
  save_report_csv(dir / "r.csv", report);
  save_report_json(dir / "r.json", report);

  std::ifstream is(dir / "r.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "run,seed,plcc,srocc,beta1,beta2,beta3,beta4,affine_fallback");
  int data_rows = 0;
  std::string last;
  while (std::getline(is, line)) {
    if (!line.empty()) {
      ++data_rows;
      last = line;
    }
  }
  CHECK(data_rows == 5);  // 4 runs + median
  CHECK(last.rfind("median", 0) == 0);

  std::ifstream js(dir / "r.json");
  std::string all((std::istreambuf_iterator<char>(js)), {});
  CHECK(all.find("\"median_plcc\"") != std::string::npos);
  CHECK(all.find("\"runs\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}
