#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "moyal_lab/moyal_lab.hpp"

using namespace moyal;

namespace {

const double kS = std::sqrt(0.5);

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Kolmogorov-Smirnov statistic of `v` against N(0, sigma^2).
double ks_statistic(std::vector<double> v, double sigma) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i] / sigma);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

PhaseSpaceGrid smear_grid() { return make_grid(64, 64, {-8.0, 8.0}, {-8.0, 8.0}); }

}  // namespace

TEST(MakeDistribution, DispersionConstraint) {
  const auto d = make_distribution(kS, 1.0);
  EXPECT_NEAR(d.sigma_eta, kS, 1e-15);
  EXPECT_NEAR(d.variance_product(), 0.25, 1e-12);
  const auto d2 = make_distribution(1.0, 2.0);
  EXPECT_DOUBLE_EQ(d2.sigma_eta, 1.0);
  for (double s : {0.01, 0.3, 2.0, 17.0}) {
    for (double h : {0.1, 1.0, 3.0}) {
      EXPECT_NEAR(make_distribution(s, h).variance_product(), h * h / 4.0, 1e-12 * h * h);
    }
  }
}

TEST(MakeDistribution, RejectsNonPositive) {
  try {
    make_distribution(0.0, 1.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "smearing.sigma_xi must be positive");
  }
  EXPECT_THROW(make_distribution(-1.0, 1.0), ConfigError);
  EXPECT_THROW(make_distribution(1.0, 0.0), ConfigError);
}

TEST(Sample, MomentsOfAMillion) {
  const auto dist = make_distribution(kS, 1.0);
  const std::size_t n = 1'000'000;
  const auto ens = sample(dist, n, 42);
  const auto st = statistics(ens);
  const double bound = 3.0 * kS / std::sqrt(static_cast<double>(n));
  EXPECT_LE(std::abs(st.mean_xi), bound);
  EXPECT_LE(std::abs(st.mean_eta), bound);
  EXPECT_GE(st.variance_product(), 0.2475);
  EXPECT_LE(st.variance_product(), 0.2525);
}

TEST(Sample, MarginalsPassKolmogorovSmirnov) {
  const auto dist = make_distribution(0.8, 1.0);
  const std::size_t n = 200'000;
  const auto ens = sample(dist, n, 7);
  std::vector<double> xi, eta;
  for (const auto& s : ens.samples) {
    xi.push_back(s.xi);
    eta.push_back(s.eta);
  }
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));  // 1% level
  EXPECT_LT(ks_statistic(xi, dist.sigma_xi), critical);
  EXPECT_LT(ks_statistic(eta, dist.sigma_eta), critical);
}

TEST(Sample, SeedDeterminism) {
  const auto dist = make_distribution(1.3, 0.5);
  const auto a = sample(dist, 5000, 99);
  const auto b = sample(dist, 5000, 99);
  EXPECT_EQ(a.samples, b.samples);
  const auto c = sample(dist, 5000, 100);
  EXPECT_NE(a.samples, c.samples);
  // prefix property: sample i does not depend on n
  const auto d = sample(dist, 10, 99);
  EXPECT_TRUE(std::equal(d.samples.begin(), d.samples.end(), a.samples.begin()));
  EXPECT_EQ(sample(dist, 1, 3).samples, sample(dist, 1, 3).samples);
  EXPECT_THROW(sample(dist, 0, 1), ConfigError);
}

TEST(Sample, IndependentOfThreadCap) {
  const auto dist = make_distribution(kS, 1.0);
  parallel::set_thread_cap(1);
  const auto one = sample(dist, 100'000, 5);
  parallel::set_thread_cap(4);
  const auto four = sample(dist, 100'000, 5);
  parallel::set_thread_cap(0);
  EXPECT_EQ(one.samples, four.samples);
  const auto g = smear_grid();
  EXPECT_EQ(smeared_density(0, 0, one, g).values, smeared_density(0, 0, four, g).values);
}

TEST(SmearedDensity, MatchesGaussianForMillionSamples) {
  const auto g = smear_grid();
  const auto ens = sample(make_distribution(kS, 1.0), 1'000'000, 42);
  const auto d = smeared_density(0.5, -0.5, ens, g);
  EXPECT_LE(l1_distance(d, gaussian_wigner(g, 0.5, -0.5, kS, kS)), 0.02);
  EXPECT_NEAR(norm(d), 1.0, 1e-12);
}

TEST(SmearedDensity, SmallEnsembleStillNormalized) {
  const auto g = smear_grid();
  const auto ens = sample(make_distribution(kS, 1.0), 100, 1);
  const auto d = smeared_density(0.0, 0.0, ens, g);
  EXPECT_NEAR(norm(d), 1.0, 1e-12);
  EXPECT_GT(l1_distance(d, gaussian_wigner(g, 0, 0, kS, kS)), 0.1);
}

TEST(SmearedDensity, ConvergesWithSampleSize) {
  const auto g = smear_grid();
  const auto ref = gaussian_wigner(g, 0, 0, kS, kS);
  std::vector<double> l1;
  for (std::size_t n : {1000u, 10'000u, 100'000u, 1'000'000u}) {
    l1.push_back(l1_distance(smeared_density(0, 0, sample(make_distribution(kS, 1.0), n, 11), g), ref));
  }
  int inversions = 0;
  for (std::size_t k = 1; k < l1.size(); ++k)
    if (l1[k] > l1[k - 1]) ++inversions;
  EXPECT_LE(inversions, 1);
  EXPECT_LT(l1.back(), l1.front());
}

TEST(SmearedDensity, MirroredEnsembleIsSymmetric) {
  const auto g = smear_grid();
  const auto ens = with_mirror(sample(make_distribution(0.9, 1.0), 20'000, 3));
  const auto d = smeared_density(0.0, 0.0, ens, g);
  // cell centers sit on the grid samples, so the joint flip maps (i, j) to (n - i, n - j)
  double worst = 0.0;
  for (std::size_t i = 1; i < g.nx; ++i)
    for (std::size_t j = 1; j < g.np; ++j) worst = std::max(worst, std::abs(d.values(i, j) - d.values(g.nx - i, g.np - j)));
  EXPECT_EQ(worst, 0.0);
}

TEST(SmearedDensity, CoverageError) {
  const auto g = make_grid(16, 16, {-1.0, 1.0}, {-1.0, 1.0});
  const auto ens = sample(make_distribution(kS, 1.0), 1000, 2);
  EXPECT_THROW(smeared_density(0, 0, ens, g), CoverageError);
}

TEST(OperatorRelations, GaussianStateSatisfiesBoth) {
  const auto g = make_grid(128, 128, {-8.0, 8.0}, {-8.0, 8.0});
  const auto dist = make_distribution(kS, 1.0);
  const auto w = gaussian_wigner(g, 0.0, 0.0, dist.sigma_xi, dist.sigma_eta);
  const auto r = check_operator_relations(w, dist);
  EXPECT_TRUE(r.exactly_testable);
  EXPECT_LE(r.p_relation_deviation, 1e-8);
  EXPECT_LE(r.x_relation_deviation, 1e-8);
  EXPECT_TRUE(r.passed());
}

TEST(OperatorRelations, AnisotropicGaussian) {
  const auto g = make_grid(128, 128, {-10.0, 10.0}, {-8.0, 8.0});
  const auto dist = make_distribution(1.5, 1.0);
  const auto w = gaussian_wigner(g, 0.0, 0.0, dist.sigma_xi, dist.sigma_eta);
  EXPECT_TRUE(check_operator_relations(w, dist).passed());
}

TEST(OperatorRelations, DoublePeakFlagged) {
  const auto g = make_grid(128, 128, {-8.0, 8.0}, {-8.0, 8.0});
  auto a = gaussian_wigner(g, -2.5, 0.0, kS, kS);
  a.values += gaussian_wigner(g, 2.5, 0.0, kS, kS).values;
  const auto r = check_operator_relations(normalized(a), make_distribution(kS, 1.0));
  EXPECT_FALSE(r.exactly_testable);
  EXPECT_FALSE(r.passed());
  EXPECT_GT(r.x_relation_deviation, 0.1);
}

TEST(EnsembleIo, CsvAndMetadata) {
  const auto ens = sample(make_distribution(kS, 1.0), 3, 8);
  std::ostringstream os;
  io::write_ensemble_csv(os, ens);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "xi,eta");
  for (const auto& s : ens.samples) {
    std::getline(in, line);
    const auto comma = line.find(',');
    EXPECT_EQ(std::stod(line.substr(0, comma)), s.xi);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), s.eta);
  }
  const auto meta = io::ensemble_metadata(ens);
  EXPECT_EQ(meta.dump(), R"({"seed":8,"n":3,"sigma_xi":0.7071067811865476,"sigma_eta":0.7071067811865475,"hbar":1.0})");
}
