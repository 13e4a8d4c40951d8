#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sgfbsde/benchmarks.hpp"

using namespace sgfbsde;

namespace {

std::vector<std::string> all_ids() {
  std::vector<std::string> ids{"example1"};
  for (int q = 2; q <= 6; ++q) ids.push_back("example2:q=" + std::to_string(q));
  for (int q = 2; q <= 5; ++q) ids.push_back("example3:q=" + std::to_string(q));
  return ids;
}

double y_at(const FbsdeProblem& p, double t, std::vector<double> x) {
  std::vector<double> out(1);
  p.exact_y(t, x, out);
  return out[0];
}

}  // namespace

TEST(Benchmarks, ClosedFormValues) {
  const double a = std::numbers::pi / 8.0;
  EXPECT_NEAR(y_at(example1(), 0.0, {a, a}), 1.0, 1e-15);
  EXPECT_NEAR(y_at(example2(3), 0.0, {1.0, 1.0, 1.0}), 1.0, 1e-15);
  EXPECT_NEAR(y_at(example3(2), 1.0, {1.0, 1.0}), 2.0, 1e-15);
}

TEST(Benchmarks, MetadataIsConsistent) {
  for (const auto& id : all_ids()) {
    const auto p = problem_by_id(id);
    EXPECT_NO_THROW(p.validate()) << id;
    EXPECT_TRUE(p.has_exact()) << id;
    EXPECT_EQ(p.q, p.d) << id;
  }
  EXPECT_FALSE(example2(4).coupled);
  EXPECT_TRUE(example3(3).coupled);
  EXPECT_TRUE(example1().domain.periodic);
  EXPECT_EQ(example1().domain.strategy, DomainStrategy::fixed);
  EXPECT_EQ(example3(2).domain.strategy, DomainStrategy::propagated);
  EXPECT_NEAR(example1(1.0, 4).domain.initial.upper[0], std::numbers::pi, 1e-15);
}

TEST(Benchmarks, FeynmanKacResidualVanishes) {
  for (const auto& id : all_ids()) {
    const auto p = problem_by_id(id);
    EXPECT_LE(feynman_kac_residual(p), 1e-6) << id;
  }
}

TEST(Benchmarks, FullSecondOrderWeightDoesNotFit) {
  ResidualOptions opt;
  opt.second_order_factor = 1.0;
  opt.samples = 200;
  EXPECT_GT(feynman_kac_residual(example1(), opt), 1e-2);
}

TEST(Benchmarks, TerminalAndZIdentity) {
  for (const auto& id : all_ids()) {
    const auto p = problem_by_id(id);
    EXPECT_LE(terminal_consistency_error(p), 1e-12) << id;
    EXPECT_LE(z_identity_error(p), 1e-6) << id;
  }
}

TEST(Benchmarks, HorizonEntersTerminalData) {
  const auto p = example2(3, 0.5);
  EXPECT_LE(terminal_consistency_error(p), 1e-12);
  EXPECT_LE(feynman_kac_residual(p), 1e-6);
}

TEST(Benchmarks, DeclaredBoundsHoldOnSamples) {
  for (const auto& id : all_ids()) {
    const auto p = problem_by_id(id);
    if (p.domain.strategy != DomainStrategy::propagated) continue;
    const auto b = sample_coefficient_bounds(p);
    EXPECT_LE(b.drift, p.domain.drift_bound) << id;
    EXPECT_LE(b.diffusion, p.domain.diffusion_bound) << id;
  }
}

TEST(Benchmarks, UnknownIdsAreRejected) {
  for (const char* id : {"", "example4", "example2", "example2:q=", "example2:q=x", "example3:q=9", "example2:q=1",
                         "example1:q=2", "example2:p=3"})
    EXPECT_THROW(problem_by_id(id), InvalidParameter) << id;
}
