#pragma once

#include <vector>

namespace ctp {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;       // two-sided
  bool degenerate = false;  // both samples had zero variance
};

// Welch's unequal-variance two-sample t-test. Convention: if both variances
// are zero the statistic is indeterminate; equal means give p = 1, different
// means give p = 0, both flagged degenerate.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta function I_x(a, b) (continued fraction).
double incomplete_beta(double a, double b, double x);

// Two-sided p-value of a Student-t statistic with the given df.
double student_t_two_sided_p(double t, double df);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

struct Quantiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};
Quantiles quantiles(std::vector<double> v);

}  // namespace ctp
