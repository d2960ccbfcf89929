#pragma once

namespace strictbounds {

// Standard normal CDF through std::erfc, so the lower tail keeps full relative accuracy.
double normal_cdf(double x);
double normal_quantile(double p);

// z_{1-alpha/2}
double z_two_sided(double alpha);

// Upper-tail chi-square quantile chi2_{dof, prob}.
double chi2_quantile(double dof, double prob);

} // namespace strictbounds
