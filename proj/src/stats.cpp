#include "strictbounds/stats.hpp"

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "strictbounds/error.hpp"

namespace strictbounds {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidInput, "normal quantile needs 0 < p < 1");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double z_two_sided(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must lie in (0, 1)");
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), alpha / 2.0));
}

double chi2_quantile(double dof, double prob) {
    if (!(dof > 0.0) || !(prob > 0.0 && prob < 1.0))
        throw Error(ErrorKind::InvalidInput, "chi-square quantile needs dof > 0 and 0 < prob < 1");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), prob);
}

} // namespace strictbounds
