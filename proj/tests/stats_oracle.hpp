#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace cine::support {

struct WelchCase {
  std::vector<double> a;
  std::vector<double> b;
  double t;
  double df;
  double p;
};

// Reference values from exact rational arithmetic for the moments and a
// 50-digit incomplete beta for p.
inline const std::vector<WelchCase> kWelchOracle = {
    {{1.0, 2.0, 3.0, 4.0}, {5.0, 6.0, 7.0, 9.0}, -3.9703446152237671517, 5.5846153846153846154, 0.0085128631313781783768},
    {{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 0.0, 4.0, 1.0},
    {{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}, {1.0, 3.0, 3.0, 5.0, 6.0}, 1.2133025196923665392, 9.2788680466112816882, 0.25499559409177539789},
    {{1.0, 1.0, 2.0, 2.0, 3.0}, {4.0, 4.0, 5.0, 5.0, 5.0}, -6.2609903369994111499, 6.8965517241379310345, 0.0004455492819669373567},
    {{3.0, 3.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0, 5.0, 5.0}, -0.11704114719613056394, 6.2975655873316000945, 0.91047147201263958324},
    {{1.5, 2.5, 3.5}, {2.0, 2.0, 2.5, 4.0}, -0.16744367165578427275, 4.2971349931189791067, 0.87460900281842327882},
    {{10.0, 12.0, 9.0, 11.0, 13.0, 8.0}, {14.0, 15.0, 13.0, 16.0, 12.0}, -3.3626912299068298031, 8.9893617021276595745, 0.008367380152792107684},
    {{1.0, 5.0}, {2.0, 3.0, 4.0}, 0.0, 1.1695501730103806228, 1.0},
    {{0.1, 0.2, 0.3, 0.4, 0.5}, {0.15, 0.25, 0.35}, 0.54772255750516611346, 5.8823529411764705882, 0.60402669138608232768},
    {{100.0, 101.0, 99.0, 98.0, 102.0}, {90.0, 95.0, 100.0, 105.0, 110.0, 115.0}, -0.64371161313431180053, 5.3408868601238995761, 0.54638614602963240199},
    {{1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0}, {2.0, 3.0, 3.0, 4.0, 4.0, 4.0, 5.0, 5.0, 5.0, 5.0}, -2.1213203435596425732, 18.0, 0.048037527740947132665},
    {{5.0, 5.0, 5.0, 5.0, 4.0}, {1.0, 1.0, 1.0, 2.0}, 11.088337094091030652, 6.1725826193390452876, 0.000026401098134542433651},
    {{-3.0, -1.0, 0.0, 2.0, 7.0}, {1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0}, -1.5563004023370881937, 9.5271826810170041899, 0.15219881506305825613},
    {{2.25, 3.75, 1.5, 4.0}, {2.5, 2.75, 3.0, 3.25, 3.5}, -0.2, 3.5244360902255639098, 0.85247932178830745825},
    {{1.0, 3.0}, {2.0, 4.0}, -0.7071067811865475244, 2.0, 0.55278640450004206072},
    {{7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0}, {7.5, 8.5}, 2.0889318714683740581, 6.1525423728813559322, 0.080566686870076617008},
    {{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0}, {3.0, 3.0, 3.0, 3.0, 4.0}, 2.3515137092389395547, 9.7607736770727725184, 0.041120041789758276098},
    {{4.0, 4.0, 4.0, 3.0, 3.0, 2.0, 5.0, 5.0, 1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 1.0, 2.0, 1.0, 3.0, 2.0, 1.0}, 3.8640676199987680628, 17.908381105174482958, 0.0011460768132107644267},
    {{0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, -0.7071067811865475244, 4.0, 0.51851851851851851852},
    {{12.5, 13.25, 11.75, 12.0, 14.5, 13.0}, {10.0, 10.5, 11.0, 15.0}, 0.99574667259402865563, 3.770358449923027261, 0.37890846909357898068},
};

/// U by counting pairs, p from the tie-corrected normal approximation.
inline std::pair<double, double> mann_whitney_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  std::map<double, int> counts;
  for (double x : a) ++counts[x];
  for (double y : b) ++counts[y];
  double ties = 0;
  for (const auto& [v, c] : counts) ties += static_cast<double>(c) * c * c - c;
  const double na = a.size(), nb = b.size(), n = na + nb;
  const double var = na * nb / 12.0 * ((n + 1) - ties / (n * (n - 1)));
  if (var <= 0) return {u, 1.0};
  const double z = std::max(0.0, std::fabs(u - na * nb / 2.0) - 0.5) / std::sqrt(var);
  return {u, std::min(1.0, std::erfc(z / std::sqrt(2.0)))};
}

}  // namespace cine::support
