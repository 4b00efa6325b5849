#pragma once

// Three-element Windkessel (RCR) outlet boundary parameters, split across
// outlets by the parallel-circuit area rule.  Units follow the CGS pressure
// convention: pressures in dyn/cm² and flows in ml/s give resistances in
// dyn·s/cm⁵ and capacitances in cm⁵/dyn.

#include <numeric>
#include <stdexcept>
#include <vector>

namespace vwss::lab {

struct WindkesselOutlet {
  double r_proximal = 0.0;
  double r_distal = 0.0;
  double c = 0.0;
};

struct WindkesselSet {
  std::vector<WindkesselOutlet> outlets;
  double p_mean = 0.0;
  double q = 0.0;
  double c_total = 0.0;
  double p_distal = 0.0; // reference pressure, held at zero

  double r_total() const { return p_mean / q; }
};

/// Split a global RCR triple across outlets.  The total resistance P/Q is
/// divided 0.91 distal / 0.09 proximal, each outlet takes resistance scaled
/// inversely to its area fraction (so the parallel combination recovers the
/// total) and capacitance proportional to it.
inline WindkesselSet split_windkessel(double p_mean, double q, double c_total,
                                      const std::vector<double>& outlet_areas) {
  if (!(p_mean > 0.0) || !(q > 0.0) || !(c_total > 0.0))
    throw std::invalid_argument("windkessel: P, Q, C must all be > 0");
  if (outlet_areas.empty()) throw std::invalid_argument("windkessel: no outlets");
  for (const double a : outlet_areas)
    if (!(a > 0.0)) throw std::invalid_argument("windkessel: outlet areas must be > 0");

  const double r_total = p_mean / q;
  const double r_distal = 0.91 * r_total;
  const double r_proximal = 0.09 * r_total;
  const double a_total = std::accumulate(outlet_areas.begin(), outlet_areas.end(), 0.0);

  WindkesselSet set;
  set.p_mean = p_mean;
  set.q = q;
  set.c_total = c_total;
  for (const double a : outlet_areas) {
    WindkesselOutlet o;
    o.r_proximal = r_proximal * a_total / a;
    o.r_distal = r_distal * a_total / a;
    o.c = c_total * a / a_total;
    set.outlets.push_back(o);
  }
  return set;
}

} // namespace vwss::lab
