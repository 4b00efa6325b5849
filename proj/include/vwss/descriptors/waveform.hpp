#pragma once

// Inflow waveform handling: CSV parsing, template scaling, equitemporal
// resampling, and the peak-velocity scalar derived from a parabolic inflow
// profile.
//
// Unit conventions (used consistently across the project):
//   geometry in mm, flow in ml/s (= cm^3/s), velocities in cm/s,
//   so areas convert as 1 cm^2 = 100 mm^2.

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vwss::desc {

struct InflowWaveform {
  Eigen::VectorXd time_s;    // strictly increasing sample times
  Eigen::VectorXd flow_ml_s; // volumetric flow at each sample

  int n_samples() const { return static_cast<int>(time_s.size()); }

  void validate() const {
    if (time_s.size() != flow_ml_s.size())
      throw std::invalid_argument("waveform: time/flow length mismatch");
    if (time_s.size() < 1) throw std::invalid_argument("waveform: empty");
    for (int i = 1; i < n_samples(); ++i)
      if (!(time_s[i] > time_s[i - 1]))
        throw std::invalid_argument("waveform: times not strictly increasing");
    if (!time_s.allFinite() || !flow_ml_s.allFinite())
      throw std::invalid_argument("waveform: non-finite entry");
  }
};

inline double q_max(const InflowWaveform& w) {
  w.validate();
  return w.flow_ml_s.maxCoeff();
}

/// Scale a template waveform so its peak flow equals q_max_target.
inline InflowWaveform scale_waveform(const InflowWaveform& tpl, double q_max_target) {
  const double peak = q_max(tpl);
  if (!(peak > 0.0)) throw std::invalid_argument("scale_waveform: template peak must be > 0");
  if (!(q_max_target > 0.0)) throw std::invalid_argument("scale_waveform: target peak must be > 0");
  InflowWaveform out = tpl;
  out.flow_ml_s *= q_max_target / peak;
  return out;
}

/// Linear interpolation of the flow at T equitemporal times spanning the
/// waveform's full duration (both endpoints included; T = 1 takes the start).
inline Eigen::VectorXd sample_equitemporal(const InflowWaveform& w, int t_samples) {
  w.validate();
  if (t_samples < 1) throw std::invalid_argument("sample_equitemporal: T must be >= 1");
  Eigen::VectorXd out(t_samples);
  const double t0 = w.time_s[0], t1 = w.time_s[w.n_samples() - 1];
  for (int i = 0; i < t_samples; ++i) {
    const double t = t_samples == 1 ? t0 : t0 + (t1 - t0) * i / (t_samples - 1);
    // locate the bracketing samples
    int hi = 1;
    while (hi < w.n_samples() - 1 && w.time_s[hi] < t) ++hi;
    if (w.n_samples() == 1) {
      out[i] = w.flow_ml_s[0];
      continue;
    }
    const int lo = hi - 1;
    const double span = w.time_s[hi] - w.time_s[lo];
    const double f = std::clamp((t - w.time_s[lo]) / span, 0.0, 1.0);
    out[i] = (1.0 - f) * w.flow_ml_s[lo] + f * w.flow_ml_s[hi];
  }
  return out;
}

/// Spatial inflow profile shapes; only the parabolic (Poiseuille) profile is
/// supported.
enum class InflowProfile { kParabolic };

/// Peak velocity (cm/s) of a parabolic profile delivering the waveform's peak
/// flow through an inlet of the given area (mm^2):  the unit-peak paraboloid
/// integrates to A/2, so V_max = Q_max / (A/2) = 2 Q_max / A with A in cm^2.
inline double v_max(const InflowWaveform& w, double inlet_area_mm2,
                    InflowProfile profile = InflowProfile::kParabolic) {
  if (profile != InflowProfile::kParabolic)
    throw std::invalid_argument("v_max: unsupported inflow profile");
  if (!(inlet_area_mm2 > 0.0)) throw std::invalid_argument("v_max: inlet area must be > 0");
  const double area_cm2 = inlet_area_mm2 / 100.0;
  return 2.0 * q_max(w) / area_cm2;
}

/// 2-column CSV (time_s, flow_ml_s); one optional non-numeric header line.
inline InflowWaveform load_waveform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_waveform: cannot open " + path);
  std::vector<double> ts, qs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, q;
    if (!(ss >> t >> q)) {
      if (line_no == 1) continue; // header row
      throw std::runtime_error("load_waveform: " + path + ":" + std::to_string(line_no) +
                               ": expected two numeric columns");
    }
    ts.push_back(t);
    qs.push_back(q);
  }
  InflowWaveform w;
  w.time_s = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  w.flow_ml_s = Eigen::Map<Eigen::VectorXd>(qs.data(), static_cast<Eigen::Index>(qs.size()));
  w.validate();
  return w;
}

inline void save_waveform(const std::string& path, const InflowWaveform& w) {
  w.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_waveform: cannot open " + path);
  out << "time_s,flow_ml_s\n";
  out.precision(17);
  for (int i = 0; i < w.n_samples(); ++i) out << w.time_s[i] << "," << w.flow_ml_s[i] << "\n";
}

} // namespace vwss::desc
