#pragma once

// Analytic ground-truth generator: quasi-steady Poiseuille wall shear stress
// on a generated vessel.  At each waveform sample the magnitude at a wall
// vertex is 4·μ·Q_local(t) / (π·r_local³) in dyn/cm² (converted to Pa), where
// r_local is the vessel radius at the nearest centerline station and Q_local
// is the inflow after splitting it across outlets in proportion to their
// areas.  The direction is the local centerline tangent projected onto the
// surface tangent plane, so the field is tangential by construction.  Cap
// vertices carry zero stress.
//
// This stands in for a full unsteady CFD solve: it is analytic, deterministic,
// and keeps the couplings that matter for learning (radius to magnitude,
// inflow to magnitude, topology to flow split), but it contains no secondary
// or oscillatory flow.  The optional direction jitter below is a clearly
// non-physical switch that only exists so oscillation-derived quantities have
// nonzero values to exercise.

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vwss/descriptors/waveform.hpp"
#include "vwss/hemo/field.hpp"
#include "vwss/lab/vessel.hpp"
#include "vwss/mesh/queries.hpp"

namespace vwss::lab {

struct OracleConfig {
  double viscosity_poise = 0.04; // dynamic viscosity, g/(cm·s)
  double density_g_cm3 = 1.06;   // unused by the quasi-steady formula; kept so
                                 // every physical constant lives in one place
  double min_radius_mm = 0.5;    // reject degenerate radii
  int t_samples = 21;            // equitemporal waveform samples
  double direction_jitter_rad = 0.0; // non-physical oscillation switch
};

/// Evaluate the oracle on every vertex of a generated mesh.
inline hemo::TransientWssField oracle_wss(const mesh::SurfaceMesh& m, const VesselSpec& spec,
                                          const desc::InflowWaveform& waveform,
                                          const OracleConfig& cfg = {}) {
  const VesselModel model = sample_vessel(spec);
  const Eigen::VectorXd q_t = desc::sample_equitemporal(waveform, cfg.t_samples);

  // flow fraction carried by each conduit: branches take their outlet-area
  // share at the take-off, the trunk keeps the remainder from there on
  const double area_total =
      std::accumulate(model.outlet_area_mm2.begin(), model.outlet_area_mm2.end(), 0.0);
  std::vector<double> branch_fraction(spec.branches.size(), 0.0);
  for (size_t b = 0; b < spec.branches.size(); ++b)
    branch_fraction[b] = model.outlet_area_mm2[b + 1] / area_total;

  const int s_tr = static_cast<int>(model.oracle_trunk.size()) - 1;
  std::vector<double> trunk_fraction(model.oracle_trunk.size(), 1.0);
  for (size_t i = 0; i < model.oracle_trunk.size(); ++i) {
    const double s = static_cast<double>(i) / s_tr;
    for (size_t b = 0; b < spec.branches.size(); ++b)
      if (spec.branches[b].attach_s < s) trunk_fraction[i] -= branch_fraction[b];
  }

  // flatten all stations into one lookup table
  struct Entry {
    Eigen::Vector3d point, tangent;
    double radius_mm, fraction;
  };
  std::vector<Entry> stations;
  for (size_t i = 0; i < model.oracle_trunk.size(); ++i)
    stations.push_back({model.oracle_trunk[i].point, model.oracle_trunk[i].tangent,
                        model.oracle_trunk[i].radius_mm, trunk_fraction[i]});
  for (size_t b = 0; b < model.oracle_branches.size(); ++b)
    for (const auto& lv : model.oracle_branches[b])
      stations.push_back({lv.point, lv.tangent, lv.radius_mm, branch_fraction[b]});
  for (const auto& st : stations)
    if (st.radius_mm < cfg.min_radius_mm)
      throw std::invalid_argument("oracle: local radius below threshold");

  const Eigen::MatrixXd normals = mesh::vertex_normals(m);
  const std::vector<bool> on_cap = m.cap_flags();
  hemo::TransientWssField field(m.n_vertices(), cfg.t_samples);

  for (int v = 0; v < m.n_vertices(); ++v) {
    if (on_cap[static_cast<size_t>(v)]) continue; // caps carry zero stress
    const Eigen::Vector3d p = m.vertices.row(v).transpose();
    const Entry* best = &stations.front();
    double best_d = (p - best->point).norm();
    for (const auto& st : stations) {
      const double d = (p - st.point).norm();
      if (d < best_d) {
        best_d = d;
        best = &st;
      }
    }

    const Eigen::Vector3d n = normals.row(v).transpose();
    Eigen::Vector3d dir = best->tangent - best->tangent.dot(n) * n;
    if (dir.norm() < 1e-9) continue; // degenerate projection, leave zero
    dir.normalize();
    const double r_cm = best->radius_mm / 10.0;
    for (int t = 0; t < cfg.t_samples; ++t) {
      const double q_local = q_t[t] * best->fraction;
      const double tau_dyn_cm2 =
          4.0 * cfg.viscosity_poise * q_local / (M_PI * r_cm * r_cm * r_cm);
      Eigen::Vector3d d_t = dir;
      if (cfg.direction_jitter_rad != 0.0) {
        // rotate the direction about the normal by a time-varying angle
        const double a = cfg.direction_jitter_rad *
                         std::sin(2.0 * M_PI * t / std::max(1, cfg.t_samples - 1));
        d_t = std::cos(a) * dir + std::sin(a) * n.cross(dir);
      }
      field.set(v, t, 0.1 * tau_dyn_cm2 * d_t); // dyn/cm² -> Pa
    }
  }
  return field;
}

} // namespace vwss::lab
