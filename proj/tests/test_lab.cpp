#include <gtest/gtest.h>

#include <filesystem>

#include "support/test_util.hpp"
#include "vwss/heat/laplacian.hpp"
#include "vwss/lab/oracle.hpp"
#include "vwss/lab/recipe.hpp"
#include "vwss/lab/resample.hpp"
#include "vwss/lab/vessel.hpp"
#include "vwss/lab/windkessel.hpp"
#include "vwss/mesh/queries.hpp"

namespace tt = vwss::testing;
using vwss::lab::BranchSpec;
using vwss::lab::VesselSpec;

namespace {

VesselSpec straight_tube(double radius_mm = 10.0, double length_mm = 100.0,
                         double edge_mm = 3.0) {
  VesselSpec spec;
  spec.control_points.resize(2, 3);
  spec.control_points << 0.0, 0.0, 0.0, 0.0, 0.0, length_mm;
  spec.radius0_mm = spec.radius1_mm = radius_mm;
  spec.target_edge_mm = edge_mm;
  return spec;
}

vwss::desc::InflowWaveform constant_flow(double q_ml_s) {
  vwss::desc::InflowWaveform w;
  w.time_s.resize(2);
  w.time_s << 0.0, 1.0;
  w.flow_ml_s.resize(2);
  w.flow_ml_s << q_ml_s, q_ml_s;
  return w;
}

double signed_volume(const vwss::mesh::SurfaceMesh& m) {
  double v = 0.0;
  for (int f = 0; f < m.n_faces(); ++f) {
    const Eigen::Vector3d a = m.vertices.row(m.faces(f, 0)).transpose();
    const Eigen::Vector3d b = m.vertices.row(m.faces(f, 1)).transpose();
    const Eigen::Vector3d c = m.vertices.row(m.faces(f, 2)).transpose();
    v += a.dot(b.cross(c)) / 6.0;
  }
  return v;
}

double total_area(const vwss::mesh::SurfaceMesh& m) {
  double a = 0.0;
  for (int f = 0; f < m.n_faces(); ++f) {
    const Eigen::Vector3d e1 =
        (m.vertices.row(m.faces(f, 1)) - m.vertices.row(m.faces(f, 0))).transpose();
    const Eigen::Vector3d e2 =
        (m.vertices.row(m.faces(f, 2)) - m.vertices.row(m.faces(f, 0))).transpose();
    a += 0.5 * e1.cross(e2).norm();
  }
  return a;
}

/// Largest distance from any vertex of `a` to the surface of `b`.
double vertex_to_surface(const vwss::mesh::SurfaceMesh& a, const vwss::mesh::SurfaceMesh& b) {
  double worst = 0.0;
  for (int v = 0; v < a.n_vertices(); ++v) {
    const Eigen::Vector3d p = a.vertices.row(v).transpose();
    const Eigen::Vector3d q = vwss::lab::detail::project_to_surface(p, b.vertices, b.faces);
    worst = std::max(worst, (p - q).norm());
  }
  return worst;
}

} // namespace

// --- generator ---------------------------------------------------------------------

TEST(Vessel, StraightTubeIsAWatertightCylinder) {
  const auto spec = straight_tube();
  const auto m = vwss::lab::generate_vessel(spec);
  ASSERT_NO_THROW(m.validate(true));
  EXPECT_EQ(m.outlets.size(), 1u);
  EXPECT_FALSE(m.inlet.empty());

  // polygonal inlet cap close to the analytic disc
  EXPECT_NEAR(m.inlet_area, M_PI * 100.0, 0.02 * M_PI * 100.0);
  EXPECT_NEAR(m.inlet_normal.dot(Eigen::Vector3d::UnitZ()), 1.0, 1e-12);

  // outward-wound: positive enclosed volume close to the analytic cylinder
  EXPECT_GT(signed_volume(m), 0.0);
  EXPECT_NEAR(signed_volume(m), M_PI * 100.0 * 100.0, 0.03 * M_PI * 100.0 * 100.0);
}

TEST(Vessel, GenerationIsDeterministic) {
  VesselSpec spec = straight_tube();
  spec.noise_mm = 0.8;
  spec.seed = 1234;
  const auto a = vwss::lab::generate_vessel(spec);
  const auto b = vwss::lab::generate_vessel(spec);
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.faces, b.faces);
  EXPECT_EQ(a.inlet, b.inlet);

  spec.seed = 1235;
  const auto c = vwss::lab::generate_vessel(spec);
  EXPECT_NE(a.vertices, c.vertices);
}

TEST(Vessel, ZeroAmplitudeBulgeMatchesThePlainTube) {
  VesselSpec plain = straight_tube();
  plain.seed = 7;
  plain.noise_mm = 0.5;
  VesselSpec bulged = plain;
  bulged.bulge.amplitude_mm = 0.0;
  bulged.bulge.center_s = 0.5;
  const auto a = vwss::lab::generate_vessel(plain);
  const auto b = vwss::lab::generate_vessel(bulged);
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.faces, b.faces);
}

TEST(Vessel, BulgeWidensTheWall) {
  VesselSpec spec = straight_tube();
  spec.bulge.amplitude_mm = 5.0;
  spec.bulge.center_s = 0.5;
  spec.bulge.width_s = 0.1;
  const auto m = vwss::lab::generate_vessel(spec);
  ASSERT_NO_THROW(m.validate(true));
  double peak = 0.0;
  for (int v = 0; v < m.n_vertices(); ++v)
    peak = std::max(peak, m.vertices.row(v).head<2>().norm());
  EXPECT_NEAR(peak, 15.0, 0.2);
}

TEST(Vessel, BifurcationHasOneInletAndTwoOutlets) {
  VesselSpec spec = straight_tube();
  BranchSpec br;
  br.attach_s = 0.5;
  br.azimuth_rad = 0.3;
  br.takeoff_rad = 1.2;
  br.length_mm = 35.0;
  br.radius0_mm = 5.0;
  br.radius1_mm = 4.0;
  spec.branches.push_back(br);
  const auto m = vwss::lab::generate_vessel(spec);
  ASSERT_NO_THROW(m.validate(true));
  EXPECT_EQ(m.outlets.size(), 2u);
  for (const auto& o : m.outlets) EXPECT_GE(o.size(), 4u);
  EXPECT_GT(signed_volume(m), 0.0);
}

TEST(Vessel, SelfIntersectingSpecIsRejected) {
  VesselSpec spec;
  // hairpin centerline whose legs come closer than the tube diameter
  spec.control_points.resize(4, 3);
  spec.control_points << 0, 0, 0, 0, 0, 50, 12, 0, 50, 12, 0, 0;
  spec.radius0_mm = spec.radius1_mm = 10.0;
  spec.target_edge_mm = 3.0;
  EXPECT_THROW(vwss::lab::generate_vessel(spec), std::invalid_argument);
}

TEST(Vessel, OverlappingBranchesAreRejected) {
  VesselSpec spec = straight_tube();
  BranchSpec a;
  a.attach_s = 0.5;
  a.azimuth_rad = 0.0;
  BranchSpec b = a;
  b.azimuth_rad = 0.05; // nearly the same take-off
  EXPECT_THROW(vwss::lab::extend_topology(spec, {a, b}), std::invalid_argument);
}

TEST(Vessel, SpecValidationCatchesBadFields) {
  VesselSpec spec = straight_tube();
  spec.target_edge_mm = 0.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = straight_tube();
  spec.bulge.amplitude_mm = -1.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = straight_tube();
  spec.radius1_mm = -2.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = straight_tube();
  spec.branches.push_back(BranchSpec{});
  spec.branches.back().attach_s = 0.01;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

// --- oracle ------------------------------------------------------------------------

TEST(Oracle, PoiseuilleMagnitudeOnTheReferenceTube) {
  // r = 1 cm, Q = 80 ml/s: 4*0.04*80 / pi = 4.074 dyn/cm^2 = 0.4074 Pa
  const auto spec = straight_tube(10.0, 100.0, 3.0);
  const auto m = vwss::lab::generate_vessel(spec);
  const auto field = vwss::lab::oracle_wss(m, spec, constant_flow(80.0));
  EXPECT_EQ(field.timepoints, 21);
  const double expected = 0.1 * 4.0 * 0.04 * 80.0 / M_PI;

  const auto caps = m.cap_flags();
  int wall = 0;
  for (int v = 0; v < m.n_vertices(); ++v) {
    if (caps[static_cast<size_t>(v)]) {
      EXPECT_EQ(field.at(v, 0).norm(), 0.0);
      continue;
    }
    ++wall;
    for (int t : {0, 10, 20}) EXPECT_NEAR(field.at(v, t).norm(), expected, 1e-12);
    // directed along the axis, not around it
    EXPECT_NEAR(field.at(v, 0).normalized().dot(Eigen::Vector3d::UnitZ()), 1.0, 1e-9);
  }
  EXPECT_GT(wall, 100);
}

TEST(Oracle, MagnitudeIsLinearInFlow) {
  const auto spec = straight_tube(8.0, 80.0, 4.0);
  const auto m = vwss::lab::generate_vessel(spec);
  const auto f1 = vwss::lab::oracle_wss(m, spec, constant_flow(50.0));
  const auto f2 = vwss::lab::oracle_wss(m, spec, constant_flow(100.0));
  EXPECT_LT((f2.tau - 2.0 * f1.tau).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Oracle, FieldIsTangentToTheWall) {
  VesselSpec spec = straight_tube(9.0, 90.0, 4.0);
  spec.bulge.amplitude_mm = 4.0;
  spec.noise_mm = 1.0;
  spec.seed = 3;
  const auto m = vwss::lab::generate_vessel(spec);
  const auto field = vwss::lab::oracle_wss(m, spec, vwss::lab::template_waveform());
  const Eigen::MatrixXd normals = vwss::mesh::vertex_normals(m);
  for (int v = 0; v < m.n_vertices(); ++v)
    for (int t = 0; t < field.timepoints; ++t) {
      const Eigen::Vector3d tau = field.at(v, t);
      if (tau.norm() < 1e-12) continue;
      EXPECT_LT(std::abs(tau.dot(normals.row(v).transpose())), 1e-6 * tau.norm());
    }
}

TEST(Oracle, EquivariantUnderRigidMotion) {
  tt::Rng rng(21);
  VesselSpec spec = straight_tube(9.0, 90.0, 4.0);
  spec.bulge.amplitude_mm = 3.0;
  const auto m = vwss::lab::generate_vessel(spec);
  const auto base = vwss::lab::oracle_wss(m, spec, constant_flow(70.0));

  const Eigen::Matrix3d r = tt::random_rotation(rng);
  const Eigen::RowVector3d shift(4.0, -2.0, 1.0);
  VesselSpec moved = spec;
  moved.control_points = (spec.control_points * r.transpose()).rowwise() + shift;
  vwss::mesh::SurfaceMesh m2 = m;
  m2.vertices = (m.vertices * r.transpose()).rowwise() + shift;
  m2.inlet_normal = r * m.inlet_normal;
  const auto rotated = vwss::lab::oracle_wss(m2, moved, constant_flow(70.0));

  for (int v = 0; v < m.n_vertices(); ++v)
    for (int t : {0, 7, 20})
      EXPECT_LT((rotated.at(v, t) - r * base.at(v, t)).norm(), 1e-9);
}

TEST(Oracle, TinyRadiusIsRejected) {
  const auto spec = straight_tube(0.45, 20.0, 1.0);
  const auto m = vwss::lab::generate_vessel(spec);
  EXPECT_THROW(vwss::lab::oracle_wss(m, spec, constant_flow(10.0)), std::invalid_argument);
}

TEST(Oracle, DirectionJitterCreatesOscillation) {
  const auto spec = straight_tube(8.0, 60.0, 4.0);
  const auto m = vwss::lab::generate_vessel(spec);
  vwss::lab::OracleConfig cfg;
  cfg.direction_jitter_rad = 0.8;
  const auto field = vwss::lab::oracle_wss(m, spec, constant_flow(60.0), cfg);
  // directions change over time, so the mean shrinks below the mean magnitude
  const auto caps = m.cap_flags();
  for (int v = 0; v < m.n_vertices(); ++v) {
    if (caps[static_cast<size_t>(v)]) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double mag = 0.0;
    for (int t = 0; t < field.timepoints; ++t) {
      mean += field.at(v, t);
      mag += field.at(v, t).norm();
    }
    EXPECT_LT(mean.norm(), 0.98 * mag);
  }
}

// --- topology extension ------------------------------------------------------------

TEST(Topology, NoExtraBranchesIsTheIdentity) {
  const auto spec = straight_tube();
  const auto same = vwss::lab::extend_topology(spec, {});
  const auto a = vwss::lab::generate_vessel(spec);
  const auto b = vwss::lab::generate_vessel(same);
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.faces, b.faces);
}

TEST(Topology, BaseVerticesSurviveExactlyOutsideTheCollar) {
  VesselSpec base = straight_tube(10.0, 100.0, 4.0);
  base.seed = 5;
  base.noise_mm = 0.4;
  BranchSpec br;
  br.attach_s = 0.5;
  br.azimuth_rad = 1.0;
  br.length_mm = 30.0;
  br.radius0_mm = 5.0;
  br.radius1_mm = 4.0;
  const auto extended_spec = vwss::lab::extend_topology(base, {br});

  const auto a = vwss::lab::generate_vessel(base);
  const auto b = vwss::lab::generate_vessel(extended_spec);
  ASSERT_NO_THROW(b.validate(true));

  const auto model = vwss::lab::sample_vessel(extended_spec);
  const Eigen::Vector3d origin = model.branch_origin[0];
  const double collar = 4.0 * br.radius0_mm + 2.0 * base.target_edge_mm;
  int checked = 0;
  for (int v = 0; v < a.n_vertices(); ++v) {
    const Eigen::Vector3d p = a.vertices.row(v).transpose();
    if ((p - origin).norm() < collar) continue;
    double best = std::numeric_limits<double>::max();
    for (int w = 0; w < b.n_vertices(); ++w)
      best = std::min(best, (p - b.vertices.row(w).transpose()).norm());
    EXPECT_EQ(best, 0.0) << "vertex " << v;
    ++checked;
  }
  EXPECT_GT(checked, a.n_vertices() / 2);
}

TEST(Topology, AddingABranchReducesDownstreamStress) {
  VesselSpec base = straight_tube(10.0, 100.0, 4.0);
  BranchSpec br;
  br.attach_s = 0.5;
  br.azimuth_rad = 2.0;
  br.length_mm = 30.0;
  br.radius0_mm = 5.0;
  br.radius1_mm = 5.0;
  const auto ext = vwss::lab::extend_topology(base, {br});
  const auto ma = vwss::lab::generate_vessel(base);
  const auto mb = vwss::lab::generate_vessel(ext);
  const auto fa = vwss::lab::oracle_wss(ma, base, constant_flow(80.0));
  const auto fb = vwss::lab::oracle_wss(mb, ext, constant_flow(80.0));

  // compare on shared downstream wall vertices (exact position matches)
  const auto caps_b = mb.cap_flags();
  int compared = 0;
  for (int w = 0; w < mb.n_vertices(); ++w) {
    if (caps_b[static_cast<size_t>(w)]) continue;
    if (mb.vertices(w, 2) < 75.0) continue; // well past the take-off at z=50
    for (int v = 0; v < ma.n_vertices(); ++v)
      if ((ma.vertices.row(v) - mb.vertices.row(w)).norm() == 0.0) {
        EXPECT_LT(fb.at(w, 5).norm(), fa.at(v, 5).norm());
        ++compared;
        break;
      }
  }
  EXPECT_GT(compared, 30);
}

// --- windkessel --------------------------------------------------------------------

TEST(Windkessel, ReferenceConstants) {
  const auto set = vwss::lab::split_windkessel(125000.0, 80.0, 1e-4, {3.0});
  EXPECT_DOUBLE_EQ(set.r_total(), 1562.5);
  ASSERT_EQ(set.outlets.size(), 1u);
  // single outlet: the split is the identity
  EXPECT_DOUBLE_EQ(set.outlets[0].r_distal, 1421.875);
  EXPECT_DOUBLE_EQ(set.outlets[0].r_proximal, 140.625);
  EXPECT_DOUBLE_EQ(set.outlets[0].c, 1e-4);
}

TEST(Windkessel, TwoEqualOutletsDoubleEachResistance) {
  const auto set = vwss::lab::split_windkessel(125000.0, 80.0, 2e-4, {2.5, 2.5});
  ASSERT_EQ(set.outlets.size(), 2u);
  for (const auto& o : set.outlets) {
    EXPECT_DOUBLE_EQ(o.r_proximal, 2.0 * 140.625);
    EXPECT_DOUBLE_EQ(o.r_distal, 2.0 * 1421.875);
    EXPECT_DOUBLE_EQ(o.c, 1e-4);
  }
}

TEST(Windkessel, ParallelRecombinationOnRandomAreas) {
  tt::Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(tt::runif(rng, 0.0, 7.999));
    std::vector<double> areas;
    for (int i = 0; i < k; ++i) areas.push_back(tt::runif(rng, 0.3, 6.0));
    const double p = tt::runif(rng, 5e4, 2e5), q = tt::runif(rng, 40.0, 150.0);
    const double c = tt::runif(rng, 1e-5, 1e-3);
    const auto set = vwss::lab::split_windkessel(p, q, c, areas);

    double inv_r = 0.0, c_sum = 0.0;
    for (const auto& o : set.outlets) {
      inv_r += 1.0 / (o.r_proximal + o.r_distal);
      c_sum += o.c;
      EXPECT_GT(o.r_proximal, 0.0);
      EXPECT_GT(o.r_distal, 0.0);
      EXPECT_GT(o.c, 0.0);
    }
    EXPECT_NEAR(inv_r, q / p, 1e-9 * q / p);
    EXPECT_NEAR(c_sum, c, 1e-9 * c);
  }
}

TEST(Windkessel, RejectsNonPositiveInputs) {
  EXPECT_THROW(vwss::lab::split_windkessel(0.0, 80.0, 1e-4, {1.0}), std::invalid_argument);
  EXPECT_THROW(vwss::lab::split_windkessel(1e5, 80.0, 1e-4, {}), std::invalid_argument);
  EXPECT_THROW(vwss::lab::split_windkessel(1e5, 80.0, 1e-4, {1.0, -1.0}), std::invalid_argument);
}

// --- resampling --------------------------------------------------------------------

TEST(Resample, IdentityTargetKeepsTheVertexBudget) {
  const auto spec = straight_tube(10.0, 100.0, 4.0);
  const auto m = vwss::lab::generate_vessel(spec);
  const double edge = vwss::heat::mean_edge_length(m);
  const auto r = vwss::lab::resample_mesh(m, edge);
  ASSERT_NO_THROW(r.validate());
  EXPECT_NEAR(static_cast<double>(r.n_vertices()), static_cast<double>(m.n_vertices()),
              0.2 * m.n_vertices());
  EXPECT_NEAR(total_area(r), total_area(m), 0.02 * total_area(m));
}

TEST(Resample, HalvingTheEdgeQuadruplesTheVertexCount) {
  const auto spec = straight_tube(10.0, 80.0, 5.0);
  const auto m = vwss::lab::generate_vessel(spec);
  const double edge = vwss::heat::mean_edge_length(m);
  const auto r = vwss::lab::resample_mesh(m, 0.5 * edge);
  ASSERT_NO_THROW(r.validate());
  EXPECT_NEAR(static_cast<double>(r.n_vertices()), 4.0 * m.n_vertices(),
              0.3 * 4.0 * m.n_vertices());
  EXPECT_NEAR(total_area(r), total_area(m), 0.02 * total_area(m));
}

TEST(Resample, StaysCloseToTheSourceSurface) {
  VesselSpec spec = straight_tube(9.0, 80.0, 4.0);
  spec.bulge.amplitude_mm = 4.0;
  const auto m = vwss::lab::generate_vessel(spec);
  const double target = 0.8 * vwss::heat::mean_edge_length(m);
  const auto r = vwss::lab::resample_mesh(m, target);
  EXPECT_LT(vertex_to_surface(r, m), 0.5 * target);
  EXPECT_LT(vertex_to_surface(m, r), 0.5 * target);
}

TEST(Resample, TransfersCapLabels) {
  const auto spec = straight_tube(10.0, 90.0, 4.0);
  const auto m = vwss::lab::generate_vessel(spec);
  const auto r = vwss::lab::resample_mesh(m, 0.7 * vwss::heat::mean_edge_length(m));
  EXPECT_GE(r.inlet.size(), 4u);
  ASSERT_EQ(r.outlets.size(), 1u);
  EXPECT_GE(r.outlets[0].size(), 4u);
  EXPECT_DOUBLE_EQ(r.inlet_area, m.inlet_area);
  // transferred labels stay on their cap planes (z = 0 and z = 90)
  for (const int v : r.inlet) EXPECT_NEAR(r.vertices(v, 2), 0.0, 1e-9);
  for (const int v : r.outlets[0]) EXPECT_NEAR(r.vertices(v, 2), 90.0, 1e-9);
}

// --- recipe ------------------------------------------------------------------------

TEST(Recipe, BuildsAValidDeterministicCorpus) {
  vwss::lab::RecipeConfig rc;
  rc.n_geometries = 3;
  rc.random_sims = 2;
  rc.seed = 42;
  const auto ds = vwss::lab::build_lab_dataset(rc);
  ASSERT_EQ(ds.geometries.size(), 3u);
  for (const auto& g : ds.geometries) {
    ASSERT_NO_THROW(g.mesh.validate(true));
    ASSERT_EQ(g.sims.size(), 3u); // 2 random + 1 reference
    EXPECT_DOUBLE_EQ(g.sims.back().q_max, 80.0);
    for (const auto& sim : g.sims) {
      EXPECT_EQ(sim.field.n_points(), g.mesh.n_vertices());
      EXPECT_EQ(sim.field.timepoints, 21);
      EXPECT_GE(sim.q_max, 60.0);
      EXPECT_LE(sim.q_max, 140.0);
    }
  }
  const auto again = vwss::lab::build_lab_dataset(rc);
  EXPECT_EQ(ds.geometries[0].mesh.vertices, again.geometries[0].mesh.vertices);
  EXPECT_EQ(ds.geometries[2].sims[1].field.tau, again.geometries[2].sims[1].field.tau);
}

TEST(Recipe, TrainingConversionKeepsEveryPair) {
  vwss::lab::RecipeConfig rc;
  rc.n_geometries = 2;
  rc.random_sims = 1;
  rc.seed = 7;
  const auto lab = vwss::lab::build_lab_dataset(rc);
  const auto ds = vwss::lab::to_training_dataset(lab);
  ASSERT_EQ(ds.size(), 4u);
  for (const auto& s : ds) {
    EXPECT_NO_THROW(s.descriptors.validate());
    EXPECT_EQ(s.descriptors.n_points(), s.target.n_points());
    EXPECT_GT(s.descriptors.v_max, 0.0);
  }
  EXPECT_EQ(ds[0].geometry_id, ds[1].geometry_id);
  EXPECT_NE(ds[0].geometry_id, ds[2].geometry_id);
}

TEST(Recipe, RoundTripsThroughDisk) {
  vwss::lab::RecipeConfig rc;
  rc.n_geometries = 2;
  rc.random_sims = 1;
  rc.seed = 3;
  const auto ds = vwss::lab::build_lab_dataset(rc);
  const std::filesystem::path dir = ::testing::TempDir() + "/lab_roundtrip";
  vwss::lab::save_lab_dataset(ds, dir);
  const auto loaded = vwss::lab::load_lab_dataset(dir);
  ASSERT_EQ(loaded.geometries.size(), ds.geometries.size());
  for (size_t g = 0; g < ds.geometries.size(); ++g) {
    EXPECT_LT((loaded.geometries[g].mesh.vertices - ds.geometries[g].mesh.vertices)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-6);
    ASSERT_EQ(loaded.geometries[g].sims.size(), ds.geometries[g].sims.size());
    for (size_t s = 0; s < ds.geometries[g].sims.size(); ++s)
      EXPECT_LT((loaded.geometries[g].sims[s].field.tau - ds.geometries[g].sims[s].field.tau)
                    .cwiseAbs()
                    .maxCoeff(),
                1e-12);
  }
}
