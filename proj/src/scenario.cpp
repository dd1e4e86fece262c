#include "nrs/scenario.hpp"

#include "nrs/io.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

namespace nrs {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + key, "missing");
  return j.at(key);
}

double need_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) fail(path + key, "expected a number");
  return v.get<double>();
}

Eigen::VectorXd json_to_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(path, "expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd json_to_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    fail(path, "expected a nested array (matrix rows)");
  }
  const size_t cols = j[0].size();
  Eigen::MatrixXd M(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(path, "ragged matrix rows");
    }
    for (size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) fail(path, "expected numbers");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return M;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RobotModel robot_from_json(const json& j, const std::string& path) {
  RobotModel m;
  const Eigen::VectorXd mass = json_to_vector(need(j, "mass", path), path + "mass");
  const Eigen::VectorXd len = json_to_vector(need(j, "length", path), path + "length");
  const Eigen::VectorXd in = json_to_vector(need(j, "inertia", path), path + "inertia");
  if (mass.size() != 2 || len.size() != 2 || in.size() != 2) {
    fail(path, "mass/length/inertia need exactly two entries");
  }
  m.link_mass = {mass(0), mass(1)};
  m.link_length = {len(0), len(1)};
  m.link_inertia = {in(0), in(1)};
  m.gravity_accel = need_number(j, "gravity", path);
  m.validate();
  return m;
}

json robot_to_json(const RobotModel& m) {
  return json{{"mass", {m.link_mass[0], m.link_mass[1]}},
              {"length", {m.link_length[0], m.link_length[1]}},
              {"inertia", {m.link_inertia[0], m.link_inertia[1]}},
              {"gravity", m.gravity_accel}};
}

std::vector<Eigen::MatrixXd> gains_from_json(const json& j, const std::string& key,
                                             int n, int m, const std::string& path) {
  const json& v = need(j, key, path);
  if (v.is_number()) {
    return std::vector<Eigen::MatrixXd>(
        static_cast<size_t>(n),
        v.get<double>() * Eigen::MatrixXd::Identity(m, m));
  }
  if (v.is_array() && !v.empty() && v[0].is_array() && !v[0].empty() &&
      v[0][0].is_number()) {
    return std::vector<Eigen::MatrixXd>(static_cast<size_t>(n),
                                        json_to_matrix(v, path + key));
  }
  if (v.is_array()) {
    std::vector<Eigen::MatrixXd> out;
    for (size_t i = 0; i < v.size(); ++i) {
      out.push_back(json_to_matrix(v[i], path + key));
    }
    if (out.size() != static_cast<size_t>(n)) {
      fail(path + key, "need one gain matrix per robot");
    }
    return out;
  }
  fail(path + key, "expected a scalar, a matrix, or a list of matrices");
}

json gains_to_json(const std::vector<Eigen::MatrixXd>& K) {
  const bool shared = std::all_of(K.begin(), K.end(),
                                  [&](const Eigen::MatrixXd& M) { return M == K[0]; });
  if (shared) return matrix_to_json(K[0]);
  json list = json::array();
  for (const auto& M : K) list.push_back(matrix_to_json(M));
  return list;
}

}  // namespace

bool operator==(const RobotModel& a, const RobotModel& b) {
  return a.link_mass == b.link_mass && a.link_length == b.link_length &&
         a.link_inertia == b.link_inertia && a.gravity_accel == b.gravity_accel;
}

bool operator==(const TargetConfig& a, const TargetConfig& b) {
  return a.kind == b.kind && a.position == b.position && a.offset == b.offset &&
         a.slope == b.slope && a.amp == b.amp && a.omega == b.omega &&
         a.phase == b.phase;
}

bool operator==(const DisturbanceConfig& a, const DisturbanceConfig& b) {
  return a.kind == b.kind;
}

bool operator==(const InitConfig& a, const InitConfig& b) {
  return a.kind == b.kind && a.lo == b.lo && a.hi == b.hi && a.q == b.q &&
         a.qdot == b.qdot && a.eps == b.eps && a.ups == b.ups;
}

bool operator==(const DceaConfig& a, const DceaConfig& b) {
  return a.order == b.order && a.alpha == b.alpha && a.beta == b.beta && a.h == b.h &&
         a.Kp == b.Kp && a.Kd == b.Kd;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.name == b.name && a.W == b.W && a.robots == b.robots &&
         a.target == b.target && a.disturbance == b.disturbance && a.init == b.init &&
         a.dcea == b.dcea && a.t_end == b.t_end && a.dt == b.dt &&
         a.record_stride == b.record_stride && a.seed == b.seed &&
         a.out_dir == b.out_dir;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.name = j.value("name", std::string("scenario"));

  const json& topo = need(j, "topology", "");
  if (topo.contains("preset")) {
    if (topo.at("preset") != "paper-example") fail("topology.preset", "unknown preset");
    s.W = paper_topology_matrix();
  } else {
    s.W = json_to_matrix(need(topo, "matrix", "topology."), "topology.matrix");
  }
  const int n = static_cast<int>(s.W.rows()) - 1;
  if (n < 1) fail("topology.matrix", "needs at least the target and one robot");

  const json& robots = need(j, "robots", "");
  if (robots.contains("preset")) {
    if (robots.at("preset") != "paper-example") fail("robots.preset", "unknown preset");
    s.robots = {RobotModel{}};
  } else if (robots.contains("models")) {
    const json& list = robots.at("models");
    if (!list.is_array() || list.empty()) fail("robots.models", "expected a list");
    for (size_t i = 0; i < list.size(); ++i) {
      s.robots.push_back(robot_from_json(list[i], "robots.models."));
    }
    if (s.robots.size() != 1 && s.robots.size() != static_cast<size_t>(n)) {
      fail("robots.models", "need one model, or one per robot");
    }
  } else {
    s.robots = {robot_from_json(need(robots, "model", "robots."), "robots.model.")};
  }

  const json& tgt = need(j, "target", "");
  if (tgt.contains("preset")) {
    if (tgt.at("preset") != "paper-example") fail("target.preset", "unknown preset");
    s.target.kind = TargetConfig::Kind::PaperExample;
  } else {
    const std::string type = need(tgt, "type", "target.").get<std::string>();
    if (type == "static") {
      s.target.kind = TargetConfig::Kind::Static;
      s.target.position =
          json_to_vector(need(tgt, "position", "target."), "target.position");
    } else if (type == "sinusoid") {
      s.target.kind = TargetConfig::Kind::Sinusoid;
      s.target.offset = json_to_vector(need(tgt, "offset", "target."), "target.offset");
      s.target.slope = json_to_vector(need(tgt, "slope", "target."), "target.slope");
      s.target.amp = json_to_vector(need(tgt, "amp", "target."), "target.amp");
      s.target.omega = json_to_vector(need(tgt, "omega", "target."), "target.omega");
      s.target.phase = json_to_vector(need(tgt, "phase", "target."), "target.phase");
      const auto len = s.target.offset.size();
      if (s.target.slope.size() != len || s.target.amp.size() != len ||
          s.target.omega.size() != len || s.target.phase.size() != len) {
        fail("target", "sinusoid component arrays must share one length");
      }
    } else {
      fail("target.type", "expected 'static' or 'sinusoid'");
    }
  }

  if (j.contains("disturbance")) {
    const std::string p =
        need(j.at("disturbance"), "preset", "disturbance.").get<std::string>();
    if (p == "none") {
      s.disturbance.kind = DisturbanceConfig::Kind::None;
    } else if (p == "paper-example") {
      s.disturbance.kind = DisturbanceConfig::Kind::PaperExample;
    } else {
      fail("disturbance.preset", "expected 'none' or 'paper-example'");
    }
  }

  const json& dc = need(j, "dcea", "");
  const std::string order = need(dc, "order", "dcea.").get<std::string>();
  if (order == "first") {
    s.dcea.order = DceaOrder::FirstOrder;
  } else if (order == "second") {
    s.dcea.order = DceaOrder::SecondOrder;
  } else {
    fail("dcea.order", "expected 'first' or 'second'");
  }
  s.dcea.alpha = need_number(dc, "alpha", "dcea.");
  s.dcea.beta = need_number(dc, "beta", "dcea.");
  s.dcea.h = need_number(dc, "h", "dcea.");
  s.dcea.Kp = gains_from_json(dc, "kp", n, RobotModel::dof, "dcea.");
  s.dcea.Kd = gains_from_json(dc, "kd", n, RobotModel::dof, "dcea.");
  try {
    s.dcea.validate();
  } catch (const std::invalid_argument& e) {
    fail("dcea", e.what());
  }

  const json& hor = need(j, "horizon", "");
  s.t_end = need_number(hor, "t_end", "horizon.");
  s.dt = need_number(hor, "dt", "horizon.");
  s.record_stride = hor.value("record_stride", 1);
  if (s.record_stride < 1) fail("horizon.record_stride", "must be >= 1");
  if (!(s.dt > 0)) fail("horizon.dt", "must be positive");
  if (s.t_end < 0) fail("horizon.t_end", "must be nonnegative");

  if (j.contains("init")) {
    const json& init = j.at("init");
    const std::string type = need(init, "type", "init.").get<std::string>();
    if (type == "uniform") {
      s.init.kind = InitConfig::Kind::UniformRandom;
      const Eigen::VectorXd range =
          json_to_vector(need(init, "range", "init."), "init.range");
      if (range.size() != 2 || !(range(0) < range(1))) {
        fail("init.range", "expected [lo, hi] with lo < hi");
      }
      s.init.lo = range(0);
      s.init.hi = range(1);
    } else if (type == "explicit") {
      s.init.kind = InitConfig::Kind::Explicit;
      s.init.q = json_to_matrix(need(init, "q", "init."), "init.q");
      s.init.qdot = json_to_matrix(need(init, "qdot", "init."), "init.qdot");
      s.init.eps = json_to_matrix(need(init, "eps", "init."), "init.eps");
      s.init.ups = json_to_matrix(need(init, "ups", "init."), "init.ups");
    } else {
      fail("init.type", "expected 'uniform' or 'explicit'");
    }
  }

  s.seed = j.value("seed", std::uint64_t{1});
  s.out_dir = j.value("out_dir", std::string("out"));
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["topology"] = {{"matrix", matrix_to_json(s.W)}};
  {
    json models = json::array();
    for (const auto& m : s.robots) models.push_back(robot_to_json(m));
    j["robots"] = {{"models", models}};
  }
  switch (s.target.kind) {
    case TargetConfig::Kind::PaperExample:
      j["target"] = {{"preset", "paper-example"}};
      break;
    case TargetConfig::Kind::Static:
      j["target"] = {{"type", "static"}, {"position", vector_to_json(s.target.position)}};
      break;
    case TargetConfig::Kind::Sinusoid:
      j["target"] = {{"type", "sinusoid"},
                     {"offset", vector_to_json(s.target.offset)},
                     {"slope", vector_to_json(s.target.slope)},
                     {"amp", vector_to_json(s.target.amp)},
                     {"omega", vector_to_json(s.target.omega)},
                     {"phase", vector_to_json(s.target.phase)}};
      break;
  }
  j["disturbance"] = {
      {"preset",
       s.disturbance.kind == DisturbanceConfig::Kind::None ? "none" : "paper-example"}};
  j["dcea"] = {{"order", s.dcea.order == DceaOrder::FirstOrder ? "first" : "second"},
               {"alpha", s.dcea.alpha},
               {"beta", s.dcea.beta},
               {"h", s.dcea.h},
               {"kp", gains_to_json(s.dcea.Kp)},
               {"kd", gains_to_json(s.dcea.Kd)}};
  j["horizon"] = {{"t_end", s.t_end}, {"dt", s.dt}, {"record_stride", s.record_stride}};
  if (s.init.kind == InitConfig::Kind::UniformRandom) {
    j["init"] = {{"type", "uniform"}, {"range", {s.init.lo, s.init.hi}}};
  } else {
    j["init"] = {{"type", "explicit"},
                 {"q", matrix_to_json(s.init.q)},
                 {"qdot", matrix_to_json(s.init.qdot)},
                 {"eps", matrix_to_json(s.init.eps)},
                 {"ups", matrix_to_json(s.init.ups)}};
  }
  j["seed"] = s.seed;
  j["out_dir"] = s.out_dir;
  return j;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario_file(const Scenario& s, const std::string& path) {
  atomic_write_file(path, scenario_to_json(s).dump(2) + "\n");
}

Eigen::MatrixXd paper_topology_matrix() {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(7, 7);
  const Eigen::VectorXd zeta = (Eigen::VectorXd(6) << 0, 0, 1, 0, 0, 0).finished();
  Eigen::MatrixXd What(6, 6);
  What << 0, 1, 1, 0, 0, 0,  //
      1, 0, 0, 0, 0, 0,      //
      0, 0, 0, 0, 0, 0,      //
      1, 0, 1, 0, 0, 0,      //
      0, 1, 1, 1, 0, 0,      //
      0, 0, 1, 0, 0, 0;
  W.block(1, 0, 6, 1) = zeta;
  W.block(1, 1, 6, 6) = What;
  return W;
}

Scenario preset_scenario(const std::string& name) {
  const auto paper_base = [](DceaOrder order, double alpha, double beta, double h) {
    Scenario s;
    s.W = paper_topology_matrix();
    s.robots = {RobotModel{}};
    s.target.kind = TargetConfig::Kind::PaperExample;
    s.disturbance.kind = DisturbanceConfig::Kind::PaperExample;
    s.dcea = DceaConfig::uniform(order, alpha, beta, h, 6,
                                 200.0 * Eigen::Matrix2d::Identity(),
                                 300.0 * Eigen::Matrix2d::Identity());
    s.t_end = 50.0;
    s.dt = 4e-4;
    s.record_stride = 5;
    s.seed = 1;
    return s;
  };

  Scenario s;
  if (name == "example1-stable") {
    s = paper_base(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  } else if (name == "example1-boundary") {
    s = paper_base(DceaOrder::FirstOrder, 1.17, 1.17, 0.1);
  } else if (name == "example1-unstable") {
    s = paper_base(DceaOrder::FirstOrder, 1.18, 1.18, 0.1);
  } else if (name == "example2-sweep") {
    s = paper_base(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  } else if (name == "example3-sweep") {
    // The second-order divergence just past the admissible h is slow
    // (growth about 0.8%/sample), so give it room to show.
    s = paper_base(DceaOrder::SecondOrder, 1.1, 0.9, 0.45);
    s.t_end = 250.0;
  } else if (name == "equilibrium") {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 2);
    W(1, 0) = 1.0;
    s.W = W;
    RobotModel planar;
    planar.gravity_accel = 0.0;
    s.robots = {planar};
    s.target.kind = TargetConfig::Kind::Static;
    s.target.position = Eigen::Vector2d::Zero();
    s.disturbance.kind = DisturbanceConfig::Kind::None;
    s.dcea = DceaConfig::uniform(DceaOrder::FirstOrder, 0.5, 0.5, 0.1, 1,
                                 200.0 * Eigen::Matrix2d::Identity(),
                                 300.0 * Eigen::Matrix2d::Identity());
    s.init.kind = InitConfig::Kind::Explicit;
    s.init.q = Eigen::MatrixXd::Zero(1, 2);
    s.init.qdot = Eigen::MatrixXd::Zero(1, 2);
    s.init.eps = Eigen::MatrixXd::Zero(1, 2);
    s.init.ups = Eigen::MatrixXd::Zero(1, 2);
    s.t_end = 10.0;
    s.dt = 4e-4;
    s.record_stride = 5;
    s.seed = 1;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  s.name = name;
  s.out_dir = "out/" + name;
  return s;
}

std::vector<std::string> preset_names() {
  return {"example1-stable", "example1-boundary", "example1-unstable",
          "example2-sweep",  "example3-sweep",    "equilibrium"};
}

TargetSpec make_target(const TargetConfig& cfg, int m) {
  switch (cfg.kind) {
    case TargetConfig::Kind::PaperExample:
      if (m != 2) throw ConfigError("the built-in target is two-dimensional");
      return example_target();
    case TargetConfig::Kind::Static:
      if (cfg.position.size() != m) throw ConfigError("target dimension mismatch");
      return static_target(cfg.position);
    case TargetConfig::Kind::Sinusoid: {
      if (cfg.offset.size() != m) throw ConfigError("target dimension mismatch");
      TargetSpec t;
      t.dof = m;
      const Eigen::VectorXd off = cfg.offset, sl = cfg.slope, am = cfg.amp,
                            om = cfg.omega, ph = cfg.phase;
      t.position = [=](double s) {
        return Eigen::VectorXd(off.array() + sl.array() * s +
                               am.array() * (om.array() * s + ph.array()).sin());
      };
      t.velocity = [=](double s) {
        return Eigen::VectorXd(sl.array() +
                               am.array() * om.array() *
                                   (om.array() * s + ph.array()).cos());
      };
      t.accel = [=](double s) {
        return Eigen::VectorXd(-am.array() * om.array().square() *
                               (om.array() * s + ph.array()).sin());
      };
      t.gamma1 = (sl.cwiseAbs() + (am.cwiseProduct(om)).cwiseAbs()).maxCoeff();
      t.gamma2 = (am.cwiseProduct(om.cwiseProduct(om))).cwiseAbs().maxCoeff();
      return t;
    }
  }
  throw ConfigError("unreachable target kind");
}

Disturbance make_disturbance(const DisturbanceConfig& cfg, int m) {
  switch (cfg.kind) {
    case DisturbanceConfig::Kind::None:
      return Disturbance::none(m);
    case DisturbanceConfig::Kind::PaperExample:
      if (m != 2) throw ConfigError("the built-in disturbance is two-dimensional");
      return example_disturbance();
  }
  throw ConfigError("unreachable disturbance kind");
}

HybridState make_initial_state(const Scenario& s, const Topology& top) {
  const int n = top.n;
  const int m = RobotModel::dof;
  HybridState st;
  st.time = 0.0;
  if (s.init.kind == InitConfig::Kind::Explicit) {
    if (s.init.q.rows() != n || s.init.q.cols() != m || s.init.qdot.rows() != n ||
        s.init.eps.rows() != n || s.init.ups.rows() != n) {
      throw ConfigError("explicit init matrices must be n x dof");
    }
    st.q = s.init.q;
    st.qdot = s.init.qdot;
    st.est.eps = s.init.eps;
    st.est.ups = s.init.ups;
    return st;
  }
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> dist(s.init.lo, s.init.hi);
  const auto draw = [&](Eigen::MatrixXd& M) {
    M.resize(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) M(i, j) = dist(rng);
    }
  };
  draw(st.q);
  draw(st.qdot);
  draw(st.est.eps);
  draw(st.est.ups);
  return st;
}

RunResult run_from_scenario(const Scenario& s, double window_fraction) {
  const Topology top = build_topology(s.W);
  const TargetSpec target = make_target(s.target, RobotModel::dof);
  const Disturbance dist = make_disturbance(s.disturbance, RobotModel::dof);
  const HybridState init = make_initial_state(s, top);
  RunResult out;
  out.trace = run_scenario(top, s.robots, target, dist, s.dcea, init, s.t_end, s.dt,
                           s.record_stride);
  out.trace.metadata = scenario_to_json(s).dump();
  out.metrics = metrics(out.trace, window_fraction);
  return out;
}

std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& parameter,
                                const std::vector<double>& values, int workers,
                                double window_fraction) {
  if (parameter != "h" && parameter != "alpha" && parameter != "beta") {
    throw ConfigError("sweep parameter must be one of h, alpha, beta");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (double v : values) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw ConfigError("sweep values must be positive and finite");
    }
  }

  std::vector<SweepRow> rows(values.size());
  std::atomic<size_t> cursor{0};
  const auto worker = [&] {
    for (size_t idx; (idx = cursor.fetch_add(1)) < values.size();) {
      SweepRow& row = rows[idx];
      row.value = values[idx];
      try {
        Scenario sc = base;
        if (parameter == "h") {
          sc.dcea.h = row.value;
          const long steps = std::max(1L, std::lround(row.value / base.dt));
          sc.dt = row.value / static_cast<double>(steps);
        } else if (parameter == "alpha") {
          sc.dcea.alpha = row.value;
        } else {
          sc.dcea.beta = row.value;
        }
        const RunResult res = run_from_scenario(sc, window_fraction);
        row.metrics = res.metrics;
        try {
          const Topology top = build_topology(sc.W);
          const TargetSpec target = make_target(sc.target, RobotModel::dof);
          const Disturbance dist = make_disturbance(sc.disturbance, RobotModel::dof);
          const ModelBounds bounds = model_bounds(sc.robots.front(), 0.0, dist.cap);
          const RegionEstimates reg =
              region_estimates(top, sc.dcea, target, bounds, RobotModel::dof);
          row.delta1 = reg.delta1;
          row.delta2 = reg.delta2;
        } catch (const std::exception&) {
          // No certificate at this point (e.g. outside the stability
          // region); the NaN columns say so.
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };

  const int thread_count =
      std::max(1, std::min<int>(workers, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(thread_count));
  for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return rows;
}

}  // namespace nrs
