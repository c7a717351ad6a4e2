#include "pushdyn/cur/episode.hpp"

#include <fstream>
#include <json.hpp>

#include "pushdyn/binio.hpp"
#include "pushdyn/cloud_io.hpp"
#include "pushdyn/io/config_json.hpp"

namespace pushdyn::cur {

namespace {

void write_snapshot(BinWriter& w, const sim::SceneState& s) {
  w.pod(static_cast<std::uint32_t>(s.bodies.size()));
  for (const auto& b : s.bodies) {
    w.pod(b.pose.p.x());
    w.pod(b.pose.p.y());
    w.pod(b.pose.theta);
    w.pod(b.vel.x());
    w.pod(b.vel.y());
    w.pod(b.omega);
    w.pod(static_cast<std::uint8_t>(b.dropped ? 1 : 0));
  }
  for (int i = 0; i < 3; ++i) w.pod(s.arm.q[i]);
  for (int i = 0; i < 3; ++i) w.pod(s.arm.qd[i]);
  w.pod(s.time);
  w.pod(static_cast<std::uint32_t>(s.step_index));
  w.pod(static_cast<std::uint8_t>(s.solver_warning ? 1 : 0));
}

sim::SceneState read_snapshot(BinReader& r, const sim::SceneState& scene_template) {
  sim::SceneState s = scene_template;
  const auto n = r.pod<std::uint32_t>();
  if (n != s.bodies.size()) throw std::runtime_error("episode: snapshot body count mismatch");
  for (auto& b : s.bodies) {
    b.pose.p.x() = r.pod<double>();
    b.pose.p.y() = r.pod<double>();
    b.pose.theta = r.pod<double>();
    b.vel.x() = r.pod<double>();
    b.vel.y() = r.pod<double>();
    b.omega = r.pod<double>();
    b.dropped = r.pod<std::uint8_t>() != 0;
  }
  for (int i = 0; i < 3; ++i) s.arm.q[i] = r.pod<double>();
  for (int i = 0; i < 3; ++i) s.arm.qd[i] = r.pod<double>();
  s.time = r.pod<double>();
  s.step_index = static_cast<int>(r.pod<std::uint32_t>());
  s.solver_warning = r.pod<std::uint8_t>() != 0;
  return s;
}

void write_sources(BinWriter& w, const std::vector<sim::PointSource>& src) {
  w.pod(static_cast<std::uint32_t>(src.size()));
  for (const auto& s : src) {
    w.pod(s.body);
    w.pod(s.canon);
  }
}

std::vector<sim::PointSource> read_sources(BinReader& r) {
  const auto n = r.pod<std::uint32_t>();
  std::vector<sim::PointSource> out(n);
  for (auto& s : out) {
    s.body = r.pod<std::int32_t>();
    s.canon = r.pod<std::uint32_t>();
  }
  return out;
}

void write_reward(BinWriter& w, const rl::RewardBreakdown& rb) {
  w.pod(rb.r_contact);
  w.pod(rb.r_goal);
  w.pod(rb.r_goal_fine);
  w.pod(rb.r_success);
  w.pod(rb.total);
  w.pod(static_cast<std::uint8_t>(rb.gate ? 1 : 0));
  w.pod(rb.m_motion);
}

rl::RewardBreakdown read_reward(BinReader& r) {
  rl::RewardBreakdown rb;
  rb.r_contact = r.pod<double>();
  rb.r_goal = r.pod<double>();
  rb.r_goal_fine = r.pod<double>();
  rb.r_success = r.pod<double>();
  rb.total = r.pod<double>();
  rb.gate = r.pod<std::uint8_t>() != 0;
  rb.m_motion = r.pod<double>();
  return rb;
}

}  // namespace

void save_episode(const EpisodeRecord& ep, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write episode: " + path);
  BinWriter w{f};
  w.array("EPR1", 4);
  w.pod(static_cast<std::uint32_t>(1));

  nlohmann::json meta;
  meta["task"] = nlohmann::json::parse(gen::task_to_json(ep.task));
  meta["goal"] = {ep.goal.p.x(), ep.goal.p.y(), ep.goal.theta};
  meta["outcome"] = ep.outcome;
  meta["budgets"] = io::to_json(ep.budgets);
  meta["sim"] = io::to_json(ep.sim);
  w.str(meta.dump());

  w.pod(static_cast<std::uint32_t>(ep.steps.size()));
  for (const auto& st : ep.steps) {
    for (int i = 0; i < 3; ++i) w.pod(st.action[i]);
    for (int i = 0; i < 3; ++i) w.pod(st.ee_flow[i]);
    write_reward(w, st.reward);
    write_snapshot(w, st.snapshot);
    write_ppc1(f, st.cloud);
    write_sources(w, st.sources);
  }
  write_snapshot(w, ep.final_snapshot);
  write_ppc1(f, ep.final_cloud);
  write_sources(w, ep.final_sources);
}

EpisodeRecord load_episode(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open episode: " + path);
  BinReader r{f};
  char magic[4];
  r.array(magic, 4);
  if (std::string(magic, 4) != "EPR1") throw std::runtime_error("episode: bad magic");
  if (r.pod<std::uint32_t>() != 1) throw std::runtime_error("episode: unsupported version");

  EpisodeRecord ep;
  const auto meta = nlohmann::json::parse(r.str());
  ep.task = gen::task_from_json(meta.at("task").dump());
  ep.goal.p.x() = meta.at("goal").at(0).get<double>();
  ep.goal.p.y() = meta.at("goal").at(1).get<double>();
  ep.goal.theta = meta.at("goal").at(2).get<double>();
  ep.outcome = meta.at("outcome").get<std::string>();
  io::from_json_into(meta.at("budgets"), ep.budgets);
  io::from_json_into(meta.at("sim"), ep.sim);

  const auto steps = r.pod<std::uint32_t>();
  ep.steps.resize(steps);
  for (auto& st : ep.steps) {
    for (int i = 0; i < 3; ++i) st.action[i] = r.pod<double>();
    for (int i = 0; i < 3; ++i) st.ee_flow[i] = r.pod<double>();
    st.reward = read_reward(r);
    st.snapshot = read_snapshot(r, ep.task.scene);
    st.cloud = read_ppc1(f);
    st.sources = read_sources(r);
  }
  ep.final_snapshot = read_snapshot(r, ep.task.scene);
  ep.final_cloud = read_ppc1(f);
  ep.final_sources = read_sources(r);
  return ep;
}

void save_dataset_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["total_steps"] = m.total_steps;
  j["files"] = m.files;
  std::vector<std::string> hashes;
  for (auto h : m.hashes) hashes.push_back(hex64(h));
  j["hashes"] = hashes;
  write_text_file(path, j.dump(2));
}

DatasetManifest load_dataset_manifest(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  DatasetManifest m;
  m.total_steps = j.at("total_steps").get<long>();
  m.files = j.at("files").get<std::vector<std::string>>();
  for (const auto& h : j.at("hashes"))
    m.hashes.push_back(std::stoull(h.get<std::string>(), nullptr, 16));
  return m;
}

std::vector<wm::WmSample> episode_to_samples(const EpisodeRecord& ep) {
  std::vector<wm::WmSample> out;
  if (ep.steps.empty()) return out;
  sim::SceneCloudRenderer renderer(ep.task.scene, ep.budgets, ep.sim, ep.task.seed);

  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const EpisodeStep& st = ep.steps[t];
    const sim::SceneState& next =
        t + 1 < ep.steps.size() ? ep.steps[t + 1].snapshot : ep.final_snapshot;

    wm::WmSample s;
    s.cloud = st.cloud;
    s.action = st.ee_flow;
    const int n = st.cloud.size();
    s.next_positions.resize(n, 3);
    s.next_velocities.resize(n, 3);
    s.point_body.resize(static_cast<std::size_t>(n), -1);

    const Pose2 ee_next = next.ee_pose(ep.sim);
    const Eigen::Vector3d ee_twist = next.ee_twist(ep.sim);
    for (int i = 0; i < n; ++i) {
      const auto& src = st.sources[static_cast<std::size_t>(i)];
      if (src.body >= 0) {
        const auto& canon = renderer.canonical(src.body);
        const Eigen::Vector2d local(canon.positions()(static_cast<int>(src.canon), 0),
                                    canon.positions()(static_cast<int>(src.canon), 1));
        const sim::RigidBody& b = next.bodies[static_cast<std::size_t>(src.body)];
        const Eigen::Vector2d wp = b.pose.apply(local);
        const Eigen::Vector2d wv = b.point_velocity(wp);
        s.next_positions.row(i) << wp.x(), wp.y(), 0.0;
        s.next_velocities.row(i) << wv.x(), wv.y(), 0.0;
        s.point_body[static_cast<std::size_t>(i)] = src.body;
      } else if (src.body == sim::kSourceEndEffector) {
        const auto& unit = renderer.ee_unit();
        const Eigen::Vector2d local(unit.positions()(static_cast<int>(src.canon), 0),
                                    unit.positions()(static_cast<int>(src.canon), 1));
        const Eigen::Vector2d wp = ee_next.apply(next.arm.ee_radius * local);
        const Eigen::Vector2d wv = ee_twist.head<2>() + ee_twist[2] * perp(wp - ee_next.p);
        s.next_positions.row(i) << wp.x(), wp.y(), 0.0;
        s.next_velocities.row(i) << wv.x(), wv.y(), 0.0;
      } else {
        // boundary padding never moves
        s.next_positions.row(i) = st.cloud.positions().row(i);
        s.next_velocities.row(i).setZero();
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

bool replay_matches(const EpisodeRecord& ep) {
  sim::SceneCloudRenderer renderer(ep.task.scene, ep.budgets, ep.sim, ep.task.seed);
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const sim::SceneState stepped = sim::step(ep.steps[t].snapshot, ep.steps[t].action, ep.sim).state;
    const PhysPointCloud re_rendered = renderer.render(stepped);
    const PhysPointCloud& stored =
        t + 1 < ep.steps.size() ? ep.steps[t + 1].cloud : ep.final_cloud;
    if (re_rendered.size() != stored.size()) return false;
    if ((re_rendered.feats.cast<float>().array() != stored.feats.cast<float>().array()).any())
      return false;
  }
  return true;
}

}  // namespace pushdyn::cur
