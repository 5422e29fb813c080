#include "mimic/rbd/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mimic::rbd {
namespace {

using nlohmann::json;

Eigen::Vector3d read_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ModelError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Isometry3d read_transform(const json& j) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (j.contains("xyz")) t.translation() = read_vec3(j["xyz"]);
  if (j.contains("rpy")) {
    const Eigen::Vector3d rpy = read_vec3(j["rpy"]);
    t.linear() = (Eigen::AngleAxisd(rpy[2], Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(rpy[1], Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(rpy[0], Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
  }
  return t;
}

Eigen::Matrix3d read_inertia(const json& j) {
  if (!j.is_array() || j.size() != 6) throw ModelError("inertia must be [ixx,iyy,izz,ixy,ixz,iyz]");
  Eigen::Matrix3d m;
  m << j[0].get<double>(), j[3].get<double>(), j[4].get<double>(),
       j[3].get<double>(), j[1].get<double>(), j[5].get<double>(),
       j[4].get<double>(), j[5].get<double>(), j[2].get<double>();
  return m;
}

void check_spd(const Eigen::Matrix3d& m, const std::string& link) {
  if ((m - m.transpose()).norm() > 1e-9)
    throw ModelError("inertia of link '" + link + "' is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ModelError("inertia of link '" + link + "' is not positive definite");
}

}  // namespace

int RobotModel::link_index(const std::string& link_name) const {
  for (size_t i = 0; i < links.size(); ++i)
    if (links[i].name == link_name) return static_cast<int>(i);
  return -1;
}

int RobotModel::frame_index(const std::string& frame_name) const {
  if (frame_name == "left_sole") return foot_frame(0);
  if (frame_name == "right_sole") return foot_frame(1);
  return link_index(frame_name);
}

int RobotModel::joint_link(int joint) const {
  for (size_t i = 0; i < links.size(); ++i)
    if (links[i].joint == joint) return static_cast<int>(i);
  return -1;
}

JointConfiguration JointConfiguration::Zero(const RobotModel& model) {
  JointConfiguration q;
  q.joint_angles = Eigen::VectorXd::Zero(model.n_j());
  return q;
}

bool validate_configuration(const RobotModel& model, const JointConfiguration& q,
                            std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (q.joint_angles.size() != model.n_j()) return fail("joint dimension mismatch");
  if (!q.joint_angles.allFinite() || !q.base_position.allFinite() || !q.base_rpy.allFinite())
    return fail("non-finite configuration");
  if (std::abs(q.base_rpy[1]) >= M_PI / 2.0 - 0.01) return fail("pitch near Euler singularity");
  for (int j = 0; j < model.n_j(); ++j) {
    if (q.joint_angles[j] < model.joints[j].lower - 1e-9 ||
        q.joint_angles[j] > model.joints[j].upper + 1e-9)
      return fail("joint '" + model.joints[j].name + "' outside position limits");
  }
  return true;
}

RobotModel load_model(const std::string& model_document) {
  json doc;
  try {
    doc = json::parse(model_document);
  } catch (const std::exception& e) {
    throw ModelError(std::string("model parse failure: ") + e.what());
  }
  if (!doc.contains("model_schema") || doc["model_schema"].get<int>() != 1)
    throw ModelError("missing or unsupported model_schema (expected 1)");

  RobotModel model;
  model.name = doc.value("name", "robot");
  model.height = doc.value("height", 0.0);
  if (!doc.contains("links") || !doc["links"].is_array() || doc["links"].empty())
    throw ModelError("links[] missing or empty");

  std::map<std::string, int> by_name;
  for (const auto& jl : doc["links"]) {
    Link link;
    link.name = jl.at("name").get<std::string>();
    if (by_name.count(link.name)) throw ModelError("duplicate link '" + link.name + "'");
    const std::string parent = jl.value("parent", std::string());
    if (parent.empty()) {
      if (!model.links.empty() && model.links[0].parent < 0)
        throw ModelError("multiple root links");
      link.parent = -1;
    } else {
      auto it = by_name.find(parent);
      if (it == by_name.end())
        throw ModelError("cyclic tree or forward reference at link '" + link.name +
                         "' (parent '" + parent + "' not yet defined)");
      link.parent = it->second;
    }
    if (jl.contains("offset")) link.offset = read_transform(jl["offset"]);
    link.mass = jl.at("mass").get<double>();
    if (link.mass <= 0.0) throw ModelError("link '" + link.name + "' mass must be > 0");
    if (jl.contains("com")) link.com = read_vec3(jl["com"]);
    link.inertia = read_inertia(jl.at("inertia"));
    check_spd(link.inertia, link.name);
    if (jl.contains("capsule")) {
      Capsule c;
      c.p0 = read_vec3(jl["capsule"].at("p0"));
      c.p1 = read_vec3(jl["capsule"].at("p1"));
      c.radius = jl["capsule"].at("radius").get<double>();
      if (c.radius <= 0.0) throw ModelError("capsule radius must be > 0 on '" + link.name + "'");
      link.capsule = c;
    }
    if (jl.contains("joint") && !jl["joint"].is_null()) {
      if (link.parent < 0) throw ModelError("root link cannot carry a joint");
      const auto& jj = jl["joint"];
      Joint joint;
      joint.name = jj.at("name").get<std::string>();
      joint.axis = read_vec3(jj.at("axis")).normalized();
      joint.lower = jj.at("lower").get<double>();
      joint.upper = jj.at("upper").get<double>();
      joint.velocity_limit = jj.value("velocity", 10.0);
      joint.torque_limit = jj.value("torque", 100.0);
      if (joint.lower >= joint.upper)
        throw ModelError("joint '" + joint.name + "' limits must satisfy lower < upper");
      if (joint.torque_limit <= 0.0 || joint.velocity_limit <= 0.0)
        throw ModelError("joint '" + joint.name + "' velocity/torque limits must be > 0");
      link.joint = static_cast<int>(model.joints.size());
      model.joints.push_back(joint);
    } else if (link.parent >= 0) {
      throw ModelError("non-root link '" + link.name + "' must carry a joint");
    }
    by_name[link.name] = static_cast<int>(model.links.size());
    model.links.push_back(link);
    model.total_mass += link.mass;
  }
  if (model.links[0].parent >= 0) throw ModelError("first link must be the root");

  if (!doc.contains("feet") || !doc["feet"].is_array() || doc["feet"].size() != 2)
    throw ModelError("feet[] must list exactly 2 foot frames");
  for (int f = 0; f < 2; ++f) {
    const auto& jf = doc["feet"][f];
    Foot foot;
    foot.name = jf.value("name", f == 0 ? "left" : "right");
    const std::string link = jf.at("link").get<std::string>();
    foot.link = model.link_index(link);
    if (foot.link < 0) throw ModelError("foot frame references unknown link '" + link + "'");
    if (jf.contains("offset")) foot.offset = read_transform(jf["offset"]);
    foot.half_length_x = jf.at("half_length_x").get<double>();
    foot.half_width_y = jf.at("half_width_y").get<double>();
    if (foot.half_length_x <= 0.0 || foot.half_width_y <= 0.0)
      throw ModelError("foot patch half-dimensions must be > 0");
    model.feet[f] = foot;
  }

  if (doc.contains("human_joint_map"))
    for (auto& [key, value] : doc["human_joint_map"].items())
      model.human_joint_map[key] = value.get<std::string>();

  auto read_joint_group = [&](const char* key, std::vector<int>& out) {
    if (!doc.contains(key)) return;
    for (const auto& jn : doc[key]) {
      const std::string name = jn.get<std::string>();
      int idx = -1;
      for (size_t j = 0; j < model.joints.size(); ++j)
        if (model.joints[j].name == name) idx = static_cast<int>(j);
      if (idx < 0) throw ModelError(std::string(key) + " references unknown joint '" + name + "'");
      out.push_back(idx);
    }
  };
  read_joint_group("leg_joints", model.leg_joints);
  read_joint_group("arm_joints", model.arm_joints);
  return model;
}

RobotModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace mimic::rbd
