#include "mimic/retarget/motion.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mimic::retarget {

using nlohmann::json;
using rbd::ModelError;

int HumanMotion::joint_index(const std::string& name) const {
  for (size_t i = 0; i < joint_names.size(); ++i)
    if (joint_names[i] == name) return static_cast<int>(i);
  return -1;
}

void HumanMotion::validate() const {
  if (frame_rate <= 0.0) throw ModelError("motion frame_rate must be > 0");
  if (frames() < 2) throw ModelError("motion must have at least 2 frames");
  if (height <= 0.0) throw ModelError("motion height must be > 0");
  for (const auto& p : positions) {
    if (p.rows() != n_joints()) throw ModelError("motion frame joint count mismatch");
    if (!p.allFinite()) throw ModelError("motion positions must be finite");
  }
}

HumanMotion load_motion(const std::string& motion_document) {
  json doc;
  try {
    doc = json::parse(motion_document);
  } catch (const std::exception& e) {
    throw ModelError(std::string("motion parse failure: ") + e.what());
  }
  if (!doc.contains("motion_schema") || doc["motion_schema"].get<int>() != 1)
    throw ModelError("missing or unsupported motion_schema (expected 1)");
  HumanMotion m;
  m.frame_rate = doc.at("frame_rate").get<double>();
  m.height = doc.at("height").get<double>();
  for (const auto& n : doc.at("joint_names")) m.joint_names.push_back(n.get<std::string>());
  const int nh = m.n_joints();
  m.skeleton_offsets = Eigen::MatrixX3d::Zero(nh, 3);
  if (doc.contains("skeleton_offsets")) {
    const auto& so = doc["skeleton_offsets"];
    for (int i = 0; i < nh && i < static_cast<int>(so.size()); ++i)
      for (int k = 0; k < 3; ++k) m.skeleton_offsets(i, k) = so[i][k].get<double>();
  }
  for (const auto& frame : doc.at("frames")) {
    if (static_cast<int>(frame.size()) != nh) throw ModelError("motion frame joint count mismatch");
    Eigen::MatrixX3d p(nh, 3);
    for (int i = 0; i < nh; ++i)
      for (int k = 0; k < 3; ++k) p(i, k) = frame[i][k].get<double>();
    m.positions.push_back(p);
  }
  m.validate();
  return m;
}

HumanMotion load_motion_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open motion file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_motion(ss.str());
}

std::string motion_to_document(const HumanMotion& motion) {
  json doc;
  doc["motion_schema"] = 1;
  doc["frame_rate"] = motion.frame_rate;
  doc["height"] = motion.height;
  doc["joint_names"] = motion.joint_names;
  json frames = json::array();
  for (const auto& p : motion.positions) {
    json frame = json::array();
    for (int i = 0; i < p.rows(); ++i) frame.push_back({p(i, 0), p(i, 1), p(i, 2)});
    frames.push_back(frame);
  }
  doc["frames"] = frames;
  json so = json::array();
  for (int i = 0; i < motion.skeleton_offsets.rows(); ++i)
    so.push_back({motion.skeleton_offsets(i, 0), motion.skeleton_offsets(i, 1),
                  motion.skeleton_offsets(i, 2)});
  doc["skeleton_offsets"] = so;
  return doc.dump(1);
}

bool ContactSchedule::foot_contact(int foot, double time) const {
  if (contact.empty()) return false;
  const int frame =
      std::clamp(static_cast<int>(std::lround(time * frame_rate)), 0, frames() - 1);
  return contact[frame][foot];
}

void ContactSchedule::rebuild_phases() {
  for (int f = 0; f < 2; ++f) {
    phases[f].clear();
    if (contact.empty()) continue;
    ContactPhase cur{contact[0][f], 0.0, 0.0};
    for (int t = 1; t < frames(); ++t) {
      if (contact[t][f] != cur.stance) {
        cur.end = t / frame_rate;
        phases[f].push_back(cur);
        cur = ContactPhase{contact[t][f], cur.end, 0.0};
      }
    }
    cur.end = frames() / frame_rate;
    phases[f].push_back(cur);
  }
}

namespace {

Eigen::VectorXd interpolate(const std::vector<Eigen::VectorXd>& samples, double frame_rate,
                            double time) {
  const int n = static_cast<int>(samples.size());
  const double s = std::clamp(time * frame_rate, 0.0, static_cast<double>(n - 1));
  const int lo = std::min(static_cast<int>(s), n - 2 < 0 ? 0 : n - 2);
  const int hi = std::min(lo + 1, n - 1);
  const double a = s - lo;
  return (1.0 - a) * samples[lo] + a * samples[hi];
}

}  // namespace

Eigen::VectorXd ReferenceTrajectory::state_at(double time) const {
  return interpolate(states, frame_rate, time);
}

Eigen::VectorXd ReferenceTrajectory::input_at(double time) const {
  return interpolate(inputs, frame_rate, time);
}

std::string reference_to_document(const ReferenceTrajectory& ref) {
  json doc;
  doc["reference_schema"] = 1;
  doc["frame_rate"] = ref.frame_rate;
  doc["converged"] = ref.converged;
  doc["contact_warning"] = ref.contact_warning;
  auto dump_vecs = [](const std::vector<Eigen::VectorXd>& vs) {
    json arr = json::array();
    for (const auto& v : vs) {
      json row = json::array();
      for (int i = 0; i < v.size(); ++i) row.push_back(v[i]);
      arr.push_back(row);
    }
    return arr;
  };
  doc["states"] = dump_vecs(ref.states);
  doc["inputs"] = dump_vecs(ref.inputs);
  json contacts = json::array();
  for (const auto& c : ref.contacts.contact) contacts.push_back({c[0], c[1]});
  doc["contacts"] = contacts;
  return doc.dump(1);
}

ReferenceTrajectory load_reference(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const std::exception& e) {
    throw ModelError(std::string("reference parse failure: ") + e.what());
  }
  ReferenceTrajectory ref;
  ref.frame_rate = doc.at("frame_rate").get<double>();
  ref.converged = doc.value("converged", true);
  ref.contact_warning = doc.value("contact_warning", false);
  auto read_vecs = [](const json& arr, std::vector<Eigen::VectorXd>& out) {
    for (const auto& row : arr) {
      Eigen::VectorXd v(row.size());
      for (size_t i = 0; i < row.size(); ++i) v[i] = row[i].get<double>();
      out.push_back(v);
    }
  };
  read_vecs(doc.at("states"), ref.states);
  read_vecs(doc.at("inputs"), ref.inputs);
  for (const auto& c : doc.at("contacts"))
    ref.contacts.contact.push_back({c[0].get<bool>(), c[1].get<bool>()});
  ref.contacts.frame_rate = ref.frame_rate;
  ref.contacts.rebuild_phases();
  return ref;
}

ReferenceTrajectory load_reference_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open reference file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_reference(ss.str());
}

}  // namespace mimic::retarget
