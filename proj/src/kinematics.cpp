#include "hoi/kinematics.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <Eigen/Cholesky>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hoi {

namespace pt = boost::property_tree;

int KinematicChain::dof() const {
  int n = 0;
  for (const auto& j : joints) n += j.type != JointType::fixed;
  return n;
}

Eigen::VectorXd KinematicChain::lower() const {
  Eigen::VectorXd v(dof());
  int i = 0;
  for (const auto& j : joints) {
    if (j.type != JointType::fixed) v[i++] = j.lower;
  }
  return v;
}

Eigen::VectorXd KinematicChain::upper() const {
  Eigen::VectorXd v(dof());
  int i = 0;
  for (const auto& j : joints) {
    if (j.type != JointType::fixed) v[i++] = j.upper;
  }
  return v;
}

std::vector<JointType> KinematicChain::movable_types() const {
  std::vector<JointType> t;
  for (const auto& j : joints) {
    if (j.type != JointType::fixed) t.push_back(j.type);
  }
  return t;
}

bool KinematicChain::within_limits(const Eigen::VectorXd& q, double tol) const {
  if (q.size() != dof()) return false;
  return (q.array() >= lower().array() - tol).all() && (q.array() <= upper().array() + tol).all();
}

Eigen::VectorXd KinematicChain::clamp(const Eigen::VectorXd& q) const {
  return q.cwiseMax(lower()).cwiseMin(upper());
}

namespace {

Vec3d parse_vec3(const std::string& s, const std::string& what) {
  std::istringstream in(s);
  Vec3d v;
  if (!(in >> v.x() >> v.y() >> v.z())) throw Error("cannot parse " + what + " '" + s + "'");
  return v;
}

struct RawJoint {
  Joint joint;
  std::string parent, child;
};

}  // namespace

KinematicChain parse_chain(const std::string& document, const ParseOptions& opts) {
  pt::ptree tree;
  std::istringstream in(document);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error("malformed chain XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto robot = tree.get_child_optional("robot");
  if (!robot) throw Error("chain document has no <robot> element");

  KinematicChain chain;
  std::set<std::string> warned;
  auto warn = [&](const std::string& element) {
    if (warned.insert(element).second) chain.warnings.push_back("ignored element <" + element + ">");
  };

  std::set<std::string> links;
  std::vector<RawJoint> raw;
  for (const auto& [tag, node] : *robot) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag == "link") {
      links.insert(node.get<std::string>("<xmlattr>.name"));
      for (const auto& [sub, _] : node) {
        if (sub != "<xmlattr>" && sub != "<xmlcomment>") warn("link/" + sub);
      }
      continue;
    }
    if (tag != "joint") {
      warn(tag);
      continue;
    }
    RawJoint r;
    r.joint.name = node.get<std::string>("<xmlattr>.name", "");
    const std::string type = node.get<std::string>("<xmlattr>.type", "");
    if (type == "revolute") {
      r.joint.type = JointType::revolute;
    } else if (type == "prismatic") {
      r.joint.type = JointType::prismatic;
    } else if (type == "fixed") {
      r.joint.type = JointType::fixed;
    } else {
      throw Error("joint '" + r.joint.name + "' has unsupported type '" + type + "'");
    }
    bool has_limit = false;
    for (const auto& [sub, child] : node) {
      if (sub == "<xmlattr>" || sub == "<xmlcomment>") continue;
      if (sub == "parent") {
        r.parent = child.get<std::string>("<xmlattr>.link");
      } else if (sub == "child") {
        r.child = child.get<std::string>("<xmlattr>.link");
      } else if (sub == "origin") {
        const Vec3d xyz = parse_vec3(child.get<std::string>("<xmlattr>.xyz", "0 0 0"), "origin xyz");
        const Vec3d rpy = parse_vec3(child.get<std::string>("<xmlattr>.rpy", "0 0 0"), "origin rpy");
        r.joint.origin = Posed(Rot3d::from_rpy(rpy.x(), rpy.y(), rpy.z()), xyz);
      } else if (sub == "axis") {
        r.joint.axis = parse_vec3(child.get<std::string>("<xmlattr>.xyz"), "axis");
      } else if (sub == "limit") {
        has_limit = child.get_optional<double>("<xmlattr>.lower") &&
                    child.get_optional<double>("<xmlattr>.upper");
        r.joint.lower = child.get<double>("<xmlattr>.lower", 0.0);
        r.joint.upper = child.get<double>("<xmlattr>.upper", 0.0);
      } else {
        warn("joint/" + sub);
      }
    }
    if (r.parent.empty() || r.child.empty()) {
      throw Error("joint '" + r.joint.name + "' needs parent and child links");
    }
    if (r.joint.type != JointType::fixed) {
      if (!has_limit) throw Error("movable joint '" + r.joint.name + "' is missing limits");
      if (r.joint.lower > r.joint.upper) {
        throw Error("joint '" + r.joint.name + "' has lower limit above upper limit");
      }
      if (r.joint.axis.norm() < 1e-12) throw Error("joint '" + r.joint.name + "' has a zero axis");
    }
    r.joint.axis.normalize();
    raw.push_back(std::move(r));
  }

  std::map<std::string, std::size_t> by_child;
  std::set<std::string> parents;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!by_child.emplace(raw[i].child, i).second) {
      throw Error("link '" + raw[i].child + "' has more than one parent joint (branching chain)");
    }
    parents.insert(raw[i].parent);
    links.insert(raw[i].parent);
    links.insert(raw[i].child);
  }

  std::string root = opts.root, ee = opts.ee;
  if (root.empty()) {
    for (const auto& l : links) {
      if (!by_child.count(l)) {
        if (!root.empty()) throw Error("multiple root links; set the root explicitly");
        root = l;
      }
    }
  }
  if (ee.empty()) {
    for (const auto& l : links) {
      if (!parents.count(l)) {
        if (!ee.empty()) throw Error("multiple leaf links; set the end-effector explicitly");
        ee = l;
      }
    }
  }
  if (!links.count(root)) throw Error("root link '" + root + "' not found");
  if (!links.count(ee)) throw Error("end-effector link '" + ee + "' not found");

  std::vector<const RawJoint*> path;
  for (std::string link = ee; link != root;) {
    auto it = by_child.find(link);
    if (it == by_child.end()) throw Error("end-effector is not connected to root '" + root + "'");
    path.push_back(&raw[it->second]);
    link = raw[it->second].parent;
    if (path.size() > raw.size()) throw Error("cycle in joint graph");
  }
  std::reverse(path.begin(), path.end());

  Posed pending;
  for (const RawJoint* r : path) {
    if (!opts.fold_fixed) {
      chain.joints.push_back(r->joint);
      continue;
    }
    if (r->joint.type == JointType::fixed) {
      pending = pending * r->joint.origin;
      continue;
    }
    Joint j = r->joint;
    j.origin = pending * j.origin;
    pending = Posed();
    chain.joints.push_back(std::move(j));
  }
  chain.ee_offset = pending;
  return chain;
}

KinematicChain load_chain(const std::string& path, const ParseOptions& opts) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open chain file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_chain(ss.str(), opts);
}

namespace {

Posed joint_motion(const Joint& j, double q) {
  switch (j.type) {
    case JointType::revolute:
      return Posed::rotation(Rot3d::exp(j.axis * q));
    case JointType::prismatic:
      return Posed::translation(j.axis * q);
    case JointType::fixed:
      break;
  }
  return Posed();
}

// Base-frame pose of every movable joint frame (before its motion) and the EE.
Posed walk(const KinematicChain& chain, const JointConfig& q, std::vector<Posed>* frames) {
  if (q.size() != chain.dof()) throw Error("joint configuration has the wrong length");
  Posed t;
  int i = 0;
  for (const auto& j : chain.joints) {
    t = t * j.origin;
    if (j.type == JointType::fixed) continue;
    if (frames) frames->push_back(t);
    t = t * joint_motion(j, q[i++]);
  }
  return t * chain.ee_offset;
}

}  // namespace

Posed fk(const KinematicChain& chain, const JointConfig& q) {
  if (!chain.within_limits(q)) throw Error("joint configuration outside limits");
  return walk(chain, q, nullptr);
}

Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const KinematicChain& chain,
                                                 const JointConfig& q) {
  std::vector<Posed> frames;
  const Posed ee = walk(chain, q, &frames);
  const auto types = chain.movable_types();
  std::vector<const Joint*> movable;
  for (const auto& j : chain.joints) {
    if (j.type != JointType::fixed) movable.push_back(&j);
  }
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    const Vec3d axis = frames[i].rot * movable[i]->axis;
    if (types[i] == JointType::revolute) {
      jac.col(i) << axis.cross(ee.trans - frames[i].trans), axis;
    } else {
      jac.col(i) << axis, Vec3d::Zero();
    }
  }
  return jac;
}

namespace {

double point_segment_distance(const Vec3d& p, const Vec3d& a, const Vec3d& b) {
  const Vec3d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + s * ab - p).norm();
}

}  // namespace

double SelfCollisionModel::max_penetration(const KinematicChain& chain, const JointConfig& q) const {
  if (pairs.empty()) return -INFINITY;
  std::vector<Posed> frames;
  walk(chain, q, &frames);
  // Frame after joint i's motion.
  std::vector<Posed> after;
  after.reserve(frames.size());
  int i = 0;
  for (const auto& j : chain.joints) {
    if (j.type == JointType::fixed) continue;
    after.push_back(frames[static_cast<std::size_t>(i)] * joint_motion(j, q[i]));
    ++i;
  }
  auto frame = [&](int link) { return link < 0 ? Posed() : after.at(static_cast<std::size_t>(link)); };
  double worst = -INFINITY;
  for (const auto& [s, c] : pairs) {
    const Vec3d center = frame(s.link) * s.center;
    const Posed fc = frame(c.link);
    const double d = point_segment_distance(center, fc * c.a, fc * c.b);
    worst = std::max(worst, s.radius + c.radius - d);
  }
  return worst;
}

namespace {
constexpr double kDampingFadeError = 1e-2;  // weighted residual below which damping shrinks
}  // namespace

IkResult ik_solve(const KinematicChain& chain, const Posed& target, const JointConfig& seed,
                  const IkOptions& opts) {
  if (!chain.within_limits(seed)) throw Error("IK seed outside joint limits");
  const double w = opts.rotation_weight;
  const bool use_rot = w > 0;
  const Eigen::VectorXd lo = chain.lower(), hi = chain.upper();

  auto evaluate = [&](const JointConfig& q, Eigen::Matrix<double, 6, 1>& err, IkResult& r) {
    const Posed cur = walk(chain, q, nullptr);
    const Vec3d ep = target.trans - cur.trans;
    const Vec3d er = (target.rot * cur.rot.inverse()).log();
    err << ep, w * er;
    r.q = q;
    r.pos_err = ep.norm();
    r.rot_err = er.norm();
    r.saturated = static_cast<int>(((q.array() <= lo.array()) || (q.array() >= hi.array())).count());
    r.converged = r.pos_err <= opts.pos_tol && (!use_rot || r.rot_err <= opts.rot_tol);
  };
  auto cost = [&](const IkResult& r) { return r.pos_err + (use_rot ? w * r.rot_err : 0.0); };

  JointConfig q = seed;
  Eigen::Matrix<double, 6, 1> err;
  IkResult cur;
  evaluate(q, err, cur);
  IkResult best = cur;

  const double lambda2 = opts.damping * opts.damping;
  for (int it = 0; it < opts.max_iterations && !cur.converged; ++it) {
    Eigen::Matrix<double, 6, Eigen::Dynamic> jac = jacobian(chain, q);
    jac.bottomRows<3>() *= w;
    // Damping fades with the residual so the final approach is Gauss-Newton.
    const double fade = std::min(1.0, err.norm() / kDampingFadeError);
    const Eigen::Matrix<double, 6, 6> jjt =
        jac * jac.transpose() + lambda2 * fade * Eigen::Matrix<double, 6, 6>::Identity();
    Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);
    const double peak = dq.cwiseAbs().maxCoeff();
    if (peak > opts.max_update) dq *= opts.max_update / peak;
    q = (q + dq).cwiseMax(lo).cwiseMin(hi);
    evaluate(q, err, cur);
    cur.iterations = it + 1;
    if (cur.converged || cost(cur) < cost(best)) best = cur;
  }
  best.iterations = cur.iterations;

  if (!best.converged) {
    throw IkFailure("IK did not converge (position residual " + std::to_string(best.pos_err) +
                        " m, rotation residual " + std::to_string(best.rot_err) + " rad)",
                    best);
  }
  if (opts.self_collision.max_penetration(chain, best.q) > 0) {
    throw IkFailure("IK solution is in self-collision", best);
  }
  return best;
}

ReplayResult replay_trajectory(const KinematicChain& chain, std::span<const Posed> targets,
                               const JointConfig& q0, const IkOptions& opts) {
  if (!chain.within_limits(q0)) throw Error("replay start configuration outside joint limits");
  const auto types = chain.movable_types();
  ReplayResult out;
  ReplayReport& rep = out.report;
  rep.feasible = true;

  JointConfig seed = q0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    ReplayFrame f;
    IkResult r;
    try {
      r = ik_solve(chain, targets[t], seed, opts);
    } catch (const IkFailure& e) {
      if (t == 0) throw;
      f.pos_err = e.best().pos_err;
      f.rot_err = e.best().rot_err;
      f.iterations = e.best().iterations;
      rep.frames.push_back(f);
      rep.feasible = false;
      rep.failed_frame = static_cast<int>(t);
      rep.failure = e.what();
      return out;
    }
    f.pos_err = r.pos_err;
    f.rot_err = r.rot_err;
    f.iterations = r.iterations;
    f.saturated = r.saturated;
    f.converged = true;
    if (t > 0) {
      for (int i = 0; i < chain.dof(); ++i) {
        const double step = std::abs(r.q[i] - seed[i]);
        const double cap =
            types[static_cast<std::size_t>(i)] == JointType::prismatic ? opts.rate_cap_prismatic
                                                                      : opts.rate_cap_revolute;
        f.max_step = std::max(f.max_step, step);
        f.max_step_ratio = std::max(f.max_step_ratio, step / cap);
      }
      if (f.max_step_ratio > 1) {
        rep.feasible = false;
        if (!rep.first_rate_violation) rep.first_rate_violation = static_cast<int>(t);
      }
    }
    rep.max_joint_step = std::max(rep.max_joint_step, f.max_step);
    rep.frames.push_back(f);
    out.joints.push_back(r.q);
    seed = r.q;
  }
  if (rep.first_rate_violation && rep.failure.empty()) {
    rep.failure = "joint rate cap exceeded at frame " + std::to_string(*rep.first_rate_violation);
  }
  return out;
}

}  // namespace hoi
