#include "mmt/error.hpp"
#include "mmt/io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mmt::io {

namespace {

using Json = nlohmann::ordered_json;
using geom::Vec2;

// One visitor walks the scenario for both directions, so reader and writer
// cannot drift apart. Reader collects every problem instead of stopping.
class Reader {
  public:
    Reader(const Json* j, std::string path, std::vector<std::string>& errs) : j_(j), path_(std::move(path)), errs_(errs) {
        if (j_ != nullptr && !j_->is_object()) {
            fail("expected an object");
            j_ = nullptr;
        }
    }
    ~Reader() {
        if (j_ == nullptr) return;
        for (const auto& [k, _] : j_->items())
            if (used_.count(k) == 0) errs_.push_back(path_ + "/" + k + ": unknown key");
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    template <class T>
    void operator()(const char* key, T& out) {
        const Json* v = find(key);
        if (v != nullptr) read(*v, out, path_ + "/" + key);
    }

    template <class Fn>
    void section(const char* key, Fn&& fn) {
        Reader sub(find(key), path_ + "/" + key, errs_);
        fn(sub);
    }

    template <class T, class Fn>
    void list(const char* key, std::vector<T>& out, Fn&& fn) {
        const Json* v = find(key);
        if (v == nullptr) return;
        const std::string p = path_ + "/" + key;
        if (!v->is_array()) {
            errs_.push_back(p + ": expected an array");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            out.emplace_back();
            Reader sub(&(*v)[i], p + "/" + std::to_string(i), errs_);
            fn(sub, out.back());
        }
    }

  private:
    const Json* find(const char* key) {
        if (j_ == nullptr) return nullptr;
        used_.insert(key);
        auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }
    void fail(const std::string& what) { errs_.push_back(path_ + ": " + what); }

    void read(const Json& v, double& out, const std::string& p) {
        if (v.is_number()) out = v.get<double>();
        else errs_.push_back(p + ": expected a number");
    }
    void read(const Json& v, bool& out, const std::string& p) {
        if (v.is_boolean()) out = v.get<bool>();
        else errs_.push_back(p + ": expected true or false");
    }
    void read(const Json& v, std::string& out, const std::string& p) {
        if (v.is_string()) out = v.get<std::string>();
        else errs_.push_back(p + ": expected a string");
    }
    template <class U>
        requires std::is_unsigned_v<U>
    void read(const Json& v, U& out, const std::string& p) {
        if (v.is_number_unsigned()) out = v.get<U>();
        else errs_.push_back(p + ": expected a non-negative integer");
    }
    void read(const Json& v, int& out, const std::string& p) {
        if (v.is_number_integer()) out = v.get<int>();
        else errs_.push_back(p + ": expected an integer");
    }
    void read(const Json& v, Vec2& out, const std::string& p) {
        if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) out = {v[0].get<double>(), v[1].get<double>()};
        else errs_.push_back(p + ": expected [x, y]");
    }
    void read(const Json& v, std::vector<Vec2>& out, const std::string& p) {
        if (!v.is_array()) {
            errs_.push_back(p + ": expected an array of [x, y]");
            return;
        }
        out.assign(v.size(), Vec2::Zero());
        for (std::size_t i = 0; i < v.size(); ++i) read(v[i], out[i], p + "/" + std::to_string(i));
    }
    void read(const Json& v, dvb::GoalSide& out, const std::string& p) {
        if (v == "beyond_target") out = dvb::GoalSide::beyond_target;
        else if (v == "toward_box") out = dvb::GoalSide::toward_box;
        else errs_.push_back(p + ": expected \"beyond_target\" or \"toward_box\"");
    }

    const Json* j_;
    std::string path_;
    std::vector<std::string>& errs_;
    std::set<std::string> used_;
};

class Writer {
  public:
    explicit Writer(Json& j) : j_(j) { j_ = Json::object(); }

    template <class T>
    void operator()(const char* key, T& v) {
        j_[key] = encode(v);
    }
    template <class Fn>
    void section(const char* key, Fn&& fn) {
        Json sub;
        Writer w(sub);
        fn(w);
        j_[key] = std::move(sub);
    }
    template <class T, class Fn>
    void list(const char* key, std::vector<T>& items, Fn&& fn) {
        Json arr = Json::array();
        for (auto& it : items) {
            Json sub;
            Writer w(sub);
            fn(w, it);
            arr.push_back(std::move(sub));
        }
        j_[key] = std::move(arr);
    }

  private:
    static Json encode(const Vec2& v) { return Json::array({v.x(), v.y()}); }
    static Json encode(const std::vector<Vec2>& v) {
        Json a = Json::array();
        for (const auto& p : v) a.push_back(encode(p));
        return a;
    }
    static Json encode(dvb::GoalSide g) { return g == dvb::GoalSide::toward_box ? "toward_box" : "beyond_target"; }
    template <class T>
    static Json encode(const T& v) {
        return v;
    }
    Json& j_;
};

template <class V>
void visit_qp(V& v, qp::QpSettings& q) {
    v("rho", q.rho);
    v("sigma", q.sigma);
    v("alpha", q.alpha);
    v("eps_abs", q.eps_abs);
    v("eps_rel", q.eps_rel);
    v("eps_prim_inf", q.eps_prim_inf);
    v("eps_dual_inf", q.eps_dual_inf);
    v("max_iter", q.max_iter);
    v("warm_start", q.warm_start);
    v("scaling", q.scaling);
    v("scaling_iter", q.scaling_iter);
    v("adaptive_rho", q.adaptive_rho);
    v("adaptive_rho_interval", q.adaptive_rho_interval);
    v("polish", q.polish);
}

template <class V>
void visit_script(V& v, sim::MotionScript& m) {
    v("waypoints", m.waypoints);
    v("speed", m.speed);
    v("loop", m.loop);
    v("heading_noise", m.heading_noise);
}

// Shape parameters of the payload live outside the model while visiting.
struct PayloadShape {
    double length, width, thickness, height;
};

template <class V>
void visit_scenario(V& v, sim::Scenario& s, PayloadShape& shape) {
    v("name", s.name);
    v.section("arena", [&](V& a) {
        a("min", s.arena_min);
        a("max", s.arena_max);
    });
    v.section("payload", [&](V& p) {
        p("length", shape.length);
        p("width", shape.width);
        p("thickness", shape.thickness);
        p("height", shape.height);
        p("grasp_inset", s.grasp_inset);
    });
    v.section("robots", [&](V& r) {
        r("count", s.K);
        r("radius", s.formation.robot_radius);
        r.section("arm", [&](V& a) {
            a("l2", s.arm.l2);
            a("l3", s.arm.l3);
            a("mount_height", s.arm.base_mount_height);
            a("base_yaw", s.arm.base_yaw);
        });
    });
    v.section("planners", [&](V& p) {
        p.section("dvb", [&](V& d) {
            d("H", s.dvb.H);
            d("omega_u", s.dvb.omega_u);
            d("omega_x", s.dvb.omega_x);
            d("u_min", s.dvb.u_min);
            d("u_max", s.dvb.u_max);
            d("d_des", s.dvb.d_des);
            d("goal_side", s.dvb.goal_side);
            d("pos_gain", s.dvb.pos_gain);
            d("yaw_gain", s.dvb.yaw_gain);
            d("yaw_rate_max", s.dvb.yaw_rate_max);
            d("max_speed", s.dvb.max_speed);
        });
        p.section("payload", [&](V& r) {
            r("H_p", s.roll.H_p);
            r("w1", s.roll.w1);
            r("w2", s.roll.w2);
            r("phi_min", s.roll.phi_min);
            r("phi_max", s.roll.phi_max);
            r("omega_min", s.roll.omega_min);
            r("omega_max", s.roll.omega_max);
            r("sqp_max_iter", s.roll.sqp_max_iter);
            r("sqp_tol", s.roll.sqp_tol);
            r("trust_region", s.roll.trust_region);
            r("penalty", s.roll.penalty);
        });
        p.section("robots", [&](V& f) {
            f("H_r", s.formation.H_r);
            f("omega_a", s.formation.omega_a);
            f("omega_x", s.formation.omega_x);
            f("u_min", s.formation.u_min);
            f("u_max", s.formation.u_max);
            f("elbow_influence", s.formation.elbow_influence);
            f("reach_inner_frac", s.formation.reach_inner_frac);
            f("reach_outer_frac", s.formation.reach_outer_frac);
            f("soft_weight", s.formation.soft_weight);
            f("parallel", s.formation.parallel);
        });
        p.section("qp", [&](V& q) { visit_qp(q, s.dvb.qp); });
    });
    v.section("fields", [&](V& f) {
        auto& c = s.fields;
        f("F_max", c.F_max);
        f("delta", c.delta);
        f("kappa", c.kappa);
        f("k_s", c.k_s);
        f("k_e", c.k_e);
        f("r_min", c.r_min);
        f("r_max", c.r_max);
        f("width_min", c.width_min);
        f("F_max_e", c.F_max_e);
        f("expansion_floor", c.expansion_floor);
        f("angle_d_min", c.angle_d_min);
        f("angle_d_max", c.angle_d_max);
        f("target_radius", c.target_radius);
    });
    v.section("obstacles", [&](V& o) {
        o.list("static", s.static_obstacles, [](V& e, fields::ObstacleState& ob) {
            e("id", ob.id);
            e("position", ob.position);
            e("radius", ob.radius);
        });
        o.list("dynamic", s.dynamic_obstacles, [](V& e, sim::DynamicObstacleSpec& ob) {
            e("id", ob.id);
            e("start", ob.start);
            e("radius", ob.radius);
            visit_script(e, ob.script);
        });
    });
    v.section("target", [&](V& t) {
        t("start", s.target_start);
        visit_script(t, s.target_script);
    });
    v.section("run", [&](V& r) {
        r("dt", s.dt);
        r("duration", s.duration);
        r("seed", s.seed);
        r("box_start", s.box_start);
        r("box_width", s.box_width);
        r.section("validation", [&](V& c) {
            c("containment_tol", s.validation.containment_tol);
            c("clearance_slack", s.validation.clearance_slack);
            c("joint_rate_max", s.validation.joint_rate_max);
            c("region_tol", s.validation.region_tol);
        });
    });
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col > 1 ? col - 1 : 1};
}

}  // namespace

sim::Scenario parse_scenario(std::string_view text, const std::string& source) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        std::string msg = e.what();
        // Drop the library prefix, keep the reason.
        if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
        throw ScenarioError({source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg});
    }
    if (!doc.is_object()) throw ScenarioError({source + ": top level must be an object"});

    sim::Scenario s;
    PayloadShape shape{s.payload.length, s.payload.width, s.payload.thickness, s.payload.h_P};
    std::vector<std::string> errs;
    {
        Reader root(&doc, "", errs);
        visit_scenario(root, s, shape);
    }
    for (auto& e : errs) e = source + ": " + e;
    if (!errs.empty()) throw ScenarioError(errs);

    // Derived values: one dt and one set of position bounds for every planner.
    s.dvb.dt = s.roll.dt = s.formation.dt = s.dt;
    s.dvb.x_min = s.formation.x_min = s.arena_min;
    s.dvb.x_max = s.formation.x_max = s.arena_max;
    s.formation.qp = s.dvb.qp;
    try {
        s.payload = payload::PayloadModel::cuboid(shape.length, shape.width, shape.thickness, shape.height, s.K,
                                                  s.grasp_inset);
    } catch (const Error& e) {
        errs.push_back(source + ": payload: " + e.what());
    }
    std::set<std::size_t> ids;
    for (const auto& o : s.static_obstacles)
        if (!ids.insert(o.id).second) errs.push_back(source + ": duplicate obstacle id " + std::to_string(o.id));
    for (const auto& o : s.dynamic_obstacles)
        if (!ids.insert(o.id).second) errs.push_back(source + ": duplicate obstacle id " + std::to_string(o.id));
    if (errs.empty())
        for (const auto& p : sim::check_scenario(s)) errs.push_back(source + ": " + p);
    if (!errs.empty()) throw ScenarioError(errs);
    return s;
}

sim::Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError({path.string() + ": cannot open"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

std::string dump_scenario(const sim::Scenario& s) {
    sim::Scenario copy = s;
    PayloadShape shape{s.payload.length, s.payload.width, s.payload.thickness, s.payload.h_P};
    Json doc;
    {
        Writer w(doc);
        visit_scenario(w, copy, shape);
    }
    return doc.dump(2) + "\n";
}

}  // namespace mmt::io
