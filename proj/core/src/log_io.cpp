#include "mmt/error.hpp"
#include "mmt/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mmt::io {

namespace {

using Json = nlohmann::ordered_json;
using geom::Vec2;

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json times_json(const sim::StageTimes& t) {
    return {{"dvb", t.dvb}, {"payload", t.roll}, {"robots", t.robots}, {"total", t.total()}};
}

struct View {
    double x0, y0, scale;  // world min corner (with margin) and px per metre
    double height;
    [[nodiscard]] double px(double x) const { return (x - x0) * scale; }
    [[nodiscard]] double py(double y) const { return height - (y - y0) * scale; }
};

std::string point(const View& v, const Vec2& p) { return format_double(v.px(p.x())) + "," + format_double(v.py(p.y())); }

std::string polygon(const View& v, const geom::OrientedRect& r, const char* style) {
    std::string pts;
    for (const auto& c : r.corners()) pts += point(v, c) + " ";
    return "<polygon points=\"" + pts + "\" " + style + "/>\n";
}

std::string polyline(const View& v, const std::vector<Vec2>& pts, const char* style) {
    if (pts.size() < 2) return {};
    std::string s = "<polyline fill=\"none\" " + std::string(style) + " points=\"";
    for (const auto& p : pts) s += point(v, p) + " ";
    return s + "\"/>\n";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

std::vector<std::string> csv_columns(const sim::SimLog& log) {
    std::vector<std::string> c{"tick", "t", "box_x", "box_y", "box_yaw", "box_w", "box_r", "phi", "omega"};
    for (std::size_t k = 0; k < log.K; ++k) {
        const std::string p = "r" + std::to_string(k) + "_";
        for (const char* n : {"x", "y", "ux", "uy", "fx", "fy"}) c.push_back(p + n);
        for (int j = 1; j <= 6; ++j) c.push_back(p + "theta" + std::to_string(j));
    }
    for (std::size_t i = 0; i < log.obstacle_count; ++i) {
        c.push_back("obs" + std::to_string(i) + "_x");
        c.push_back("obs" + std::to_string(i) + "_y");
    }
    for (const char* n : {"target_x", "target_y", "clearance_min", "fields_active", "dvb_status", "roll_status",
                          "robot_status", "violations"})
        c.emplace_back(n);
    return c;
}

void write_csv(std::ostream& os, const sim::SimLog& log) {
    const auto cols = csv_columns(log);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : log.records) {
        std::string line = std::to_string(r.tick);
        auto num = [&line](double v) {
            line += ',';
            line += format_double(v);
        };
        num(r.t);
        num(r.box.center.x());
        num(r.box.center.y());
        num(r.box.yaw);
        num(r.box.width);
        num(r.box.r);
        num(r.phi);
        num(r.omega);
        for (std::size_t k = 0; k < log.K; ++k) {
            num(r.bases[k].x());
            num(r.bases[k].y());
            num(r.u[k].x());
            num(r.u[k].y());
            num(r.f[k].x());
            num(r.f[k].y());
            for (double a : r.joints[k].theta) num(a);
        }
        for (const auto& o : r.obstacles) {
            num(o.x());
            num(o.y());
        }
        num(r.target.x());
        num(r.target.y());
        num(r.clearance_min);
        line += r.fields_active ? ",1" : ",0";
        line += "," + r.dvb_status + "," + r.roll_status + "," + r.robot_status;
        line += "," + std::to_string(r.violations.size());
        os << line << '\n';
    }
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw Error("csv: no column named " + name);
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& cell = rows.at(row).at(column(name));
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw Error("csv: cell '" + cell + "' in column " + name + " is not a number");
    return v;
}

CsvTable read_csv(std::istream& is) {
    CsvTable t;
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    std::string line;
    if (!std::getline(is, line)) throw Error("csv: empty input");
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split(line));
        if (t.rows.back().size() != t.header.size())
            throw Error("csv: row " + std::to_string(t.rows.size()) + " has " + std::to_string(t.rows.back().size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    return t;
}

std::string summary_json(const sim::SimLog& log) {
    const auto& s = log.summary;
    Json kinds = Json::object();
    for (const auto& [k, n] : s.violations_by_kind) kinds[k] = n;
    Json j = {
        {"scenario", log.scenario},
        {"seed", log.seed},
        {"dt", log.dt},
        {"robots", log.K},
        {"obstacles", log.obstacle_count},
        {"ticks", s.ticks},
        {"min_clearance", finite_or_null(s.min_clearance)},
        {"min_clearance_ratio", finite_or_null(s.min_clearance_ratio)},
        {"min_base_separation", finite_or_null(s.min_base_separation)},
        {"min_containment", finite_or_null(s.min_containment)},
        {"max_joint_rate", s.max_joint_rate},
        {"r_min_observed", finite_or_null(s.r_lo)},
        {"r_max_observed", finite_or_null(s.r_hi)},
        {"dvb_fallbacks", s.dvb_fallbacks},
        {"roll_infeasible", s.roll_infeasible},
        {"robot_soft", s.robot_soft},
        {"robot_failed", s.robot_failed},
        {"violations", s.violations},
        {"violations_by_kind", kinds},
        {"mean_times", times_json(s.mean_times)},
        {"p95_times", times_json(s.p95_times)},
        {"mean_total_time", s.mean_total_time},
    };
    return j.dump(2) + "\n";
}

void write_svg(std::ostream& os, const sim::SimLog& log, const sim::Scenario& s, std::size_t horizon_every) {
    // Fit the view to what actually moved, not the whole arena.
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    auto grow = [&](const Vec2& p, double pad) {
        lo = lo.cwiseMin(p - Vec2::Constant(pad));
        hi = hi.cwiseMax(p + Vec2::Constant(pad));
    };
    for (const auto& r : log.records) {
        grow(r.box.center, r.box.r);
        grow(r.target, 0.5);
        for (const auto& o : r.obstacles) grow(o, 0.5);
    }
    if (log.records.empty()) {
        lo = s.arena_min;
        hi = s.arena_max;
    }
    constexpr double kWidthPx = 1000.0;
    const double margin = 1.0;
    const double scale = kWidthPx / std::max(hi.x() - lo.x() + 2 * margin, 1e-9);
    const View v{lo.x() - margin, lo.y() - margin, scale, (hi.y() - lo.y() + 2 * margin) * scale};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(kWidthPx) << "\" height=\""
       << format_double(v.height) << "\" viewBox=\"0 0 " << format_double(kWidthPx) << " " << format_double(v.height)
       << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t i = 0; i < log.records.size(); i += std::max<std::size_t>(horizon_every, 1)) {
        const auto& r = log.records[i];
        for (std::size_t n = 1; n < r.horizon.size(); ++n)
            os << polygon(v, r.horizon[n].rect(), "fill=\"none\" stroke=\"#9ecae1\" stroke-width=\"0.5\"");
        os << polygon(v, r.box.rect(), "fill=\"#3182bd\" fill-opacity=\"0.08\" stroke=\"#08519c\" stroke-width=\"1\"");
    }

    std::vector<Vec2> box_path, target_path;
    std::vector<std::vector<Vec2>> bases(log.K), obstacles(log.obstacle_count);
    for (const auto& r : log.records) {
        box_path.push_back(r.box.center);
        target_path.push_back(r.target);
        for (std::size_t k = 0; k < r.bases.size() && k < log.K; ++k) bases[k].push_back(r.bases[k]);
        for (std::size_t i = 0; i < r.obstacles.size() && i < obstacles.size(); ++i) obstacles[i].push_back(r.obstacles[i]);
    }
    for (const auto& b : bases) os << polyline(v, b, "stroke=\"#636363\" stroke-width=\"0.6\"");
    for (const auto& o : obstacles) os << polyline(v, o, "stroke=\"#de2d26\" stroke-width=\"0.8\" stroke-dasharray=\"3,2\"");
    os << polyline(v, target_path, "stroke=\"#31a354\" stroke-width=\"1.2\" stroke-dasharray=\"6,3\"");
    os << polyline(v, box_path, "stroke=\"#08519c\" stroke-width=\"1.5\"");

    for (const auto& o : s.static_obstacles)
        os << "<circle cx=\"" << format_double(v.px(o.position.x())) << "\" cy=\"" << format_double(v.py(o.position.y()))
           << "\" r=\"" << format_double(std::max(o.radius * scale, 2.0)) << "\" fill=\"#252525\"/>\n";
    if (!log.records.empty()) {
        const auto& last = log.records.back();
        for (std::size_t i = s.static_obstacles.size(); i < last.obstacles.size(); ++i) {
            const double rad = s.dynamic_obstacles[i - s.static_obstacles.size()].radius;
            os << "<circle cx=\"" << format_double(v.px(last.obstacles[i].x())) << "\" cy=\""
               << format_double(v.py(last.obstacles[i].y())) << "\" r=\"" << format_double(std::max(rad * scale, 2.0))
               << "\" fill=\"#de2d26\"/>\n";
        }
    }
    os << "</svg>\n";
}

std::vector<std::filesystem::path> emit(const sim::SimLog& log, const sim::Scenario& s,
                                        const std::filesystem::path& dir, const EmitOptions& opts) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto write = [&](const char* name, auto&& body) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(path.string() + ": cannot open for writing");
        body(out);
        out.flush();
        if (!out) throw Error(path.string() + ": write failed");
        written.push_back(path);
    };
    if (opts.csv) write("log.csv", [&](std::ostream& o) { write_csv(o, log); });
    if (opts.json) write("summary.json", [&](std::ostream& o) { o << summary_json(log); });
    if (opts.svg) write("run.svg", [&](std::ostream& o) { write_svg(o, log, s); });
    return written;
}

}  // namespace mmt::io
