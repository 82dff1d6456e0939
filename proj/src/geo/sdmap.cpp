#include "smart/geo/sdmap.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace smart::geo {

RoadClass road_class_from_tag(const std::string& v) {
  if (v == "motorway" || v == "motorway_link") return RoadClass::kMotorway;
  if (v == "trunk" || v == "trunk_link") return RoadClass::kTrunk;
  if (v == "primary" || v == "primary_link") return RoadClass::kPrimary;
  if (v == "secondary" || v == "secondary_link") return RoadClass::kSecondary;
  if (v == "tertiary" || v == "tertiary_link") return RoadClass::kTertiary;
  if (v == "residential" || v == "living_street") return RoadClass::kResidential;
  if (v == "service") return RoadClass::kService;
  return RoadClass::kOther;
}

const char* road_class_name(RoadClass rc) {
  static const char* names[] = {"motorway",  "trunk",       "primary",
                                "secondary", "tertiary",    "residential",
                                "service",   "other"};
  return names[int(rc)];
}

std::vector<double> SDPolyline::attributes() const {
  std::vector<double> a(kAttributeDim, 0.0);
  a[int(road_class)] = 1.0;
  a[kNumRoadClasses] = double(std::clamp(lane_count, 0, 8));
  a[kNumRoadClasses + 1] = one_way ? 1.0 : 0.0;
  return a;
}

json SDMap::to_json() const {
  json polys = json::array();
  for (const auto& p : polylines) {
    json pts = json::array();
    for (const auto& pt : p.points) pts.push_back({pt[0], pt[1]});
    polys.push_back({{"points", pts},
                     {"road_class", road_class_name(p.road_class)},
                     {"lane_count", p.lane_count},
                     {"one_way", p.one_way}});
  }
  return json{{"pose", pose.to_json()}, {"extent", extent.to_json()},
              {"polylines", polys}};
}

SDMap SDMap::from_json(const json& j) {
  SDMap m;
  m.pose = GeoPose::from_json(j.at("pose"));
  m.extent = Extent::from_json(j.at("extent"));
  for (const auto& jp : j.at("polylines")) {
    SDPolyline p;
    for (const auto& pt : jp.at("points"))
      p.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
    const std::string cls = jp.at("road_class").get<std::string>();
    p.road_class = RoadClass::kOther;
    for (int i = 0; i < kNumRoadClasses; ++i)
      if (cls == road_class_name(RoadClass(i))) p.road_class = RoadClass(i);
    p.lane_count = jp.at("lane_count").get<int>();
    p.one_way = jp.at("one_way").get<bool>();
    m.polylines.push_back(std::move(p));
  }
  return m;
}

// ---- raw extract parsing ----

namespace {

struct XmlCursor {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }
};

// Parses one element's attributes after the element name; leaves cursor past
// the closing '>' and reports whether the element self-closes.
std::map<std::string, std::string> parse_attrs(XmlCursor& cur, bool& self_closed) {
  std::map<std::string, std::string> attrs;
  const std::string& t = cur.text;
  self_closed = false;
  while (true) {
    cur.skip_ws();
    if (cur.pos >= t.size()) throw ParseError("unexpected end inside element", cur.pos);
    if (t[cur.pos] == '/') {
      ++cur.pos;
      if (cur.pos >= t.size() || t[cur.pos] != '>')
        throw ParseError("expected '>' after '/'", cur.pos);
      ++cur.pos;
      self_closed = true;
      return attrs;
    }
    if (t[cur.pos] == '>') {
      ++cur.pos;
      return attrs;
    }
    std::size_t name_start = cur.pos;
    while (cur.pos < t.size() && (std::isalnum(static_cast<unsigned char>(t[cur.pos])) ||
                                  t[cur.pos] == '_' || t[cur.pos] == ':'))
      ++cur.pos;
    if (cur.pos == name_start) throw ParseError("malformed attribute name", cur.pos);
    std::string key = t.substr(name_start, cur.pos - name_start);
    cur.skip_ws();
    if (cur.pos >= t.size() || t[cur.pos] != '=')
      throw ParseError("expected '=' after attribute " + key, cur.pos);
    ++cur.pos;
    cur.skip_ws();
    if (cur.pos >= t.size() || (t[cur.pos] != '"' && t[cur.pos] != '\''))
      throw ParseError("expected quoted value for attribute " + key, cur.pos);
    const char quote = t[cur.pos++];
    std::size_t val_start = cur.pos;
    while (cur.pos < t.size() && t[cur.pos] != quote) ++cur.pos;
    if (cur.pos >= t.size()) throw ParseError("unterminated attribute value", val_start);
    attrs[key] = t.substr(val_start, cur.pos - val_start);
    ++cur.pos;
  }
}

RoadExtract parse_osm_xml(const std::string& text) {
  RoadExtract out;
  XmlCursor cur{text};
  RoadExtract::Way* open_way = nullptr;
  while (true) {
    const std::size_t lt = text.find('<', cur.pos);
    if (lt == std::string::npos) break;
    cur.pos = lt + 1;
    if (cur.pos < text.size() && text[cur.pos] == '?') {  // declaration
      cur.pos = text.find('>', cur.pos);
      if (cur.pos == std::string::npos) throw ParseError("unterminated declaration", lt);
      ++cur.pos;
      continue;
    }
    if (text.compare(cur.pos, 3, "!--") == 0) {  // comment
      const std::size_t end = text.find("-->", cur.pos);
      if (end == std::string::npos) throw ParseError("unterminated comment", lt);
      cur.pos = end + 3;
      continue;
    }
    bool closing = false;
    if (cur.pos < text.size() && text[cur.pos] == '/') {
      closing = true;
      ++cur.pos;
    }
    std::size_t name_start = cur.pos;
    while (cur.pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[cur.pos])) ||
            text[cur.pos] == '_'))
      ++cur.pos;
    if (cur.pos == name_start) throw ParseError("malformed element", lt);
    const std::string name = text.substr(name_start, cur.pos - name_start);
    if (closing) {
      const std::size_t end = text.find('>', cur.pos);
      if (end == std::string::npos) throw ParseError("unterminated closing tag", lt);
      cur.pos = end + 1;
      if (name == "way") open_way = nullptr;
      continue;
    }
    bool self_closed = false;
    auto attrs = parse_attrs(cur, self_closed);
    if (name == "node") {
      if (!attrs.count("id") || !attrs.count("lat") || !attrs.count("lon"))
        throw ParseError("node missing id/lat/lon", lt);
      try {
        out.nodes[std::stoll(attrs["id"])] = {std::stod(attrs["lat"]),
                                              std::stod(attrs["lon"])};
      } catch (const std::exception&) {
        throw ParseError("node has non-numeric id/lat/lon", lt);
      }
    } else if (name == "way") {
      out.ways.emplace_back();
      open_way = self_closed ? nullptr : &out.ways.back();
    } else if (name == "nd" && open_way) {
      if (!attrs.count("ref")) throw ParseError("nd missing ref", lt);
      try {
        open_way->refs.push_back(std::stoll(attrs["ref"]));
      } catch (const std::exception&) {
        throw ParseError("nd has non-numeric ref", lt);
      }
    } else if (name == "tag" && open_way) {
      if (attrs.count("k") && attrs.count("v")) open_way->tags[attrs["k"]] = attrs["v"];
    }
  }
  return out;
}

RoadExtract parse_json_extract(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("JSON extract: ") + e.what(), e.byte);
  }
  RoadExtract out;
  for (auto& [id, latlon] : j.at("nodes").items())
    out.nodes[std::stoll(id)] = {latlon[0].get<double>(), latlon[1].get<double>()};
  for (const auto& jw : j.at("ways")) {
    RoadExtract::Way w;
    for (const auto& r : jw.at("refs")) w.refs.push_back(r.get<long long>());
    if (jw.contains("tags"))
      for (auto& [k, v] : jw.at("tags").items()) w.tags[k] = v.get<std::string>();
    out.ways.push_back(std::move(w));
  }
  return out;
}

}  // namespace

RoadExtract parse_road_extract_text(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i >= text.size()) throw ParseError("empty road-vector extract", 0);
  return text[i] == '<' ? parse_osm_xml(text) : parse_json_extract(text);
}

RoadExtract parse_road_extract(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FetchError("cannot open road-vector extract " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_road_extract_text(ss.str());
}

std::vector<std::vector<std::array<double, 2>>> clip_polyline_to_rect(
    const std::vector<std::array<double, 2>>& pts, double fx, double fy) {
  std::vector<std::vector<std::array<double, 2>>> runs;
  std::vector<std::array<double, 2>> cur;
  auto push_point = [&](double x, double y) {
    if (!cur.empty()) {
      const double dx = x - cur.back()[0], dy = y - cur.back()[1];
      if (std::sqrt(dx * dx + dy * dy) <= 1e-9) return;
    }
    cur.push_back({x, y});
  };
  auto close_run = [&]() {
    if (cur.size() >= 2) runs.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x0 = pts[i][0], y0 = pts[i][1];
    const double dx = pts[i + 1][0] - x0, dy = pts[i + 1][1] - y0;
    // Liang-Barsky parametric clip of the segment to the rectangle.
    double t0 = 0.0, t1 = 1.0;
    bool ok = true;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {x0 + fx, fx - x0, y0 + fy, fy - y0};
    for (int e = 0; e < 4 && ok; ++e) {
      if (p[e] == 0.0) {
        if (q[e] < 0.0) ok = false;
      } else {
        const double t = q[e] / p[e];
        if (p[e] < 0.0)
          t0 = std::max(t0, t);
        else
          t1 = std::min(t1, t);
        if (t0 > t1) ok = false;
      }
    }
    if (!ok) {
      close_run();
      continue;
    }
    if (t0 > 0.0 && !cur.empty()) close_run();  // re-entry starts a new run
    push_point(x0 + t0 * dx, y0 + t0 * dy);
    push_point(x0 + t1 * dx, y0 + t1 * dy);
    if (t1 < 1.0) close_run();
  }
  close_run();
  return runs;
}

SDMap extract_local_sd(const RoadExtract& source, const GeoPose& pose,
                       const Extent& extent) {
  SDMap out;
  out.pose = pose;
  out.extent = extent;
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  const double rad = M_PI / 180.0;
  const double cos_lat = std::cos(pose.lat * rad);
  for (const auto& way : source.ways) {
    auto hw = way.tags.find("highway");
    if (hw == way.tags.end()) continue;
    std::vector<std::array<double, 2>> ego_pts;
    ego_pts.reserve(way.refs.size());
    for (long long ref : way.refs) {
      auto it = source.nodes.find(ref);
      if (it == source.nodes.end()) continue;  // dangling ref outside extract
      const double de = (it->second[1] - pose.lon) * rad * kEarthRadius * cos_lat;
      const double dn = (it->second[0] - pose.lat) * rad * kEarthRadius;
      // Rotate world (east, north) into ego (+x heading, +y left).
      ego_pts.push_back({de * ch + dn * sh, -de * sh + dn * ch});
    }
    if (ego_pts.size() < 2) continue;
    int lanes = 0;
    if (auto it = way.tags.find("lanes"); it != way.tags.end()) {
      try {
        lanes = std::stoi(it->second);
      } catch (const std::exception&) {
        lanes = 0;
      }
    }
    bool one_way = false;
    if (auto it = way.tags.find("oneway"); it != way.tags.end())
      one_way = it->second == "yes" || it->second == "1" || it->second == "true";
    for (auto& run : clip_polyline_to_rect(ego_pts, extent.forward_m / 2.0,
                                           extent.lateral_m / 2.0)) {
      SDPolyline p;
      p.points = std::move(run);
      p.road_class = road_class_from_tag(hw->second);
      p.lane_count = std::clamp(lanes, 0, 8);
      p.one_way = one_way;
      out.polylines.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace smart::geo
