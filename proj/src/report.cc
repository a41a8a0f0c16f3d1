#include "minisched/report.h"

#include <sstream>

#include "json.hpp"

namespace minisched {

bool check_report::has(const std::string& kind) const {
  for (const finding& f : findings) {
    if (f.kind == kind) return true;
  }
  return false;
}

std::string check_report::to_json() const {
  nlohmann::ordered_json j;
  j["pipeline"] = pipeline;
  j["schedule"] = schedule;
  j["seed"] = seed;
  j["verdict"] = verdict();
  nlohmann::ordered_json fs = nlohmann::ordered_json::array();
  for (const finding& f : findings) {
    nlohmann::ordered_json x;
    x["kind"] = f.kind;
    x["message"] = f.message;
    if (!f.span.file.empty() || f.span.length > 0) x["span"] = f.span.str();
    if (!f.annotation.empty()) x["annotation"] = f.annotation;
    if (!f.state.empty()) x["state"] = f.state;
    if (!f.alloc.empty()) {
      x["alloc"] = f.alloc;
      x["location"] = f.location;
    }
    if (f.kind == "race") {
      x["iterA"] = f.iter_a;
      x["iterB"] = f.iter_b;
    }
    if (f.kind == "mismatch") {
      x["point"] = f.point;
      x["got"] = f.got;
      x["want"] = f.want;
    }
    fs.push_back(x);
  }
  j["findings"] = fs;
  j["stats"] = {{"points", stats.points},
                {"instantiations", stats.instantiations},
                {"boundaries", stats.boundaries},
                {"millis", stats.millis}};
  return j.dump(2);
}

std::string check_report::summary() const {
  std::ostringstream os;
  os << pipeline;
  if (!schedule.empty()) os << " [" << schedule << "]";
  os << " seed " << seed << ": " << verdict() << "\n";
  for (const finding& f : findings) {
    os << "  " << f.kind << ": " << f.message;
    if (!f.annotation.empty()) os << "\n    " << f.annotation;
    os << "\n";
  }
  return os.str();
}

}  // namespace minisched
