#include "wb/report.hpp"

#include <cstdio>
#include <sstream>

namespace wb {

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j;
    j["title"] = title;
    j["header"] = header;
    j["all_pass"] = all_pass();
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json x;
        x["name"] = e.name;
        x["level"] = e.level;
        x["pass"] = e.pass;
        x["margin"] = e.margin;
        x["note"] = e.note;
        j["entries"].push_back(x);
    }
    return j;
}

std::string VerificationReport::to_text() const {
    std::ostringstream os;
    os << "# " << title << "\n";
    for (const auto& h : header) os << "# " << h << "\n";
    char buf[64];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%.6g", e.margin);
        os << (e.pass ? "PASS " : "FAIL ") << e.name;
        if (e.level >= 0) os << " [" << e.level << "]";
        os << " margin=" << buf;
        if (!e.note.empty()) os << "  " << e.note;
        os << "\n";
    }
    return os.str();
}

}  // namespace wb
