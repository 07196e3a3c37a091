#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace wb {

struct CheckEntry {
    std::string name;
    long level = -1;      // -1 when the check is not tied to a level or stage
    bool pass = false;
    double margin = 0;    // positive when satisfied; units named in the note
    std::string note;
};

struct VerificationReport {
    std::string title;
    std::vector<std::string> header;
    std::vector<CheckEntry> entries;

    void add(std::string name, long level, bool pass, double margin, std::string note = {}) {
        entries.push_back({std::move(name), level, pass, margin, std::move(note)});
    }
    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
    size_t failures() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.pass ? 0 : 1;
        return n;
    }
    const CheckEntry* find(const std::string& name, long level = -2) const {
        for (const auto& e : entries)
            if (e.name == name && (level == -2 || e.level == level)) return &e;
        return nullptr;
    }
    void append(const VerificationReport& other) {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    }
    nlohmann::json to_json() const;
    std::string to_text() const;
};

}  // namespace wb
