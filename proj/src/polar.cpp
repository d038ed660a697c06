#include "polarbench/polar.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polarbench {

using nlohmann::json;

CoefficientSchedule::CoefficientSchedule(std::string name, std::vector<CoefficientTriple> triples)
    : name_(std::move(name)), triples_(std::move(triples)) {
    if (triples_.empty()) throw ConfigError("schedule '" + name_ + "': no coefficient triples");
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        const auto& t = triples_[i];
        if (!std::isfinite(t.a) || !std::isfinite(t.b) || !std::isfinite(t.c)) {
            throw ConfigError("schedule '" + name_ + "': non-finite coefficient in triple " +
                              std::to_string(i));
        }
    }
}

CoefficientSchedule CoefficientSchedule::keller() {
    return CoefficientSchedule("keller", {{3.4445, -4.7750, 2.0315}});
}

CoefficientSchedule CoefficientSchedule::exact() {
    return CoefficientSchedule("exact", {{2.0, -1.5, 0.5}});
}

const CoefficientTriple& CoefficientSchedule::at(std::size_t step) const {
    if (cyclic()) return triples_.front();
    if (step >= triples_.size()) {
        throw ConfigError("schedule '" + name_ + "' has " + std::to_string(triples_.size()) +
                          " triples, step " + std::to_string(step + 1) + " requested");
    }
    return triples_[step];
}

void CoefficientSchedule::require_steps(int k) const {
    if (!cyclic() && k > static_cast<int>(triples_.size())) {
        throw ConfigError("schedule '" + name_ + "' has " + std::to_string(triples_.size()) +
                          " triples but " + std::to_string(k) + " steps were requested");
    }
}

std::vector<double> CoefficientSchedule::phi_at_one() const {
    std::vector<double> out;
    out.reserve(triples_.size());
    for (const auto& t : triples_) out.push_back(t.at_one());
    return out;
}

namespace {

std::size_t line_of_byte(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace

CoefficientSchedule parse_schedule_json(std::string_view text, const std::string& origin) {
    const std::string where = origin.empty() ? "schedule" : origin;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and points just past the offending character
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError(where + ": parse error on line " +
                          std::to_string(line_of_byte(text, byte)) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(where + ": expected a JSON object");
    if (!doc.contains("name") || !doc["name"].is_string()) {
        throw ConfigError(where + ": missing string field 'name'");
    }
    if (!doc.contains("triples") || !doc["triples"].is_array()) {
        throw ConfigError(where + ": missing array field 'triples'");
    }
    std::vector<CoefficientTriple> triples;
    std::size_t idx = 0;
    for (const auto& t : doc["triples"]) {
        if (!t.is_array() || t.size() != 3 || !t[0].is_number() || !t[1].is_number() ||
            !t[2].is_number()) {
            throw ConfigError(where + ": triple " + std::to_string(idx) +
                              " is not a list of three numbers");
        }
        triples.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
        ++idx;
    }
    return CoefficientSchedule(doc["name"].get<std::string>(), std::move(triples));
}

CoefficientSchedule load_schedule(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open schedule file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_schedule_json(ss.str(), path.string());
}

CoefficientSchedule resolve_schedule(const std::string& name_or_path) {
    std::string lower = name_or_path;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "keller") return CoefficientSchedule::keller();
    if (lower == "exact") return CoefficientSchedule::exact();
    return load_schedule(name_or_path);
}

std::string schedule_to_json(const CoefficientSchedule& s) {
    json doc;
    doc["name"] = s.name();
    doc["triples"] = json::array();
    for (const auto& t : s.triples()) doc["triples"].push_back({t.a, t.b, t.c});
    return doc.dump();
}

}  // namespace polarbench
