#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "focal/pmf.hpp"

#include <json.hpp>

// Serialization helpers shared by the library and the CLI. All numeric
// output goes through format_double so that identical inputs produce
// byte-identical artifacts: 17 significant digits, which round-trips any
// IEEE double exactly.

namespace focal {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

/// RFC 4180 quoting: fields containing commas, quotes, or newlines are
/// wrapped in double quotes with embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

inline std::string pmf_to_json(const Pmf& p) {
    std::string out = "{\"labels\":[";
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += ',';
        out += '"' + json_escape(p.label(i)) + '"';
    }
    out += "],\"probs\":[";
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += ',';
        out += format_double(p.prob(i));
    }
    out += "]}";
    return out;
}

inline std::string pmf_to_csv(const Pmf& p) {
    std::string out = "prob\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
        out += format_double(p.prob(i));
        out += '\n';
    }
    return out;
}

inline Pmf pmf_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("probs") || !j["probs"].is_array()) {
        throw std::invalid_argument("pmf_from_json: missing \"probs\" array");
    }
    std::vector<double> probs = j["probs"].get<std::vector<double>>();
    if (j.contains("labels")) {
        return Pmf(j["labels"].get<std::vector<std::string>>(), probs);
    }
    return Pmf(probs);
}

inline Pmf pmf_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::vector<double> probs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == "prob") continue;
        probs.push_back(std::stod(line));
    }
    return Pmf(probs);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace focal
