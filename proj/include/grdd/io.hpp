#pragma once

// Reading and writing samples, objects and reports.
//
// CSV: header with `r`, optional `t` and `z`, then the flattened payload
// (row-major for matrices). Compositional payloads are raw shares unless every
// payload column is named `sqrt...`, in which case they are sphere coordinates.
// JSON lines: {"r": .., "t": .., "z": .., "y": <object>} per line.

#include "grdd/error.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <json.hpp>

#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace grdd::io {

using nlohmann::json;

/// Settings that refine a space name; ignored where they do not apply.
struct SpaceOptions {
    double power = 0.5;
    double eps_pd = 1e-10;
    double w_max = std::numeric_limits<double>::infinity();
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    double support_lo = -std::numeric_limits<double>::infinity();
    double support_hi = std::numeric_limits<double>::infinity();
};

inline SpdMetric parse_spd_metric(const std::string& v) {
    if (v == "frobenius") return SpdMetric::Frobenius;
    if (v == "power") return SpdMetric::Power;
    if (v == "log_euclidean" || v == "log-euclidean" || v == "logeuclidean") return SpdMetric::LogEuclidean;
    if (v == "log_cholesky" || v == "log-cholesky" || v == "logcholesky") return SpdMetric::LogCholesky;
    fail(ErrorCode::InvalidArgument, "unknown SPD metric '" + v + "'");
}

/// Space from its command-line name (`euclid`, `l2`, `simplex`, `laplacian`, `wass`, `spd:<metric>`).
/// `dim` is the vector length or matrix order.
inline SpaceDescriptor make_space(const std::string& name, std::size_t dim, const SpaceOptions& opt = {}) {
    if (dim == 0) fail(ErrorCode::InvalidArgument, "space dimension must be positive");
    if (name == "euclid" || name == "euclidean") return SpaceDescriptor::euclidean(dim);
    if (name == "l2" || name == "functional") return SpaceDescriptor::functional(dim, opt.domain_lo, opt.domain_hi);
    if (name == "simplex" || name == "sphere") return SpaceDescriptor::sphere(dim);
    if (name == "laplacian" || name == "network") return SpaceDescriptor::laplacian(dim, opt.w_max);
    if (name == "wass" || name == "wasserstein") return SpaceDescriptor::wasserstein(dim, opt.support_lo, opt.support_hi);
    if (name.rfind("spd", 0) == 0) {
        const auto colon = name.find(':');
        const SpdMetric m = colon == std::string::npos ? SpdMetric::Frobenius : parse_spd_metric(name.substr(colon + 1));
        return SpaceDescriptor::spd(dim, m, opt.power, opt.eps_pd);
    }
    fail(ErrorCode::InvalidArgument, "unknown space '" + name + "'");
}

inline bool is_matrix_space_name(const std::string& name) {
    return name == "laplacian" || name == "network" || name.rfind("spd", 0) == 0;
}

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// CSV

/// Splits CSV text into records, honoring quoted fields with embedded commas,
/// quotes ("") and line breaks. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    std::size_t line = 1;
    auto end_row = [&] {
        if (field_started || !row.empty()) {
            row.push_back(field);
            rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
    };
    char ch;
    while (in.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line;
                field += ch;
            }
            continue;
        }
        switch (ch) {
        case '"':
            if (!field.empty()) fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": stray quote inside field");
            quoted = true;
            field_started = true;
            break;
        case ',':
            row.push_back(field);
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            ++line;
            break;
        default:
            field += ch;
            field_started = true;
        }
    }
    if (quoted) fail(ErrorCode::ParseError, "unterminated quoted field at end of input");
    end_row();
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << csv_escape(fields[i]);
    }
    os << '\n';
}

/// Payload column names used when writing.
inline std::vector<std::string> payload_columns(const SpaceDescriptor& s) {
    std::vector<std::string> cols;
    const std::string prefix = s.tag == SpaceTag::CompositionalSphere ? "sqrt" : "y";
    if (s.is_matrix()) {
        for (std::size_t i = 1; i <= s.dim; ++i)
            for (std::size_t j = 1; j <= s.dim; ++j) cols.push_back(prefix + std::to_string(i) + "_" + std::to_string(j));
    } else {
        for (std::size_t i = 1; i <= s.dim; ++i) cols.push_back(prefix + std::to_string(i));
    }
    return cols;
}

namespace detail {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline int parse_indicator(const std::string& s, std::size_t row, const char* col) {
    const auto v = parse_double(s);
    if (!v || (*v != 0.0 && *v != 1.0))
        fail(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + col + ": expected 0 or 1, got '" + s + "'");
    return static_cast<int>(*v);
}

} // namespace detail

/// Reads a CSV sample. `space_name` picks the geometry; the payload width fixes the shape.
inline RddSample read_csv(std::istream& in, const std::string& space_name, double cutoff, const SpaceOptions& opt = {}) {
    const auto rows = parse_csv(in);
    if (rows.empty()) fail(ErrorCode::EmptyInput, "CSV has no header");
    const auto& header = rows.front();
    int col_r = -1, col_t = -1, col_z = -1;
    std::vector<std::size_t> payload;
    std::vector<std::string> payload_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        const std::string h = detail::lower(detail::trim(header[j]));
        if (h == "r" && col_r < 0) col_r = static_cast<int>(j);
        else if (h == "t" && col_t < 0) col_t = static_cast<int>(j);
        else if (h == "z" && col_z < 0) col_z = static_cast<int>(j);
        else {
            payload.push_back(j);
            payload_names.push_back(h);
        }
    }
    if (col_r < 0) fail(ErrorCode::ParseError, "row 0: header has no 'r' column");
    if (payload.empty()) fail(ErrorCode::ParseError, "row 0: header has no payload columns");

    std::size_t dim = payload.size();
    if (is_matrix_space_name(space_name)) {
        const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(payload.size()))));
        if (m * m != payload.size())
            fail(ErrorCode::ParseError, "row 0: " + std::to_string(payload.size()) +
                                            " payload columns do not form a square matrix");
        dim = m;
    }
    RddSample s;
    s.space = make_space(space_name, dim, opt);
    s.cutoff = cutoff;
    const bool sphere_coords =
        s.space.tag == SpaceTag::CompositionalSphere &&
        std::all_of(payload_names.begin(), payload_names.end(), [](const std::string& n) { return n.rfind("sqrt", 0) == 0; });

    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != header.size())
            fail(ErrorCode::ParseError, "row " + std::to_string(i) + ": expected " + std::to_string(header.size()) +
                                            " fields, found " + std::to_string(row.size()));
        Observation o;
        const auto r = parse_double(row[static_cast<std::size_t>(col_r)]);
        if (!r) fail(ErrorCode::ParseError, "row " + std::to_string(i) + ", column r: not a number");
        o.r = *r;
        if (col_t >= 0) o.t = detail::parse_indicator(row[static_cast<std::size_t>(col_t)], i, "t");
        if (col_z >= 0) o.z = detail::parse_indicator(row[static_cast<std::size_t>(col_z)], i, "z");
        Vector v(static_cast<Eigen::Index>(payload.size()));
        for (std::size_t k = 0; k < payload.size(); ++k) {
            const auto x = parse_double(row[payload[k]]);
            if (!x)
                fail(ErrorCode::ParseError, "row " + std::to_string(i) + ", column " + header[payload[k]] + ": not a number");
            v[static_cast<Eigen::Index>(k)] = *x;
        }
        try {
            if (s.space.tag == SpaceTag::CompositionalSphere && !sphere_coords)
                o.y = composition_from_shares(s.space, v);
            else
                o.y = make_object(s.space, std::move(v));
        } catch (const Error& e) {
            fail(e.code(), "row " + std::to_string(i) + ": " + e.detail());
        }
        s.records.push_back(std::move(o));
    }
    if (s.records.empty()) fail(ErrorCode::EmptyInput, "CSV has no data rows");
    return s;
}

/// Writes a sample as CSV that read_csv restores exactly.
inline void write_csv(std::ostream& os, const RddSample& s) {
    std::vector<std::string> header{"r"};
    if (s.has_treatment()) header.push_back("t");
    if (s.has_assignment()) header.push_back("z");
    for (auto& c : payload_columns(s.space)) header.push_back(c);
    write_csv_row(os, header);
    const bool t = s.has_treatment(), z = s.has_assignment();
    for (const auto& o : s.records) {
        std::vector<std::string> f{format_double(o.r)};
        if (t) f.push_back(std::to_string(*o.t));
        if (z) f.push_back(std::to_string(*o.z));
        for (Eigen::Index k = 0; k < o.y.data.size(); ++k) f.push_back(format_double(o.y.data[k]));
        write_csv_row(os, f);
    }
}

// ---------------------------------------------------------------------------
// JSON

inline std::string space_kind(const SpaceDescriptor& s) {
    switch (s.tag) {
    case SpaceTag::Euclidean: return "euclid";
    case SpaceTag::FunctionalL2: return "l2";
    case SpaceTag::CompositionalSphere: return "simplex";
    case SpaceTag::NetworkLaplacian: return "laplacian";
    case SpaceTag::SpdMatrix: return "spd";
    case SpaceTag::Wasserstein1D: return "wass";
    }
    return "unknown";
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json space_to_json(const SpaceDescriptor& s) {
    json j;
    j["space"] = space_kind(s);
    if (s.tag == SpaceTag::SpdMatrix) j["variant"] = s.name().substr(4);
    j["shape"] = s.is_matrix() ? json::array({s.dim, s.dim}) : json::array({s.dim});
    json p = json::object();
    switch (s.tag) {
    case SpaceTag::FunctionalL2: p["domain"] = {s.domain_lo, s.domain_hi}; break;
    case SpaceTag::NetworkLaplacian:
        if (std::isfinite(s.w_max)) p["w_max"] = s.w_max;
        break;
    case SpaceTag::SpdMatrix:
        p["eps_pd"] = s.eps_pd;
        if (s.spd_metric == SpdMetric::Power) p["power"] = s.power;
        break;
    case SpaceTag::Wasserstein1D:
        if (std::isfinite(s.support_lo) || std::isfinite(s.support_hi))
            p["support"] = {number_or_null(s.support_lo), number_or_null(s.support_hi)};
        break;
    default: break;
    }
    if (!p.empty()) j["params"] = p;
    return j;
}

inline SpaceDescriptor space_from_json(const json& j) {
    if (!j.is_object() || !j.contains("space") || !j.contains("shape"))
        fail(ErrorCode::ParseError, "object needs 'space' and 'shape'");
    std::string name = j.at("space").get<std::string>();
    if (name == "spd") name += ":" + j.value("variant", std::string("frobenius"));
    const auto& shape = j.at("shape");
    if (!shape.is_array() || shape.empty()) fail(ErrorCode::ParseError, "'shape' must be a non-empty array");
    const auto dim = shape.at(0).get<std::size_t>();
    if (is_matrix_space_name(name) && (shape.size() != 2 || shape.at(1).get<std::size_t>() != dim))
        fail(ErrorCode::ParseError, "matrix shape must be [m, m]");
    SpaceOptions opt;
    if (j.contains("params")) {
        const auto& p = j.at("params");
        auto get = [](const json& v, double dflt) { return v.is_null() ? dflt : v.get<double>(); };
        if (p.contains("domain")) {
            opt.domain_lo = p.at("domain").at(0).get<double>();
            opt.domain_hi = p.at("domain").at(1).get<double>();
        }
        if (p.contains("w_max")) opt.w_max = get(p.at("w_max"), opt.w_max);
        if (p.contains("eps_pd")) opt.eps_pd = p.at("eps_pd").get<double>();
        if (p.contains("power")) opt.power = p.at("power").get<double>();
        if (p.contains("support")) {
            opt.support_lo = get(p.at("support").at(0), opt.support_lo);
            opt.support_hi = get(p.at("support").at(1), opt.support_hi);
        }
    }
    return make_space(name, dim, opt);
}

inline json object_to_json(const MetricObject& o) {
    json j = space_to_json(o.space);
    j["data"] = std::vector<double>(o.data.data(), o.data.data() + o.data.size());
    return j;
}

inline MetricObject object_from_json(const json& j) {
    try {
        const SpaceDescriptor s = space_from_json(j);
        if (!j.contains("data") || !j.at("data").is_array()) fail(ErrorCode::ParseError, "object needs a 'data' array");
        const auto data = j.at("data").get<std::vector<double>>();
        return make_object(s, Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size())));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, e.what());
    }
}

inline RddSample read_jsonl(std::istream& in, double cutoff, const std::optional<SpaceDescriptor>& expected = {}) {
    RddSample s;
    s.cutoff = cutoff;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "row " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::ParseError, where + ": " + e.what());
        }
        Observation o;
        try {
            if (!j.contains("r") || !j.contains("y")) fail(ErrorCode::ParseError, "record needs 'r' and 'y'");
            o.r = j.at("r").get<double>();
            if (j.contains("t") && !j.at("t").is_null()) o.t = j.at("t").get<int>();
            if (j.contains("z") && !j.at("z").is_null()) o.z = j.at("z").get<int>();
            o.y = object_from_json(j.at("y"));
        } catch (const Error& e) {
            fail(e.code(), where + ": " + e.detail());
        } catch (const json::exception& e) {
            fail(ErrorCode::ParseError, where + ": " + e.what());
        }
        if (s.records.empty()) {
            s.space = o.y.space;
            if (expected && !expected->same_geometry(s.space))
                fail(ErrorCode::MixedSpaces, where + ": object space " + s.space.name() + " does not match " + expected->name());
        } else if (!o.y.space.same_geometry(s.space)) {
            fail(ErrorCode::MixedSpaces, where + ": object space " + o.y.space.name() + " differs from " + s.space.name());
        }
        s.records.push_back(std::move(o));
    }
    if (s.records.empty()) fail(ErrorCode::EmptyInput, "no records");
    validate_sample(s, false);
    return s;
}

inline void write_jsonl(std::ostream& os, const RddSample& s) {
    for (const auto& o : s.records) {
        json j;
        j["r"] = o.r;
        if (o.t) j["t"] = *o.t;
        if (o.z) j["z"] = *o.z;
        j["y"] = object_to_json(o.y);
        os << j.dump() << '\n';
    }
}

inline bool looks_like_jsonl(const std::string& path) {
    auto ends_with = [&](const std::string& suf) {
        return path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
    };
    return ends_with(".jsonl") || ends_with(".ndjson") || ends_with(".json");
}

/// Loads a sample from a CSV or JSON-lines file, chosen by extension.
inline RddSample load_sample(const std::string& path, const std::string& space_name, double cutoff,
                             const SpaceOptions& opt = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
    if (looks_like_jsonl(path)) {
        RddSample s = read_jsonl(in, cutoff);
        if (!space_name.empty()) {
            const SpaceDescriptor want = make_space(space_name, s.space.dim, opt);
            if (!want.same_geometry(s.space))
                fail(ErrorCode::MixedSpaces, "file holds " + s.space.name() + " objects, not " + want.name());
        }
        return s;
    }
    if (space_name.empty()) fail(ErrorCode::InvalidArgument, "CSV input needs --space");
    return read_csv(in, space_name, cutoff, opt);
}

inline json error_json(const Error& e, int exit_code) {
    return {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}, {"exit_code", exit_code}}}};
}

} // namespace grdd::io
