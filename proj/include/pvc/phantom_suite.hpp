#pragma once

// Phantom suite files and result reports.
//
// A suite is an INI-style text file with one section per case:
//
//     # comment
//     [case tube_0488]
//     dims = 48 48 24
//     spacing = 0.488 0.488 1.0
//     origin = 0 0 0                 (optional)
//     outer_radius = 6.0
//     cortical_thickness = 2.0
//     length = 16.0
//     cortical_hu = 1800
//     trabecular_hu = 300
//     background_hu = 0
//     psf_sigma = 0.488
//
// Every key except `origin` is required.

#include <array>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pvc/errors.hpp"
#include "pvc/phantom.hpp"

namespace pvc {

class SuiteError : public Error {
public:
    using Error::Error;
};

struct PhantomCase {
    std::string name;
    PhantomSpec spec;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <std::size_t N>
std::array<double, N> parse_numbers(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    std::array<double, N> out{};
    for (auto& v : out)
        if (!(in >> v)) throw SuiteError(where + ": expected " + std::to_string(N) + " number(s), got '" + text + "'");
    std::string rest;
    if (in >> rest) throw SuiteError(where + ": trailing text '" + rest + "'");
    return out;
}

inline PhantomCase build_case(const std::string& name, const std::map<std::string, std::string>& kv) {
    static const char* const required[] = {"dims",        "spacing",       "outer_radius",  "cortical_thickness",
                                           "length",      "cortical_hu",   "trabecular_hu", "background_hu",
                                           "psf_sigma"};
    const std::string where = "case '" + name + "'";
    for (const char* key : required)
        if (!kv.count(key)) throw SuiteError(where + ": missing key '" + key + "'");
    auto scalar = [&](const char* key) { return parse_numbers<1>(kv.at(key), where + " key '" + key + "'")[0]; };

    try {
        const auto d = parse_numbers<3>(kv.at("dims"), where + " key 'dims'");
        Dims dims{};
        for (int a = 0; a < 3; ++a) {
            if (d[a] < 1 || d[a] != std::floor(d[a])) throw SuiteError(where + ": dims must be positive integers");
            dims[a] = std::size_t(d[a]);
        }
        const Vec3 spacing = parse_numbers<3>(kv.at("spacing"), where + " key 'spacing'");
        const Vec3 origin = kv.count("origin") ? parse_numbers<3>(kv.at("origin"), where + " key 'origin'") : Vec3{};
        PhantomCase c{name, {}};
        c.spec.geometry = GridGeometry(dims, spacing, origin);
        c.spec.outer_radius = scalar("outer_radius");
        c.spec.cortical_thickness = scalar("cortical_thickness");
        c.spec.length = scalar("length");
        c.spec.cortical_hu = scalar("cortical_hu");
        c.spec.trabecular_hu = scalar("trabecular_hu");
        c.spec.background_hu = scalar("background_hu");
        c.spec.psf_sigma = scalar("psf_sigma");
        c.spec.validate();
        return c;
    } catch (const SuiteError&) {
        throw;
    } catch (const Error& e) {
        throw SuiteError(where + ": " + e.what());
    }
}

}  // namespace detail

inline std::vector<PhantomCase> parse_phantom_suite(std::istream& in) {
    static const char* const known[] = {"dims",        "spacing",       "origin",        "outer_radius",
                                        "cortical_thickness", "length", "cortical_hu",   "trabecular_hu",
                                        "background_hu", "psf_sigma"};
    std::vector<PhantomCase> cases;
    std::string name;
    std::map<std::string, std::string> kv;
    bool open = false;
    auto flush = [&] {
        if (open) cases.push_back(detail::build_case(name, kv));
        kv.clear();
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string at = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw SuiteError(at + ": unterminated section header");
            const std::string header = detail::trim(line.substr(1, line.size() - 2));
            if (header.rfind("case", 0) != 0) throw SuiteError(at + ": expected [case <name>]");
            flush();
            name = detail::trim(header.substr(4));
            if (name.empty()) throw SuiteError(at + ": case has no name");
            for (const auto& c : cases)
                if (c.name == name) throw SuiteError(at + ": duplicate case '" + name + "'");
            open = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw SuiteError(at + ": expected key = value");
        if (!open) throw SuiteError(at + ": key outside of a [case] section");
        const std::string key = detail::trim(line.substr(0, eq));
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw SuiteError("case '" + name + "' " + at + ": unknown key '" + key + "'");
        if (kv.count(key)) throw SuiteError("case '" + name + "' " + at + ": duplicate key '" + key + "'");
        kv[key] = detail::trim(line.substr(eq + 1));
    }
    flush();
    if (cases.empty()) throw SuiteError("phantom suite contains no cases");
    return cases;
}

inline std::vector<PhantomCase> load_phantom_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SuiteError("cannot open phantom suite '" + path + "'");
    return parse_phantom_suite(in);
}

inline void write_phantom_csv_header(std::ostream& os) {
    os << "case,surface_voxels,mae_uncorrected,mae_corrected,mean_signed_uncorrected,mean_signed_corrected,"
          "improvement_fraction,improvement_defined\n";
}

inline void write_phantom_csv_row(std::ostream& os, const std::string& name, const PhantomResult& r) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::setprecision(12) << name << ',' << r.surface_count << ',' << r.mae_uncorrected << ','
       << r.mae_corrected << ',' << r.mean_signed_uncorrected << ',' << r.mean_signed_corrected << ','
       << r.improvement_fraction << ',' << (r.improvement_defined ? "yes" : "no") << '\n';
    os.flags(flags);
    os.precision(precision);
}

}  // namespace pvc
