#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "grid.hpp"

namespace chimera {

struct Snapshot {
    Field field;
    double time = 0;
    double mass = 0;
};

namespace detail {
inline bool little_endian() {
    std::uint16_t x = 1;
    unsigned char b;
    std::memcpy(&b, &x, 1);
    return b == 1;
}
}  // namespace detail

// <stem>.hdr holds "dims=.. n=.. L=.. origin=.. time=.. mass=..", <stem>.f64 the raw values
inline void write_snapshot(const std::string& stem, const Field& f, double time, double mass) {
    require(detail::little_endian(), "snapshot: big-endian hosts are not supported");
    std::ofstream h(stem + ".hdr");
    require(bool(h), "snapshot: cannot open " + stem + ".hdr");
    h << std::setprecision(17) << "dims=" << f.grid.d() << " n=" << f.grid.n() << " L=" << f.grid.L()
      << " origin=" << f.grid.origin() << " time=" << time << " mass=" << mass << "\n";
    std::ofstream b(stem + ".f64", std::ios::binary);
    require(bool(b), "snapshot: cannot open " + stem + ".f64");
    b.write(reinterpret_cast<const char*>(f.values.data()), std::streamsize(sizeof(double) * f.size()));
}

inline Snapshot read_snapshot(const std::string& stem) {
    std::ifstream h(stem + ".hdr");
    require(bool(h), "snapshot: cannot open " + stem + ".hdr");
    std::map<std::string, std::string> kv;
    std::string tok;
    while (h >> tok) {
        auto eq = tok.find('=');
        if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char* key : {"dims", "n", "L", "time", "mass"})
        require(kv.count(key), std::string("snapshot: header lacks ") + key);
    int d = std::stoi(kv["dims"]), n = std::stoi(kv["n"]);
    double L = std::stod(kv["L"]);
    double origin = kv.count("origin") ? std::stod(kv["origin"]) : -0.5 * L;
    Snapshot s;
    s.field = Field(GridSpec(d, n, L, origin));
    s.time = std::stod(kv["time"]);
    s.mass = std::stod(kv["mass"]);
    std::ifstream b(stem + ".f64", std::ios::binary);
    require(bool(b), "snapshot: cannot open " + stem + ".f64");
    b.read(reinterpret_cast<char*>(s.field.values.data()), std::streamsize(sizeof(double) * s.field.size()));
    require(b.gcount() == std::streamsize(sizeof(double) * s.field.size()), "snapshot: payload too short");
    return s;
}

}  // namespace chimera
