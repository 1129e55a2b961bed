#include "advtex/runio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "advtex/errors.hpp"

namespace advtex {

namespace {

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return std::string(buf);
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

}  // namespace

void write_metrics_csv(const std::vector<LossReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics csv: " + path);
    out << "iteration,J,S,cost_sum,subtlety_penalty\n";
    for (const LossReport& r : reports) {
        out << r.iteration << ',' << fmt(r.J, "%.17g") << ',' << fmt(r.S, "%.17g") << ','
            << fmt(r.cost_sum, "%.17g") << ',' << fmt(r.subtlety_penalty, "%.17g") << '\n';
    }
    if (!out) throw IoError("failed writing metrics csv: " + path);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::vector<double>& costs,
                          const std::string& path) {
    if (costs.size() != trajectory.states.size())
        throw ValidationError("cost list length must match trajectory states");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trajectory csv: " + path);
    out << "t,x,y,heading,steer,cost\n";
    for (size_t t = 0; t < trajectory.states.size(); ++t) {
        const VehicleState& s = trajectory.states[t];
        const double steer = t < trajectory.controls.size() ? trajectory.controls[t].steer : 0.0;
        out << t << ',' << fmt(s.x, "%.9g") << ',' << fmt(s.y, "%.9g") << ','
            << fmt(s.heading, "%.9g") << ',' << fmt(steer, "%.9g") << ',' << fmt(costs[t], "%.9g")
            << '\n';
    }
    if (!out) throw IoError("failed writing trajectory csv: " + path);
}

void write_checkpoint(const Grid3& theta, const Mask3& freeze, uint64_t seed, int iteration,
                      const std::string& path) {
    if (freeze.height() != theta.height() || freeze.width() != theta.width() ||
        freeze.channels() != theta.channels())
        throw ValidationError("freeze mask shape must match texture");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(theta.size() * sizeof(double)));
    std::vector<unsigned char> mask_bytes(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) mask_bytes[i] = freeze.get(i) ? 1 : 0;
    out.write(reinterpret_cast<const char*>(mask_bytes.data()),
              static_cast<std::streamsize>(mask_bytes.size()));
    if (!out) throw IoError("failed writing checkpoint: " + path);
    out.close();

    nlohmann::json sidecar = {
        {"shape", {theta.height(), theta.width(), theta.channels()}},
        {"seed", seed},
        {"iteration", iteration},
    };
    std::ofstream meta(path + ".json");
    if (!meta) throw IoError("cannot write checkpoint sidecar: " + path + ".json");
    meta << sidecar.dump(2) << '\n';
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream meta(path + ".json");
    if (!meta) throw IoError("cannot read checkpoint sidecar: " + path + ".json");
    nlohmann::json sidecar = nlohmann::json::parse(meta, nullptr, false);
    if (sidecar.is_discarded() || !sidecar.contains("shape"))
        throw ParseError("malformed checkpoint sidecar: " + path + ".json");
    const auto shape = sidecar["shape"];
    if (!shape.is_array() || shape.size() != 3)
        throw ParseError("checkpoint sidecar shape must be [H, W, C]");

    Checkpoint cp;
    const int h = shape[0].get<int>();
    const int w = shape[1].get<int>();
    const int c = shape[2].get<int>();
    cp.theta = Grid3(h, w, c);
    cp.freeze = Mask3(h, w, c);
    cp.seed = sidecar.value("seed", 0ULL);
    cp.iteration = sidecar.value("iteration", 0);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    in.read(reinterpret_cast<char*>(cp.theta.data()),
            static_cast<std::streamsize>(cp.theta.size() * sizeof(double)));
    std::vector<unsigned char> mask_bytes(cp.theta.size());
    in.read(reinterpret_cast<char*>(mask_bytes.data()),
            static_cast<std::streamsize>(mask_bytes.size()));
    if (!in) throw IoError("checkpoint truncated: " + path);
    for (size_t i = 0; i < mask_bytes.size(); ++i) cp.freeze.set(i, mask_bytes[i] != 0);
    return cp;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const ManifestEntry& e : entries)
        doc.push_back({{"role", e.role}, {"path", e.path}, {"fnv1a64", e.fnv1a64}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << doc.dump(2) << '\n';
}

}  // namespace advtex
