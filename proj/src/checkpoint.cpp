#include "bptd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bptd {

namespace {

constexpr char kMagic[8] = {'B', 'P', 'T', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint32_t n = read_u32(in);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

}  // namespace

const std::vector<double>& Checkpoint::array(const std::string& name) const {
    for (const auto& [key, values] : arrays) {
        if (key == name) return values;
    }
    throw std::runtime_error("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [key, values] : arrays) {
        if (key == name) return true;
    }
    return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_string(out, ckpt.model_tag);
    write_i64(out, ckpt.dims.V);
    write_i64(out, ckpt.dims.A);
    write_i64(out, ckpt.dims.T);
    write_i64(out, ckpt.dims.C);
    write_i64(out, ckpt.dims.K);
    write_i64(out, ckpt.dims.R);
    write_u32(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, values] : ckpt.arrays) {
        write_string(out, name);
        write_u64(out, values.size());
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.model_tag = read_string(in);
    ckpt.dims.V = static_cast<int>(read_i64(in));
    ckpt.dims.A = static_cast<int>(read_i64(in));
    ckpt.dims.T = static_cast<int>(read_i64(in));
    ckpt.dims.C = static_cast<int>(read_i64(in));
    ckpt.dims.K = static_cast<int>(read_i64(in));
    ckpt.dims.R = static_cast<int>(read_i64(in));
    std::uint32_t n_arrays = read_u32(in);
    for (std::uint32_t idx = 0; idx < n_arrays; ++idx) {
        std::string name = read_string(in);
        std::uint64_t count = read_u64(in);
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated array '" + name + "'");
        ckpt.arrays.emplace_back(std::move(name), std::move(values));
    }
    return ckpt;
}

Checkpoint to_checkpoint(const BPTDState& state) {
    Checkpoint ckpt;
    ckpt.model_tag = "bptd";
    ckpt.dims = state.dims;
    ckpt.arrays = {
        {"theta", state.theta},
        {"phi", state.phi},
        {"psi", state.psi},
        {"core", state.core},
        {"eta_within", state.eta_within},
        {"eta_between", state.eta_between},
        {"nu", state.nu},
        {"rho", state.rho},
        {"alpha", state.alpha},
        {"beta", state.beta},
        {"scalars", {state.delta, state.zeta, state.hyper.eps0, state.hyper.gamma0}},
    };
    return ckpt;
}

BPTDState bptd_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.model_tag != "bptd") {
        throw std::runtime_error("checkpoint: expected model tag 'bptd', got '" + ckpt.model_tag + "'");
    }
    BPTDState s;
    s.dims = ckpt.dims;
    s.dims.validate();
    s.theta = ckpt.array("theta");
    s.phi = ckpt.array("phi");
    s.psi = ckpt.array("psi");
    s.core = ckpt.array("core");
    s.eta_within = ckpt.array("eta_within");
    s.eta_between = ckpt.array("eta_between");
    s.nu = ckpt.array("nu");
    s.rho = ckpt.array("rho");
    s.alpha = ckpt.array("alpha");
    s.beta = ckpt.array("beta");
    const auto& scalars = ckpt.array("scalars");
    if (scalars.size() != 4) throw std::runtime_error("checkpoint: scalars block must hold 4 values");
    s.delta = scalars[0];
    s.zeta = scalars[1];
    s.hyper.eps0 = scalars[2];
    s.hyper.gamma0 = scalars[3];
    const ModelDims& m = s.dims;
    if (s.theta.size() != static_cast<std::size_t>(m.V) * m.C || s.core.size() != m.core_size() ||
        s.phi.size() != static_cast<std::size_t>(m.A) * m.K ||
        s.psi.size() != static_cast<std::size_t>(m.T) * m.R) {
        throw std::runtime_error("checkpoint: array sizes disagree with dims header");
    }
    return s;
}

}  // namespace bptd
