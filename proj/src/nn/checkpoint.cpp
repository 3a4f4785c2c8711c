#include "corast/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "corast/errors.hpp"

namespace corast::nn {

namespace {

constexpr const char* kMagic = "CORAST-CHECKPOINT";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string read_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DecodeError("checkpoint: unexpected end of header");
    return line;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params, const std::map<std::string, std::string>& meta) {
    out << kMagic << ' ' << kVersion << '\n';
    for (const auto& [k, v] : meta) {
        if (k.find_first_of("=\n ") != std::string::npos || v.find('\n') != std::string::npos)
            throw UsageError("checkpoint: invalid meta entry '" + k + "'");
        out << "meta " << k << '=' << v << '\n';
    }
    for (const auto& p : params.items()) {
        out << "param " << p.name << ' ' << p.value.rank();
        for (auto d : p.value.shape()) out << ' ' << d;
        out << '\n';
    }
    out << "data\n";
    for (const auto& p : params.items())
        out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
    Checkpoint ck;
    {
        std::istringstream head(read_line(in));
        std::string magic;
        int version = 0;
        head >> magic >> version;
        if (magic != kMagic) throw DecodeError("checkpoint: bad magic");
        if (version != kVersion) throw DecodeError("checkpoint: unsupported version " + std::to_string(version));
    }
    std::vector<std::pair<std::string, Shape>> layout;
    for (;;) {
        const std::string line = read_line(in);
        if (line == "data") break;
        if (line.rfind("meta ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw DecodeError("checkpoint: malformed meta line");
            ck.meta[line.substr(5, eq - 5)] = line.substr(eq + 1);
        } else if (line.rfind("param ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            std::string name;
            std::size_t rank = 0;
            if (!(ls >> name >> rank)) throw DecodeError("checkpoint: malformed param line");
            Shape s(rank);
            for (auto& d : s)
                if (!(ls >> d) || d < 0) throw DecodeError("checkpoint: malformed shape for '" + name + "'");
            layout.emplace_back(name, s);
        } else {
            throw DecodeError("checkpoint: unexpected header line '" + line + "'");
        }
    }
    for (auto& [name, shape] : layout) {
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(double)))
            throw DecodeError("checkpoint: truncated data for '" + name + "'");
        ck.params.emplace_back(name, std::move(t));
    }
    return ck;
}

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_checkpoint(out, params, meta);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_checkpoint(in);
}

void apply_checkpoint(const Checkpoint& ckpt, ParameterSet& params) {
    if (ckpt.params.size() != params.size())
        throw ConfigError("checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, model has " +
                          std::to_string(params.size()));
    for (const auto& [name, value] : ckpt.params) {
        auto& p = params.get(name);
        if (p.value.shape() != value.shape())
            throw ConfigError("checkpoint shape mismatch for '" + name + "'");
        p.value = value;
    }
}

}  // namespace corast::nn
