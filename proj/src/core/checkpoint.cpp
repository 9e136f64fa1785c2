#include "wam/core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wam/core/errors.hpp"

namespace wam::core {

namespace {

void put_f32_le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float get_f32_le(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

} // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
    std::string out;
    for (const std::string& name : store.names()) {
        out += name;
        for (std::size_t d : store.get(name).shape()) {
            out += ' ';
            out += std::to_string(d);
        }
        out += '\n';
    }
    out += '\n';
    for (const std::string& name : store.names()) {
        const Tensor& t = store.get(name);
        for (std::size_t i = 0; i < t.size(); ++i) {
            put_f32_le(out, static_cast<float>(t[i]));
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write on checkpoint: " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("missing checkpoint: " + path.string());
    std::string contents((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    struct Entry { std::string name; std::vector<std::size_t> shape; };
    std::vector<Entry> entries;
    while (pos < contents.size()) {
        std::size_t eol = contents.find('\n', pos);
        if (eol == std::string::npos) throw IoError("truncated checkpoint header: " + path.string());
        std::string line = contents.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) break; // header terminator
        std::istringstream is(line);
        Entry e;
        is >> e.name;
        std::size_t d;
        while (is >> d) e.shape.push_back(d);
        if (e.name.empty() || e.shape.empty()) {
            throw IoError("malformed checkpoint header line: " + line);
        }
        entries.push_back(std::move(e));
    }

    ParamStore store;
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(contents.data());
    for (const Entry& e : entries) {
        std::size_t n = shape_product(e.shape);
        if (pos + 4 * n > contents.size()) {
            throw IoError("truncated checkpoint payload: " + path.string());
        }
        Tensor t(e.shape);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<double>(get_f32_le(bytes + pos + 4 * i));
        }
        pos += 4 * n;
        store.create(e.name, std::move(t));
    }
    if (pos != contents.size()) throw IoError("trailing bytes in checkpoint: " + path.string());
    return store;
}

std::uint64_t file_digest(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read: " + path.string());
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[4096];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (!f) break;
    }
    return h;
}

} // namespace wam::core
