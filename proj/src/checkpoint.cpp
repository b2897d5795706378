#include "stec/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace stec {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'E', 'C', '0', '0', '0', '1'};

template <typename T>
void write_le(std::ofstream& out, T value) {
    // Build targets little-endian hosts; serialize native bytes.
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

}  // namespace

void save_parameters(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorError("save_parameters: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint64_t>(out, params.size());
    for (const auto& [name, t] : params) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
        for (auto d : t->shape) write_le<std::int64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) throw TensorError("save_parameters: write failed for " + path);
}

void load_parameters(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorError("load_parameters: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw TensorError("load_parameters: bad magic in " + path);

    std::map<std::string, TensorPtr> by_name;
    for (const auto& [name, t] : params) by_name[name] = t;

    auto count = read_le<std::uint64_t>(in);
    std::size_t loaded = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        auto name_len = read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto rank = read_le<std::uint32_t>(in);
        std::vector<std::int64_t> shape(rank);
        for (auto& d : shape) d = read_le<std::int64_t>(in);
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> data(static_cast<std::size_t>(n));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw TensorError("load_parameters: truncated file " + path);

        auto it = by_name.find(name);
        if (it == by_name.end())
            throw TensorError("load_parameters: unknown parameter '" + name + "'");
        if (it->second->shape != shape)
            throw TensorError("load_parameters: shape mismatch for '" + name + "'");
        it->second->data = std::move(data);
        ++loaded;
    }
    if (loaded != by_name.size())
        throw TensorError("load_parameters: checkpoint is missing parameters");
}

}  // namespace stec
