#include "mlcl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mlcl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'L', 'C', 'L'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

std::size_t NamedTensor::element_count() const {
    std::size_t n = 1;
    for (std::uint64_t d : dims) n *= static_cast<std::size_t>(d);
    return dims.empty() ? 0 : n;
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    for (const NamedTensor& t : tensors) {
        if (t.data.size() != t.element_count())
            throw std::logic_error("checkpoint: tensor size/dims mismatch for " + t.name);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint64_t d : t.dims) write_pod<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failure: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version");

    std::vector<NamedTensor> tensors;
    while (true) {
        std::uint32_t name_len;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.eof()) break;
        if (!in) throw std::runtime_error("checkpoint: truncated file");
        NamedTensor t;
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(in);
        t.dims.resize(rank);
        for (auto& d : t.dims) d = read_pod<std::uint64_t>(in);
        t.data.resize(t.element_count());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated tensor payload");
        tensors.push_back(std::move(t));
    }
    return tensors;
}

std::vector<NamedTensor> encoder_to_tensors(const EncoderParams& params,
                                            const std::string& prefix) {
    std::vector<NamedTensor> out;
    auto push_matrix = [&](const std::string& name, const DenseMatrix& m) {
        out.push_back({name, {m.rows, m.cols}, m.values});
    };
    for (std::size_t l = 0; l < params.backbone.size(); ++l) {
        const std::string base = prefix + ".backbone." + std::to_string(l);
        push_matrix(base + ".weight", params.backbone[l].weight);
        out.push_back({base + ".bias", {params.backbone[l].bias.size()}, params.backbone[l].bias});
    }
    push_matrix(prefix + ".proj1.weight", params.proj1.weight);
    push_matrix(prefix + ".proj2.weight", params.proj2.weight);
    return out;
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
    for (const NamedTensor& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

EncoderParams encoder_from_tensors(const std::vector<NamedTensor>& tensors,
                                   const std::string& prefix) {
    auto require = [&](const std::string& name) -> const NamedTensor& {
        const NamedTensor* t = find_tensor(tensors, name);
        if (!t) throw std::runtime_error("checkpoint: missing tensor " + name);
        return *t;
    };
    auto to_matrix = [](const NamedTensor& t) {
        if (t.dims.size() != 2) throw std::runtime_error("checkpoint: expected rank-2 " + t.name);
        DenseMatrix m(t.dims[0], t.dims[1]);
        m.values = t.data;
        return m;
    };

    EncoderParams p;
    for (std::size_t l = 0;; ++l) {
        const std::string base = prefix + ".backbone." + std::to_string(l);
        const NamedTensor* w = find_tensor(tensors, base + ".weight");
        if (!w) break;
        Linear layer;
        layer.weight = to_matrix(*w);
        layer.bias = require(base + ".bias").data;
        p.backbone.push_back(std::move(layer));
    }
    if (p.backbone.empty()) throw std::runtime_error("checkpoint: no backbone tensors");
    p.proj1.weight = to_matrix(require(prefix + ".proj1.weight"));
    p.proj2.weight = to_matrix(require(prefix + ".proj2.weight"));
    return p;
}

}  // namespace mlcl
