#include "raylink/nn/checkpoint.hpp"

#include "raylink/binary_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace raylink::nn {

namespace {
constexpr char kMagic[8] = {'R', 'L', 'N', 'K', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const
{
    for (const auto& t : tensors)
        if (t.name == name) return t.tensor;
    throw std::runtime_error("checkpoint: no tensor named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint)
{
    nlohmann::json header = checkpoint.header;
    header["tensors"] = nlohmann::json::array();
    for (const auto& t : checkpoint.tensors)
        header["tensors"].push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
    const std::string text = header.dump();

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp);
        os.write(kMagic, sizeof kMagic);
        io::write_le<std::uint32_t>(os, kVersion);
        io::write_le<std::uint64_t>(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& t : checkpoint.tensors)
            for (double v : t.tensor.values()) io::write_le<double>(os, v);
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    const auto version = io::read_le<std::uint32_t>(is);
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto length = io::read_le<std::uint64_t>(is);
    std::string text(length, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(length)))
        throw std::runtime_error("checkpoint: truncated header in " + path.string());

    Checkpoint c;
    c.header = nlohmann::json::parse(text);
    for (const auto& entry : c.header.at("tensors")) {
        Shape shape = entry.at("shape").get<Shape>();
        std::vector<double> values(shape_size(shape));
        for (auto& v : values) v = io::read_le<double>(is);
        c.tensors.push_back({entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
    }
    c.header.erase("tensors");
    return c;
}

}  // namespace raylink::nn
