#include "headway/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "headway/binary.hpp"
#include "headway/config.hpp"
#include "headway/hash.hpp"

namespace headway {

namespace {

constexpr char kMagic[8] = {'H', 'W', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint64_t kMaxHeader = 64ull << 20;

std::string payload_bytes(const std::vector<float>& data)
{
    std::ostringstream out(std::ios::binary);
    binary::write_f32(out, data);
    return std::move(out).str();
}

}  // namespace

std::string params_digest(const nn::ModelParams<float>& params)
{
    Fnv1a h;
    h.update(payload_bytes(params.data));
    return h.hex();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    const auto layout = nn::ParamLayout::of(ckpt.params.dims);
    if (layout.total != ckpt.params.data.size())
        throw ShapeError("checkpoint parameters do not match their dims");
    const std::string payload = payload_bytes(ckpt.params.data);
    Fnv1a digest;
    digest.update(payload);

    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : layout.blocks)
        blocks.push_back({{"name", nn::block_name(b.block)},
                          {"shape", b.shape},
                          {"offset_bytes", b.offset * sizeof(float)},
                          {"count", b.count}});
    const nlohmann::json header{{"version", kCheckpointVersion},
                                {"dims", ckpt.params.dims},
                                {"scaler", ckpt.scaler},
                                {"grid_spec", ckpt.grid_spec},
                                {"window_spec", ckpt.window_spec},
                                {"seed", ckpt.seed},
                                {"epoch", ckpt.epoch},
                                {"history", ckpt.history},
                                {"blocks", blocks},
                                {"payload_bytes", payload.size()},
                                {"payload_digest", digest.hex()}};
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        binary::write_u64(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    auto corrupt = [&](const std::string& why) { return CorruptFileError(fmt::format("{}: {}", path.string(), why)); };

    char magic[8];
    if (!in.read(magic, sizeof magic)) throw corrupt("truncated before magic");
    if (!std::equal(magic, magic + 8, kMagic)) throw corrupt("not a checkpoint (bad magic)");
    std::uint64_t header_len = 0;
    if (!binary::read_u64(in, header_len)) throw corrupt("truncated header length");
    if (header_len > kMaxHeader) throw corrupt("implausible header length");
    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw corrupt("truncated header");

    Checkpoint ck;
    nlohmann::json header;
    std::uint64_t payload_size = 0;
    std::string expected_digest;
    try {
        header = nlohmann::json::parse(text);
        const int version = header.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw corrupt(fmt::format("version {} is not supported (expected {})", version, kCheckpointVersion));
        ck.params.dims = header.at("dims").get<nn::ModelDims>();
        ck.scaler = header.at("scaler").get<grid::Scaler>();
        ck.grid_spec = header.at("grid_spec").get<grid::GridSpec>();
        ck.window_spec = header.at("window_spec").get<window::WindowSpec>();
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.epoch = header.at("epoch").get<int>();
        ck.history = header.at("history").get<train::TrainHistory>();
        payload_size = header.at("payload_bytes").get<std::uint64_t>();
        expected_digest = header.at("payload_digest").get<std::string>();
        ck.params.dims.validate();
    } catch (const CorruptFileError&) {
        throw;
    } catch (const std::exception& e) {
        throw corrupt(fmt::format("bad header: {}", e.what()));
    }

    const auto layout = nn::ParamLayout::of(ck.params.dims);
    if (payload_size != layout.total * sizeof(float))
        throw corrupt(fmt::format("header declares {} payload bytes but dims need {}", payload_size,
                                  layout.total * sizeof(float)));
    const auto& blocks = header.at("blocks");
    if (!blocks.is_array() || blocks.size() != nn::kBlockCount) throw corrupt("block table has the wrong length");
    for (std::size_t i = 0; i < nn::kBlockCount; ++i) {
        const auto& b = blocks[i];
        const auto& info = layout.blocks[i];
        if (b.at("name").get<std::string>() != nn::block_name(info.block) ||
            b.at("shape").get<std::vector<std::size_t>>() != info.shape ||
            b.at("offset_bytes").get<std::size_t>() != info.offset * sizeof(float))
            throw corrupt(fmt::format("block '{}' does not match the declared dims", nn::block_name(info.block)));
    }

    ck.params.data.resize(layout.total);
    if (!binary::read_f32(in, ck.params.data))
        throw corrupt(fmt::format("truncated payload (expected {} bytes)", payload_size));
    if (in.peek() != std::char_traits<char>::eof()) throw corrupt("trailing bytes after payload");
    if (params_digest(ck.params) != expected_digest) throw corrupt("payload digest mismatch");
    return ck;
}

}  // namespace headway
