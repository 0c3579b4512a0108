#include "fbwm/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "fbwm/binary_io.hpp"
#include "fbwm/digest.hpp"

namespace fbwm::checkpoint {

namespace {
constexpr char kMagic[4] = {'W', 'M', 'C', 'K'};
constexpr std::uint32_t kMaxCount = 1u << 20;
}  // namespace

void Checkpoint::add_params(const tensor::ParamStore& store)
{
    for (const auto& p : store) {
        NamedTensor t;
        t.name = p.name;
        t.shape = {p.value.rows(), p.value.cols()};
        t.data.assign(p.value.data(), p.value.data() + p.value.size());
        tensors.push_back(std::move(t));
    }
}

void Checkpoint::restore_params(tensor::ParamStore& store) const
{
    std::size_t matched = 0;
    for (const auto& t : tensors) {
        auto id = store.find(t.name);
        if (!id) continue;
        auto& value = store.value(*id);
        if (t.shape.size() != 2 || t.shape[0] != value.rows() || t.shape[1] != value.cols()) {
            throw CheckpointError(CheckpointErrorCode::Mismatch, "shape mismatch for tensor " + t.name);
        }
        std::copy(t.data.begin(), t.data.end(), value.data());
        ++matched;
    }
    if (matched != store.size()) {
        throw CheckpointError(CheckpointErrorCode::Mismatch, "checkpoint is missing model parameters");
    }
}

const std::string& Checkpoint::attribute(const std::string& key) const
{
    auto it = attributes.find(key);
    if (it == attributes.end()) throw CheckpointError(CheckpointErrorCode::Mismatch, "missing attribute " + key);
    return it->second;
}

void Checkpoint::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrorCode::Io, "cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    io::put<std::uint16_t>(out, kCheckpointVersion);
    io::put_string(out, kind);
    io::put<std::uint32_t>(out, epoch);
    io::put<std::uint64_t>(out, seed);
    io::put<std::uint64_t>(out, config_digest);
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(attributes.size()));
    for (const auto& [k, v] : attributes) {
        io::put_string(out, k);
        io::put_string(out, v);
    }
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        io::put_string(out, t.name);
        io::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) io::put<std::int64_t>(out, d);
        io::put_array(out, t.data.data(), t.data.size());
    }
    if (!out.flush()) throw CheckpointError(CheckpointErrorCode::Io, "write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorCode::Io, "cannot open: " + path.string());
    Checkpoint ck;
    try {
        char magic[4];
        if (!in.read(magic, 4)) throw io::TruncatedInput();
        if (!std::equal(magic, magic + 4, kMagic)) {
            throw CheckpointError(CheckpointErrorCode::BadMagic, "not a checkpoint file: " + path.string());
        }
        const auto version = io::get<std::uint16_t>(in);
        if (version != kCheckpointVersion) {
            throw CheckpointError(CheckpointErrorCode::VersionMismatch,
                                  "checkpoint version " + std::to_string(version));
        }
        ck.kind = io::get_string(in);
        ck.epoch = io::get<std::uint32_t>(in);
        ck.seed = io::get<std::uint64_t>(in);
        ck.config_digest = io::get<std::uint64_t>(in);
        const auto n_attr = io::get<std::uint32_t>(in);
        if (n_attr > kMaxCount) throw CheckpointError(CheckpointErrorCode::Mismatch, "corrupt attribute count");
        for (std::uint32_t i = 0; i < n_attr; ++i) {
            std::string k = io::get_string(in);
            ck.attributes[k] = io::get_string(in);
        }
        const auto n_tensors = io::get<std::uint32_t>(in);
        if (n_tensors > kMaxCount) throw CheckpointError(CheckpointErrorCode::Mismatch, "corrupt tensor count");
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            NamedTensor t;
            t.name = io::get_string(in);
            const auto rank = io::get<std::uint32_t>(in);
            if (rank > 8) throw CheckpointError(CheckpointErrorCode::Mismatch, "corrupt tensor rank");
            std::size_t count = 1;
            for (std::uint32_t r = 0; r < rank; ++r) {
                const auto d = io::get<std::int64_t>(in);
                if (d < 0 || d > (1 << 28)) throw CheckpointError(CheckpointErrorCode::Mismatch, "corrupt tensor dim");
                t.shape.push_back(d);
                count *= static_cast<std::size_t>(d);
            }
            t.data.resize(count);
            io::get_array(in, t.data.data(), count);
            ck.tensors.push_back(std::move(t));
        }
    } catch (const io::TruncatedInput&) {
        throw CheckpointError(CheckpointErrorCode::Truncated, "truncated checkpoint: " + path.string());
    }
    return ck;
}

std::uint64_t file_digest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorCode::Io, "cannot open: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Digest().bytes(bytes.data(), bytes.size()).value();
}

}  // namespace fbwm::checkpoint
