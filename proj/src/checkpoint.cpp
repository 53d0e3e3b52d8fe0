#include "dapt/checkpoint.hpp"

#include "dapt/binary_io.hpp"
#include "dapt/hashing.hpp"

#include <algorithm>

namespace dapt::train {

namespace {

constexpr std::string_view kMagic = "DAPTCKPT";
constexpr std::size_t kDigestSize = 32;

} // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
    ByteWriter w;
    w.raw(kMagic);
    w.u32(kCheckpointFormatVersion);
    w.str(model::config_to_json(c.params.config));
    const auto named = c.params.named();
    w.u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& nt : named) {
        w.str(nt.name);
        const auto& shape = nt.tensor.shape();
        w.u32(static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) {
            w.u64(d);
        }
        for (double v : nt.tensor.data()) {
            w.f64(v);
        }
    }
    w.u8(c.moments ? 1 : 0);
    if (c.moments) {
        const auto& m = *c.moments;
        if (m.first.size() != named.size() || m.second.size() != named.size()) {
            throw CheckpointError("checkpoint: optimizer moments do not match parameters");
        }
        w.u64(m.step);
        for (std::size_t i = 0; i < named.size(); ++i) {
            if (m.first[i].size() != named[i].tensor.size() || m.second[i].size() != named[i].tensor.size()) {
                throw CheckpointError("checkpoint: moment size mismatch for " + named[i].name);
            }
            for (double v : m.first[i]) {
                w.f64(v);
            }
            for (double v : m.second[i]) {
                w.f64(v);
            }
        }
    }
    w.u64(c.meta.steps_completed);
    w.u64(c.meta.epochs_completed);
    w.f64(c.meta.final_loss);
    w.u64(c.meta.seed);
    w.str(c.meta.parent_hash);
    w.str(c.meta.phase);
    const Digest digest = sha256(w.bytes());
    w.raw(std::string_view(reinterpret_cast<const char*>(digest.data()), digest.size()));
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + kDigestSize || bytes.substr(0, kMagic.size()) != kMagic) {
        throw CheckpointError("checkpoint: not a checkpoint file (bad magic or too short)");
    }
    const auto body = bytes.substr(0, bytes.size() - kDigestSize);
    const Digest digest = sha256(body);
    if (!std::equal(digest.begin(), digest.end(), bytes.begin() + static_cast<std::ptrdiff_t>(body.size()),
                    [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
        throw CheckpointError("checkpoint: integrity hash mismatch (file is corrupt or truncated)");
    }
    try {
        ByteReader r(body, "checkpoint");
        r.raw(kMagic.size());
        const std::uint32_t version = r.u32();
        if (version != kCheckpointFormatVersion) {
            throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version) +
                                  " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
        }
        Checkpoint c;
        c.params = model::allocate_parameters(model::config_from_json(r.str()));
        const auto named = c.params.named();
        const std::uint32_t count = r.u32();
        if (count != named.size()) {
            throw CheckpointError("checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                                  std::to_string(count));
        }
        for (const auto& nt : named) {
            const std::string name = r.str();
            if (name != nt.name) {
                throw CheckpointError("checkpoint: expected tensor '" + nt.name + "', found '" + name + "'");
            }
            nn::Shape shape(r.u32());
            for (auto& d : shape) {
                d = r.u64();
            }
            if (shape != nt.tensor.shape()) {
                throw CheckpointError("checkpoint: tensor '" + name + "' has shape " + nn::shape_string(shape) +
                                      ", config implies " + nn::shape_string(nt.tensor.shape()));
            }
            auto tensor = nt.tensor;
            for (double& v : tensor.mutable_data()) {
                v = r.f64();
            }
        }
        if (r.u8() != 0) {
            AdamState m;
            m.step = r.u64();
            for (const auto& nt : named) {
                std::vector<double> first(nt.tensor.size());
                std::vector<double> second(nt.tensor.size());
                for (double& v : first) {
                    v = r.f64();
                }
                for (double& v : second) {
                    v = r.f64();
                }
                m.first.push_back(std::move(first));
                m.second.push_back(std::move(second));
            }
            c.moments = std::move(m);
        }
        c.meta.steps_completed = r.u64();
        c.meta.epochs_completed = r.u64();
        c.meta.final_loss = r.f64();
        c.meta.seed = r.u64();
        c.meta.parent_hash = r.str();
        c.meta.phase = r.str();
        if (!r.done()) {
            throw CheckpointError("checkpoint: trailing bytes after metadata");
        }
        return c;
    } catch (const FormatError& e) {
        throw CheckpointError(std::string("checkpoint: malformed body: ") + e.what());
    } catch (const model::ConfigError& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
}

std::string checkpoint_hash(const Checkpoint& checkpoint) {
    const std::string bytes = serialize_checkpoint(checkpoint);
    return sha256_hex(std::string_view(bytes).substr(0, bytes.size() - kDigestSize));
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    write_file_bytes(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto file = path;
    if (std::filesystem::is_directory(file)) {
        file /= kCheckpointFileName;
    }
    if (!std::filesystem::exists(file)) {
        throw CheckpointError("checkpoint not found: " + file.string());
    }
    return deserialize_checkpoint(read_file_bytes(file));
}

void save_model_package(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_checkpoint(checkpoint, dir / kCheckpointFileName);
    write_file_bytes(dir / kConfigFileName, model::config_to_json(checkpoint.params.config));
}

} // namespace dapt::train
