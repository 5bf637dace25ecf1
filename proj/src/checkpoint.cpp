#include "swinvid/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "swinvid/errors.hpp"

namespace swinvid {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'V', '1'};

void put_u32(std::ostream& out, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw format_error(path + ": truncated checkpoint");
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw format_error(path + ": truncated checkpoint");
    }
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Array>>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(kMagic, 4);
    for (const auto& [name, tensor] : entries) {
        if (!tensor.valid()) throw contract_error("cannot save invalid tensor: " + name);
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<uint32_t>(tensor.rank()));
        for (size_t d : tensor.shape()) put_u32(out, static_cast<uint32_t>(d));
        for (size_t i = 0; i < tensor.numel(); ++i) put_f64(out, tensor.data()[i]);
    }
    if (!out) throw io_error(path + ": write failed");
}

std::vector<std::pair<std::string, Array>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw format_error(path + ": not a checkpoint file (bad magic)");
    }
    std::vector<std::pair<std::string, Array>> out;
    while (in.peek() != std::ifstream::traits_type::eof()) {
        const uint32_t name_len = get_u32(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) {
            throw format_error(path + ": truncated checkpoint");
        }
        const uint32_t rank = get_u32(in, path);
        if (rank == 0 || rank > 8) {
            throw format_error(path + ": implausible tensor rank for '" + name + "'");
        }
        std::vector<size_t> shape(rank);
        size_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            shape[i] = get_u32(in, path);
            numel *= shape[i];
        }
        std::vector<double> data(numel);
        for (size_t i = 0; i < numel; ++i) data[i] = get_f64(in, path);
        out.emplace_back(std::move(name), Array::from_data(std::move(shape), std::move(data)));
    }
    return out;
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Array>>& params) {
    auto stored = read_checkpoint(path);
    for (const auto& [name, target] : params) {
        const Array* found = nullptr;
        for (const auto& [sname, tensor] : stored) {
            if (sname == name) {
                found = &tensor;
                break;
            }
        }
        if (!found) {
            throw validation_error(path + ": checkpoint is missing parameter '" + name + "'");
        }
        if (found->shape() != target.shape()) {
            throw validation_error(path + ": parameter '" + name + "' has shape " +
                                   found->shape_str() + " but the model expects " +
                                   target.shape_str());
        }
        Array dst = target;
        std::memcpy(dst.data(), found->data(), found->numel() * sizeof(double));
    }
    if (stored.size() != params.size()) {
        for (const auto& [sname, tensor] : stored) {
            bool known = false;
            for (const auto& [name, target] : params) {
                if (name == sname) {
                    known = true;
                    break;
                }
            }
            if (!known) {
                throw validation_error(path + ": checkpoint carries unknown parameter '" +
                                       sname + "'");
            }
        }
    }
}

}  // namespace swinvid
