#include "int2int/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "int2int/errors.hpp"

namespace int2int {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', '2', 'I', 'C', 'K', 'P', 'T', '\n'};

class Writer {
public:
    template <typename U>
    void put(U v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(U));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    void put_string32(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename U>
    U get() {
        U v;
        std::memcpy(&v, take(sizeof(U)), sizeof(U));
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (n > size_ - pos_) throw IntegrityError("checkpoint truncated");
        const auto* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    std::string get_string(std::size_t n) {
        const auto* p = take(n);
        return {reinterpret_cast<const char*>(p), n};
    }
    [[nodiscard]] bool done() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

template <typename T>
NamedArray NamedArray::from_matrix(std::string name, const nn::Matrix<T>& m) {
    NamedArray a;
    a.name = std::move(name);
    a.dtype = std::is_same_v<T, float> ? Dtype::f32 : Dtype::f64;
    a.shape = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
    a.payload.resize(static_cast<std::size_t>(m.size()) * sizeof(T));
    std::memcpy(a.payload.data(), m.data(), a.payload.size());
    return a;
}

template <typename T>
void NamedArray::to_matrix(nn::Matrix<T>& m) const {
    const Dtype want = std::is_same_v<T, float> ? Dtype::f32 : Dtype::f64;
    if (dtype != want) throw IntegrityError("array " + name + ": dtype mismatch");
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) {
        throw IntegrityError("array " + name + ": shape mismatch");
    }
    if (payload.size() != static_cast<std::size_t>(m.size()) * sizeof(T)) {
        throw IntegrityError("array " + name + ": payload size mismatch");
    }
    std::memcpy(m.data(), payload.data(), payload.size());
}

template NamedArray NamedArray::from_matrix(std::string, const nn::Matrix<float>&);
template NamedArray NamedArray::from_matrix(std::string, const nn::Matrix<double>&);
template void NamedArray::to_matrix(nn::Matrix<float>&) const;
template void NamedArray::to_matrix(nn::Matrix<double>&) const;

const NamedArray* CheckpointData::find(std::string_view name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    Writer w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put(kCheckpointVersion);
    const std::string meta = data.metadata.dump();
    w.put(static_cast<std::uint64_t>(meta.size()));
    w.put_bytes(meta.data(), meta.size());
    w.put(static_cast<std::uint64_t>(data.vocabulary.size()));
    for (const auto& t : data.vocabulary) w.put_string32(t);
    w.put(static_cast<std::uint64_t>(data.arrays.size()));
    for (const auto& a : data.arrays) {
        w.put_string32(a.name);
        w.put(static_cast<std::uint8_t>(a.dtype));
        w.put(static_cast<std::uint32_t>(a.shape.size()));
        for (auto d : a.shape) w.put(d);
        w.put(static_cast<std::uint64_t>(a.payload.size()));
        w.put_bytes(a.payload.data(), a.payload.size());
    }
    w.put(checksum(w.bytes.data(), w.bytes.size()));

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IntegrityError(path.string() + " is not a checkpoint");
    }
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (checksum(bytes.data(), bytes.size() - 4) != stored) throw IntegrityError("checksum mismatch in " + path.string());

    Reader r(bytes.data() + sizeof(kMagic), bytes.size() - sizeof(kMagic) - 4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    CheckpointData data;
    try {
        data.metadata = nlohmann::json::parse(r.get_string(r.get<std::uint64_t>()));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("bad checkpoint metadata: ") + e.what());
    }
    const auto n_tokens = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_tokens; ++i) data.vocabulary.push_back(r.get_string(r.get<std::uint32_t>()));
    const auto n_arrays = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_arrays; ++i) {
        NamedArray a;
        a.name = r.get_string(r.get<std::uint32_t>());
        const auto dtype = r.get<std::uint8_t>();
        if (dtype > 1) throw IntegrityError("unknown dtype in array " + a.name);
        a.dtype = static_cast<Dtype>(dtype);
        const auto rank = r.get<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.get<std::int64_t>());
        const auto n = r.get<std::uint64_t>();
        const auto* p = r.take(n);
        a.payload.assign(p, p + n);
        data.arrays.push_back(std::move(a));
    }
    if (!r.done()) throw IntegrityError("trailing bytes in checkpoint");
    return data;
}

}  // namespace int2int
