#include "isbench/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace isbench {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

constexpr std::int16_t kNiftiUInt8 = 2;
constexpr std::int16_t kNiftiInt16 = 4;
constexpr std::int16_t kNiftiFloat32 = 16;

// Header field offsets.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<unsigned char> slurp(const fs::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw Error(Errc::IoFailure, "cannot open " + path.string());
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    for (;;) {
        const int n = gzread(f, buf, sizeof buf);
        if (n < 0) {
            gzclose(f);
            throw Error(Errc::IoFailure, "read error in " + path.string());
        }
        if (n == 0) break;
        out.insert(out.end(), buf, buf + n);
    }
    gzclose(f);
    return out;
}

class HeaderReader {
public:
    HeaderReader(const unsigned char* base, bool swap) : base_(base), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, base_ + offset, sizeof(T));
        if (swap_) std::reverse(raw, raw + sizeof(T));
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

private:
    const unsigned char* base_;
    bool swap_;
};

template <typename T>
void put(std::vector<unsigned char>& buf, std::size_t offset, T value) {
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

std::vector<unsigned char> encode_data(const Volume& v) {
    const auto data = v.data();
    std::vector<unsigned char> out(data.size() * dtype_size(v.dtype()));
    switch (v.dtype()) {
    case DType::UInt8:
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<std::uint8_t>(data[i]);
        break;
    case DType::Int16:
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto s = static_cast<std::int16_t>(data[i]);
            std::memcpy(out.data() + 2 * i, &s, 2);
        }
        break;
    case DType::Float32:
        std::memcpy(out.data(), data.data(), out.size());
        break;
    }
    return out;
}

std::vector<float> decode_data(const unsigned char* src, std::size_t n, DType dtype, bool swap) {
    std::vector<float> out(n);
    const std::size_t sz = dtype_size(dtype);
    unsigned char tmp[4];
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(tmp, src + i * sz, sz);
        if (swap) std::reverse(tmp, tmp + sz);
        switch (dtype) {
        case DType::UInt8: out[i] = static_cast<float>(tmp[0]); break;
        case DType::Int16: {
            std::int16_t s;
            std::memcpy(&s, tmp, 2);
            out[i] = static_cast<float>(s);
            break;
        }
        case DType::Float32: std::memcpy(&out[i], tmp, 4); break;
        }
    }
    return out;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes, bool gzip) {
    if (gzip) {
        gzFile f = gzopen(path.c_str(), "wb6");
        if (f == nullptr) throw Error(Errc::IoFailure, "cannot create " + path.string());
        std::size_t done = 0;
        while (done < bytes.size()) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
            if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw Error(Errc::IoFailure, "write error in " + path.string());
            }
            done += chunk;
        }
        if (gzclose(f) != Z_OK) throw Error(Errc::IoFailure, "close error in " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoFailure, "write error in " + path.string());
}

fs::path native_stem(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".json" || ext == ".rav") return fs::path(path).replace_extension();
    return path;
}

}  // namespace

Volume read_nifti(const fs::path& path) {
    const auto bytes = slurp(path);
    if (bytes.size() < kHeaderSize) throw Error(Errc::MalformedHeader, "file shorter than header");

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        swap = __builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == kHeaderSize;
        if (!swap) throw Error(Errc::MalformedHeader, "sizeof_hdr is not 348");
    }
    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0)
        throw Error(Errc::MalformedHeader, "magic is not \"n+1\"");

    const HeaderReader h(bytes.data(), swap);
    if (h.get<std::int16_t>(kOffDim) != 3)
        throw Error(Errc::MalformedHeader, "dim[0] must be 3");
    const Dims dims{h.get<std::int16_t>(kOffDim + 2), h.get<std::int16_t>(kOffDim + 4),
                    h.get<std::int16_t>(kOffDim + 6)};
    if (!dims.valid()) throw Error(Errc::MalformedHeader, "non-positive dim[1..3]");

    DType dtype;
    switch (h.get<std::int16_t>(kOffDatatype)) {
    case kNiftiUInt8: dtype = DType::UInt8; break;
    case kNiftiInt16: dtype = DType::Int16; break;
    case kNiftiFloat32: dtype = DType::Float32; break;
    default:
        throw Error(Errc::UnsupportedDtype,
                    "NIfTI datatype " + std::to_string(h.get<std::int16_t>(kOffDatatype)));
    }

    const Spacing spacing{h.get<float>(kOffPixdim + 4), h.get<float>(kOffPixdim + 8),
                          h.get<float>(kOffPixdim + 12)};
    if (!(spacing.sx > 0 && spacing.sy > 0 && spacing.sz > 0))
        throw Error(Errc::MalformedHeader, "pixdim[1..3] must be positive");

    const float vox_offset_f = h.get<float>(kOffVoxOffset);
    if (!(vox_offset_f >= static_cast<float>(kHeaderSize)))
        throw Error(Errc::MalformedHeader, "vox_offset smaller than header");
    const auto vox_offset = static_cast<std::size_t>(vox_offset_f);
    const std::size_t need = vox_offset + dims.voxel_count() * dtype_size(dtype);
    if (bytes.size() < need)
        throw Error(Errc::TruncatedData, "expected " + std::to_string(need) + " bytes, got " +
                                             std::to_string(bytes.size()));

    NiftiOrientation o;
    o.qform_code = h.get<std::int16_t>(kOffQformCode);
    o.sform_code = h.get<std::int16_t>(kOffSformCode);
    o.qfac = h.get<float>(kOffPixdim);
    for (int i = 0; i < 3; ++i) {
        o.quatern[i] = h.get<float>(kOffQuatern + 4 * i);
        o.qoffset[i] = h.get<float>(kOffQoffset + 4 * i);
    }
    for (int i = 0; i < 4; ++i) {
        o.srow_x[i] = h.get<float>(kOffSrowX + 4 * i);
        o.srow_y[i] = h.get<float>(kOffSrowY + 4 * i);
        o.srow_z[i] = h.get<float>(kOffSrowZ + 4 * i);
    }
    o.xyzt_units = bytes[kOffXyztUnits];

    return Volume(dims, spacing, dtype,
                  decode_data(bytes.data() + vox_offset, dims.voxel_count(), dtype, swap), o);
}

void write_nifti(const Volume& v, const fs::path& path) {
    const auto& d = v.dims();
    if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767)
        throw Error(Errc::InvalidArgument, "dims exceed NIfTI-1 range");

    std::vector<unsigned char> buf(kVoxOffset, 0);
    put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                 static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, kOffDim + 2 * i, dim[i]);

    std::int16_t code = kNiftiFloat32;
    if (v.dtype() == DType::UInt8) code = kNiftiUInt8;
    if (v.dtype() == DType::Int16) code = kNiftiInt16;
    put<std::int16_t>(buf, kOffDatatype, code);
    put<std::int16_t>(buf, kOffBitpix, static_cast<std::int16_t>(8 * dtype_size(v.dtype())));

    const auto& o = v.orientation();
    const float pixdim[8] = {o.qfac,
                             static_cast<float>(v.spacing().sx),
                             static_cast<float>(v.spacing().sy),
                             static_cast<float>(v.spacing().sz),
                             1.0f, 1.0f, 1.0f, 1.0f};
    for (int i = 0; i < 8; ++i) put<float>(buf, kOffPixdim + 4 * i, pixdim[i]);
    put<float>(buf, kOffVoxOffset, static_cast<float>(kVoxOffset));
    put<float>(buf, kOffSclSlope, 0.0f);
    buf[kOffXyztUnits] = o.xyzt_units;
    put<std::int16_t>(buf, kOffQformCode, o.qform_code);
    put<std::int16_t>(buf, kOffSformCode, o.sform_code);
    for (int i = 0; i < 3; ++i) {
        put<float>(buf, kOffQuatern + 4 * i, o.quatern[i]);
        put<float>(buf, kOffQoffset + 4 * i, o.qoffset[i]);
    }
    for (int i = 0; i < 4; ++i) {
        put<float>(buf, kOffSrowX + 4 * i, o.srow_x[i]);
        put<float>(buf, kOffSrowY + 4 * i, o.srow_y[i]);
        put<float>(buf, kOffSrowZ + 4 * i, o.srow_z[i]);
    }
    std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);

    const auto data = encode_data(v);
    buf.insert(buf.end(), data.begin(), data.end());
    write_bytes(path, buf, ends_with(path.string(), ".gz"));
}

Volume read_native(const fs::path& path) {
    const auto stem = native_stem(path);
    auto json_path = stem;
    json_path += ".json";
    auto raw_path = stem;
    raw_path += ".rav";

    std::ifstream js(json_path);
    if (!js) throw Error(Errc::IoFailure, "cannot open " + json_path.string());
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedHeader, json_path.string() + ": " + e.what());
    }
    Dims dims;
    Spacing spacing;
    DType dtype;
    try {
        const auto& dj = meta.at("dims");
        const auto& sj = meta.at("spacing");
        if (dj.size() != 3 || sj.size() != 3)
            throw Error(Errc::MalformedHeader, "dims and spacing need three entries");
        dims = {dj[0].get<int>(), dj[1].get<int>(), dj[2].get<int>()};
        spacing = {sj[0].get<double>(), sj[1].get<double>(), sj[2].get<double>()};
        dtype = parse_dtype(meta.at("dtype").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedHeader, json_path.string() + ": " + e.what());
    }
    if (!dims.valid()) throw Error(Errc::MalformedHeader, "non-positive dims");

    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw Error(Errc::IoFailure, "cannot open " + raw_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    const std::size_t need = dims.voxel_count() * dtype_size(dtype);
    if (bytes.size() < need)
        throw Error(Errc::TruncatedData, "expected " + std::to_string(need) + " bytes, got " +
                                             std::to_string(bytes.size()));
    return Volume(dims, spacing, dtype, decode_data(bytes.data(), dims.voxel_count(), dtype, false));
}

void write_native(const Volume& v, const fs::path& path) {
    const auto stem = native_stem(path);
    auto json_path = stem;
    json_path += ".json";
    auto raw_path = stem;
    raw_path += ".rav";

    nlohmann::json meta;
    meta["dims"] = {v.dims().nx, v.dims().ny, v.dims().nz};
    meta["spacing"] = {v.spacing().sx, v.spacing().sy, v.spacing().sz};
    meta["dtype"] = std::string(dtype_name(v.dtype()));
    std::ofstream js(json_path, std::ios::trunc);
    if (!js) throw Error(Errc::IoFailure, "cannot create " + json_path.string());
    js << meta.dump(2) << '\n';
    if (!js) throw Error(Errc::IoFailure, "write error in " + json_path.string());
    write_bytes(raw_path, encode_data(v), false);
}

Volume read_volume(const fs::path& path) {
    const auto name = path.string();
    if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return read_nifti(path);
    if (ends_with(name, ".json") || ends_with(name, ".rav")) return read_native(path);
    throw Error(Errc::InvalidArgument, "unrecognized image extension: " + name);
}

void write_volume(const Volume& volume, const fs::path& path) {
    const auto name = path.string();
    if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return write_nifti(volume, path);
    if (ends_with(name, ".json") || ends_with(name, ".rav")) return write_native(volume, path);
    throw Error(Errc::InvalidArgument, "unrecognized image extension: " + name);
}

}  // namespace isbench
