#include "qsmpad/volume_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace qsmpad {

namespace {

void write_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    ByteReader(const std::string& path, std::vector<char> bytes)
        : path_(path), bytes_(std::move(bytes)) {}

    std::size_t size() const { return bytes_.size(); }
    std::size_t pos() const { return pos_; }
    const char* raw(std::size_t at) const { return bytes_.data() + at; }

    void need(std::size_t n, const char* what) const {
        if (pos_ + n > bytes_.size())
            throw FormatError(path_ + ": truncated while reading " + std::string(what) +
                              "; expected at least " + std::to_string(pos_ + n) + " bytes, file has " +
                              std::to_string(bytes_.size()));
    }

    std::uint32_t u32_le() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64_le() {
        need(8, "f64");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    void skip(std::size_t n) { pos_ += n; }

private:
    std::string path_;
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const auto n = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<char> bytes(static_cast<std::size_t>(n));
    if (n > 0) f.read(bytes.data(), n);
    if (!f) throw IoError("read failed: " + path);
    return bytes;
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

GridMeta read_native_header(ByteReader& r, const std::string& path) {
    GridMeta meta;
    const std::uint32_t version = r.u32_le();
    if (version != 1)
        throw FormatError(path + ": unsupported format version " + std::to_string(version));
    for (int i = 0; i < 3; ++i) {
        const std::uint32_t d = r.u32_le();
        if (d == 0 || d > 1u << 24)
            throw ValidationError(path + ": nonpositive or absurd dimension " + std::to_string(d));
        meta.dims[i] = static_cast<int>(d);
    }
    for (int i = 0; i < 3; ++i) meta.voxel_size[i] = r.f64_le();
    for (int i = 0; i < 3; ++i) meta.b0_dir[i] = r.f64_le();
    try {
        meta.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return meta;
}

std::string native_header_bytes(const char* magic, const GridMeta& meta) {
    std::string out;
    out.reserve(kNativeHeaderBytes);
    out.append(magic, 4);
    write_u32_le(out, 1);
    for (int i = 0; i < 3; ++i) write_u32_le(out, static_cast<std::uint32_t>(meta.dims[i]));
    for (int i = 0; i < 3; ++i) write_f64_le(out, meta.voxel_size[i]);
    for (int i = 0; i < 3; ++i) write_f64_le(out, meta.b0_dir[i]);
    return out;
}

// --- NIfTI-1 ---------------------------------------------------------------

std::int16_t ni_i16(const char* p, bool swap) {
    unsigned char a = static_cast<unsigned char>(p[0]), b = static_cast<unsigned char>(p[1]);
    std::uint16_t v = swap ? static_cast<std::uint16_t>((a << 8) | b)
                           : static_cast<std::uint16_t>((b << 8) | a);
    std::int16_t out;
    std::memcpy(&out, &v, 2);
    return out;
}

std::int32_t ni_i32(const char* p, bool swap) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int shift = swap ? (24 - 8 * i) : (8 * i);
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << shift;
    }
    std::int32_t out;
    std::memcpy(&out, &v, 4);
    return out;
}

float ni_f32(const char* p, bool swap) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int shift = swap ? (24 - 8 * i) : (8 * i);
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << shift;
    }
    float out;
    std::memcpy(&out, &v, 4);
    return out;
}

double ni_f64(const char* p, bool swap) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int shift = swap ? (56 - 8 * i) : (8 * i);
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << shift;
    }
    double out;
    std::memcpy(&out, &v, 8);
    return out;
}

Volume3D load_nifti(const std::string& path, const std::vector<char>& bytes) {
    if (bytes.size() < 348) throw FormatError(path + ": NIfTI header shorter than 348 bytes");
    const char* h = bytes.data();

    bool swap = false;
    std::int32_t sizeof_hdr = ni_i32(h, false);
    if (sizeof_hdr != 348) {
        if (ni_i32(h, true) == 348) {
            swap = true;
        } else {
            throw FormatError(path + ": bad NIfTI sizeof_hdr");
        }
    }
    if (std::memcmp(h + 344, "n+1", 3) != 0)
        throw FormatError(path + ": not a single-file NIfTI-1 image (magic n+1 missing)");

    const std::int16_t ndim = ni_i16(h + 40, swap);
    if (ndim != 3)
        throw UnsupportedShapeError(path + ": only 3D scalar NIfTI images are supported, dim[0]=" +
                                    std::to_string(ndim));

    GridMeta meta;
    for (int i = 0; i < 3; ++i) {
        const std::int16_t d = ni_i16(h + 40 + 2 * (i + 1), swap);
        if (d < 1) throw ValidationError(path + ": nonpositive NIfTI dimension " + std::to_string(d));
        meta.dims[i] = d;
    }
    for (int i = 0; i < 3; ++i) {
        const float p = ni_f32(h + 76 + 4 * (i + 1), swap);
        if (!(p > 0.0f))
            throw ValidationError(path + ": nonpositive NIfTI voxel size " + std::to_string(p));
        meta.voxel_size[i] = static_cast<double>(p);
    }
    meta.b0_dir = {0.0, 0.0, 1.0};

    const std::int16_t datatype = ni_i16(h + 70, swap);
    const float vox_offset_f = ni_f32(h + 108, swap);
    float scl_slope = ni_f32(h + 112, swap);
    const float scl_inter = ni_f32(h + 116, swap);
    if (scl_slope == 0.0f) scl_slope = 1.0f;

    std::size_t elem_size;
    switch (datatype) {
        case 2: elem_size = 1; break;   // uint8
        case 16: elem_size = 4; break;  // float32
        case 64: elem_size = 8; break;  // float64
        default:
            throw FormatError(path + ": unsupported NIfTI datatype " + std::to_string(datatype) +
                              " (uint8/float32/float64 only)");
    }

    const std::size_t n = meta.voxel_count();
    const std::size_t offset = static_cast<std::size_t>(vox_offset_f);
    if (offset < 348) throw FormatError(path + ": NIfTI vox_offset below header size");
    if (bytes.size() < offset + n * elem_size)
        throw FormatError(path + ": truncated NIfTI payload; expected " +
                          std::to_string(offset + n * elem_size) + " bytes, file has " +
                          std::to_string(bytes.size()));

    Volume3D vol(meta);
    const char* p = bytes.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
        double v;
        switch (datatype) {
            case 2: v = static_cast<double>(static_cast<unsigned char>(p[i])); break;
            case 16: v = static_cast<double>(ni_f32(p + 4 * i, swap)); break;
            default: v = ni_f64(p + 8 * i, swap); break;
        }
        vol.data[i] = static_cast<double>(scl_slope) * v + static_cast<double>(scl_inter);
    }
    vol.validate();
    return vol;
}

} // namespace

Volume3D load_volume(const std::string& path) {
    std::vector<char> bytes = slurp(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "QSMV", 4) == 0) {
        ByteReader r(path, std::move(bytes));
        r.skip(4);
        GridMeta meta = read_native_header(r, path);
        const std::size_t n = meta.voxel_count();
        r.need(n * 8, "f64 payload");
        Volume3D vol(meta);
        for (std::size_t i = 0; i < n; ++i) vol.data[i] = r.f64_le();
        if (r.pos() != r.size())
            throw FormatError(path + ": trailing bytes after payload");
        vol.validate();
        return vol;
    }
    if (bytes.size() >= 348 && ni_i32(bytes.data(), false) == 348) return load_nifti(path, bytes);
    if (bytes.size() >= 348 && ni_i32(bytes.data(), true) == 348) return load_nifti(path, bytes);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "QSMM", 4) == 0)
        throw FormatError(path + ": file is a mask (QSMM), expected a volume");
    throw FormatError(path + ": unrecognized volume format (neither QSMV nor NIfTI-1)");
}

void save_volume(const Volume3D& vol, const std::string& path) {
    vol.validate();
    std::string out = native_header_bytes("QSMV", vol.meta);
    out.reserve(kNativeHeaderBytes + vol.data.size() * 8);
    for (double v : vol.data) write_f64_le(out, v);
    spit(path, out);
}

Mask3D load_mask(const std::string& path) {
    std::vector<char> bytes = slurp(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "QSMM", 4) == 0) {
        ByteReader r(path, std::move(bytes));
        r.skip(4);
        GridMeta meta = read_native_header(r, path);
        const std::size_t n = meta.voxel_count();
        r.need(n, "u8 payload");
        Mask3D mask(meta);
        const char* p = r.raw(r.pos());
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned char v = static_cast<unsigned char>(p[i]);
            if (v > 1) throw FormatError(path + ": mask payload byte out of {0,1}");
            mask.data[i] = v;
        }
        r.skip(n);
        if (r.pos() != r.size())
            throw FormatError(path + ": trailing bytes after payload");
        return mask;
    }
    // Fall back to loading as a volume and binarizing; covers NIfTI masks.
    return mask_from_volume(load_volume(path));
}

void save_mask(const Mask3D& mask, const std::string& path) {
    mask.validate();
    std::string out = native_header_bytes("QSMM", mask.meta);
    out.reserve(kNativeHeaderBytes + mask.data.size());
    for (auto v : mask.data) out.push_back(static_cast<char>(v));
    spit(path, out);
}

} // namespace qsmpad
