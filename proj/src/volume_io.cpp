#include "abt/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace abt::io {

static_assert(std::endian::native == std::endian::little,
              "volume payloads are written as little-endian doubles");

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'A', 'B', 'T', 'V'};

std::string units_to_string(VolumeUnits u) {
    return u == VolumeUnits::suvr ? "SUVR" : "arbitrary";
}

VolumeUnits units_from_string(const std::string& s) {
    if (s == "SUVR") return VolumeUnits::suvr;
    if (s == "arbitrary") return VolumeUnits::arbitrary;
    throw HeaderMismatch("unknown units tag: " + s);
}

}  // namespace

void write_volume(const std::filesystem::path& path, const Volume& vol) {
    if (static_cast<std::int64_t>(vol.voxels.size()) != vol.numel()) {
        throw ShapeMismatch("voxel array does not match dims");
    }
    const json header{{"version", 1},
                      {"dims", vol.dims},
                      {"spacing_mm", vol.spacing_mm},
                      {"units", units_to_string(vol.units)}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    const char lenbuf[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                            static_cast<char>((len >> 16) & 0xff),
                            static_cast<char>((len >> 24) & 0xff)};
    out.write(lenbuf, 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(vol.voxels.data()),
              static_cast<std::streamsize>(vol.voxels.size() * sizeof(double)));
    if (!out) throw Error("short write to " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw BadMagic("not a volume file: " + path.string());
    }
    unsigned char lenbuf[4];
    in.read(reinterpret_cast<char*>(lenbuf), 4);
    if (!in) throw TruncatedPayload("missing header length in " + path.string());
    const std::uint32_t len = static_cast<std::uint32_t>(lenbuf[0]) |
                              (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                              (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                              (static_cast<std::uint32_t>(lenbuf[3]) << 24);
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) throw TruncatedPayload("header shorter than declared in " + path.string());

    Volume vol;
    try {
        const json header = json::parse(header_str);
        const auto dims = header.at("dims").get<std::vector<int>>();
        const auto spacing = header.at("spacing_mm").get<std::vector<double>>();
        if (dims.size() != 3 || spacing.size() != 3) {
            throw HeaderMismatch("dims/spacing must have 3 entries");
        }
        for (int d : dims) {
            if (d < 1) throw HeaderMismatch("non-positive dimension");
        }
        vol.dims = {dims[0], dims[1], dims[2]};
        vol.spacing_mm = {spacing[0], spacing[1], spacing[2]};
        vol.units = units_from_string(header.at("units").get<std::string>());
    } catch (const json::exception& e) {
        throw HeaderMismatch(std::string("bad volume header: ") + e.what());
    }

    const std::int64_t expected = vol.numel();
    vol.voxels.resize(static_cast<std::size_t>(expected));
    in.read(reinterpret_cast<char*>(vol.voxels.data()),
            static_cast<std::streamsize>(expected * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(expected * sizeof(double))) {
        throw TruncatedPayload("payload shorter than dims imply in " + path.string());
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw HeaderMismatch("payload longer than dims imply in " + path.string());
    }
    return vol;
}

void render_slice_pgm(const Image2D& slice, double window_min, double window_max,
                      const std::filesystem::path& path) {
    if (!(window_max > window_min)) throw InvalidWindow("window_max must exceed window_min");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    char header[64];
    const int header_len =
        std::snprintf(header, sizeof(header), "P5\n%d %d\n65535\n", slice.width, slice.height);
    out.write(header, header_len);
    const double span = window_max - window_min;
    for (double v : slice.pixels) {
        double t = (v - window_min) / span;
        t = std::min(1.0, std::max(0.0, t));
        const auto q = static_cast<std::uint16_t>(std::floor(65535.0 * t + 0.5));
        const char bytes[2] = {static_cast<char>((q >> 8) & 0xff),  // PGM is big-endian
                               static_cast<char>(q & 0xff)};
        out.write(bytes, 2);
    }
    if (!out) throw Error("short write to " + path.string());
}

Pgm16 read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw BadMagic("not a P5 PGM: " + path.string());
    Pgm16 img;
    int maxval = 0;
    in >> img.width >> img.height >> maxval;
    if (maxval != 65535) throw HeaderMismatch("expected 16-bit PGM");
    in.get();  // single whitespace after maxval
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (auto& px : img.pixels) {
        const int hi = in.get();
        const int lo = in.get();
        if (hi < 0 || lo < 0) throw TruncatedPayload("PGM pixel data ends early");
        px = static_cast<std::uint16_t>((hi << 8) | lo);
    }
    return img;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) {}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        const std::string& cell = cells[i];
        if (cell.find_first_of(",\"\n") != std::string::npos) {
            buffer_ += '"';
            for (char c : cell) {
                if (c == '"') buffer_ += '"';
                buffer_ += c;
            }
            buffer_ += '"';
        } else {
            buffer_ += cell;
        }
    }
    buffer_ += '\n';
}

std::string CsvWriter::number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string CsvWriter::integer(std::int64_t v) { return std::to_string(v); }

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    std::ofstream out(path_, std::ios::binary);
    if (!out) throw Error("cannot open " + path_.string() + " for writing");
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw Error("short write to " + path_.string());
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; an explicit close() surfaces errors
    }
}

}  // namespace abt::io
