#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "abt/volume.hpp"

namespace abt::io {

// Volume file: "ABTV" | u32 LE header length | header JSON | f64 LE payload,
// voxels in the in-memory order (x fastest, z slowest). Round-trips
// bit-exactly including metadata.
void write_volume(const std::filesystem::path& path, const Volume& vol);
Volume read_volume(const std::filesystem::path& path);

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples). Pixel mapping:
// round-half-up of 65535 * clip((v - window_min) / (window_max - window_min)).
void render_slice_pgm(const Image2D& slice, double window_min, double window_max,
                      const std::filesystem::path& path);

// Test/report helper; returns raw 16-bit values.
struct Pgm16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> pixels;
};
Pgm16 read_pgm16(const std::filesystem::path& path);

// RFC-4180-style CSV: header row, "." decimal separator, LF line endings.
// Doubles print with enough digits to round-trip.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void row(const std::vector<std::string>& cells);
    static std::string number(double v);
    static std::string integer(std::int64_t v);

private:
    std::filesystem::path path_;
    std::string buffer_;
    bool closed_ = false;

public:
    ~CsvWriter();
    void close();  // flushes; called by the destructor
};

}  // namespace abt::io
