#include "templar/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"

namespace templar {

namespace {

class HeaderScanner {
public:
    explicit HeaderScanner(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    long next_int() {
        skip_space_and_comments();
        long v = 0;
        int digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (++digits > 9) raise(ErrorCode::FormatError, "PNM header value too large");
        }
        if (digits == 0) raise(ErrorCode::FormatError, "malformed PNM header");
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance() { ++pos_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        raise(ErrorCode::FormatError, "not a binary PGM/PPM file");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    HeaderScanner scan(bytes);
    const long width = scan.next_int();
    const long height = scan.next_int();
    const long maxval = scan.next_int();
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        raise(ErrorCode::FormatError, "unsupported PNM dimensions or maxval");
    }
    scan.advance();  // single whitespace before raster
    const std::size_t need = static_cast<std::size_t>(width) * height * channels;
    if (scan.pos() + need > bytes.size()) raise(ErrorCode::FormatError, "truncated PNM raster");
    std::vector<double> data(need);
    for (std::size_t i = 0; i < need; ++i) {
        data[i] = static_cast<double>(bytes[scan.pos() + i]) / static_cast<double>(maxval);
    }
    return Image(static_cast<int>(height), static_cast<int>(width), channels, std::move(data));
}

Image read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_pnm(const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        raise(ErrorCode::ShapeMismatch, "PNM needs 1 or 3 channels");
    }
    const std::string header = std::string(img.channels() == 1 ? "P5\n" : "P6\n") +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) +
                               "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.size());
    for (double v : img.values()) {
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    return out;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
    write_file_atomic(path, encode_pnm(img));
}

}  // namespace templar
