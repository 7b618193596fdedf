#include "templar/container.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <string>

#include <zlib.h>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"

namespace templar {

namespace {

constexpr std::uint8_t kMagic[4] = {'T', 'M', 'P', 'L'};

bool known_role(std::uint16_t tag) { return tag >= 1 && tag <= 6; }

}  // namespace

const char* to_string(ContainerRole role) {
    switch (role) {
        case ContainerRole::Weights: return "weights";
        case ContainerRole::Embedding: return "embedding";
        case ContainerRole::Scorer: return "scorer";
        case ContainerRole::Cascade: return "cascade";
        case ContainerRole::Descriptors: return "descriptors";
        case ContainerRole::Aligned: return "aligned";
    }
    return "unknown";
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
    return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | in[at + i];
    return v;
}
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | in[at + i];
    return v;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto chunk = static_cast<uInt>(
            std::min<std::size_t>(bytes.size() - done, std::numeric_limits<uInt>::max()));
        crc = ::crc32(crc, bytes.data() + done, chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

MatrixRecord to_record(ContainerRole role, const Eigen::MatrixXd& m) {
    MatrixRecord r;
    r.role = role;
    r.rows = static_cast<std::uint64_t>(m.rows());
    r.cols = static_cast<std::uint64_t>(m.cols());
    r.values.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r.values[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return r;
}

Eigen::MatrixXd to_matrix(const MatrixRecord& r) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(r.cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = r.values[static_cast<std::size_t>(i * m.cols() + j)];
    return m;
}

void append_record(std::vector<std::uint8_t>& out, const MatrixRecord& record) {
    if (record.values.size() != record.rows * record.cols) {
        raise(ErrorCode::DimMismatch, "record payload does not match its dims");
    }
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u16(out, kContainerVersion);
    put_u16(out, static_cast<std::uint16_t>(record.role));
    put_u64(out, record.rows);
    put_u64(out, record.cols);
    const std::size_t payload_start = out.size();
    for (double v : record.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    const std::uint32_t crc =
        crc32(std::span(out).subspan(payload_start, record.values.size() * 8));
    put_u32(out, crc);
}

MatrixRecord RecordReader::next() {
    const std::size_t remaining = bytes_.size() - offset_;
    if (remaining < kRecordHeaderBytes) {
        raise(ErrorCode::FormatError, "truncated record header at byte " + std::to_string(offset_));
    }
    if (std::memcmp(bytes_.data() + offset_, kMagic, 4) != 0) {
        raise(ErrorCode::FormatError, "bad magic at byte " + std::to_string(offset_));
    }
    const std::uint16_t version = get_u16(bytes_, offset_ + 4);
    if (version != kContainerVersion) {
        raise(ErrorCode::FormatError, "unsupported version: expected " +
                                          std::to_string(kContainerVersion) + ", found " +
                                          std::to_string(version));
    }
    const std::uint16_t role = get_u16(bytes_, offset_ + 6);
    if (!known_role(role)) {
        raise(ErrorCode::FormatError, "unknown role tag " + std::to_string(role));
    }
    MatrixRecord r;
    r.role = static_cast<ContainerRole>(role);
    r.rows = get_u64(bytes_, offset_ + 8);
    r.cols = get_u64(bytes_, offset_ + 16);
    const std::uint64_t budget = (remaining - kRecordHeaderBytes) / 8;
    if (r.cols != 0 && r.rows > budget / r.cols) {
        raise(ErrorCode::FormatError, "dims " + std::to_string(r.rows) + "x" +
                                          std::to_string(r.cols) + " exceed the available payload");
    }
    const std::size_t payload_bytes = static_cast<std::size_t>(r.rows * r.cols) * 8;
    if (remaining < kRecordHeaderBytes + payload_bytes + 4) {
        raise(ErrorCode::FormatError, "truncated record: dims " + std::to_string(r.rows) + "x" +
                                          std::to_string(r.cols) + " need " +
                                          std::to_string(payload_bytes) + " payload bytes");
    }
    const std::size_t payload_at = offset_ + kRecordHeaderBytes;
    const auto payload = bytes_.subspan(payload_at, payload_bytes);
    if (crc32(payload) != get_u32(bytes_, payload_at + payload_bytes)) {
        raise(ErrorCode::CorruptPayload, "CRC mismatch in " + std::string(to_string(r.role)) +
                                             " record at byte " + std::to_string(offset_));
    }
    r.values.resize(static_cast<std::size_t>(r.rows * r.cols));
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        r.values[i] = std::bit_cast<double>(get_u64(bytes_, payload_at + 8 * i));
    }
    offset_ = payload_at + payload_bytes + 4;
    return r;
}

MatrixRecord RecordReader::next(ContainerRole expected_role) {
    const std::size_t at = offset_;
    MatrixRecord r = next();
    if (r.role != expected_role) {
        raise(ErrorCode::FormatError, std::string("role mismatch at byte ") + std::to_string(at) +
                                          ": expected " + to_string(expected_role) + ", found " +
                                          to_string(r.role));
    }
    return r;
}

void RecordReader::expect_end() const {
    if (!at_end()) {
        raise(ErrorCode::FormatError, std::to_string(bytes_.size() - offset_) +
                                          " trailing bytes after the last record");
    }
}

void save_matrix(const std::filesystem::path& path, ContainerRole role, const Eigen::MatrixXd& m) {
    std::vector<std::uint8_t> bytes;
    append_record(bytes, to_record(role, m));
    write_file_atomic(path, bytes);
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path, ContainerRole role) {
    const auto bytes = read_file_bytes(path);
    RecordReader reader(bytes);
    MatrixRecord r = reader.next(role);
    reader.expect_end();
    return to_matrix(r);
}

}  // namespace templar
