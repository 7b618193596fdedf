#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace templar {

/// Binary matrix container shared by every persisted model and store.
///
/// Record layout (all integers little-endian):
///
///   offset  size  field
///   0       4     magic "TMPL"
///   4       2     format version (u16, currently 1)
///   6       2     role tag (u16, ContainerRole)
///   8       8     rows (u64)
///   16      8     cols (u64)
///   24      8·r·c payload, row-major IEEE-754 binary64
///   24+8rc  4     CRC-32 (IEEE 802.3 polynomial) of the payload bytes
///
/// A file holds one or more records back to back; readers require the file to
/// end exactly after the last expected record.
enum class ContainerRole : std::uint16_t {
    Weights = 1,
    Embedding = 2,
    Scorer = 3,
    Cascade = 4,
    Descriptors = 5,
    Aligned = 6,
};

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kRecordHeaderBytes = 24;

const char* to_string(ContainerRole role);

struct MatrixRecord {
    ContainerRole role = ContainerRole::Weights;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<double> values;  // row-major, rows·cols entries

    bool operator==(const MatrixRecord&) const = default;
};

MatrixRecord to_record(ContainerRole role, const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const MatrixRecord& r);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void append_record(std::vector<std::uint8_t>& out, const MatrixRecord& record);

/// Sequential decoder over a byte buffer. Throws FormatError on bad magic,
/// version, role or truncation and CorruptPayload on CRC mismatch.
class RecordReader {
public:
    explicit RecordReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    MatrixRecord next();
    MatrixRecord next(ContainerRole expected_role);
    bool at_end() const noexcept { return offset_ == bytes_.size(); }
    void expect_end() const;
    std::size_t offset() const noexcept { return offset_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

/// Single-record files.
void save_matrix(const std::filesystem::path& path, ContainerRole role, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path, ContainerRole role);

/// Little-endian primitives, also used by the descriptor store's id table.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at);
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at);

}  // namespace templar
