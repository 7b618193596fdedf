#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "templar/container.hpp"

namespace templar {

/// Map media_id → fixed-dimension vector. Media that could not be processed
/// are kept as explicit `unprocessable` entries so downstream evaluation can
/// apply the missing-detection policies.
///
/// On disk: an id table followed by one matrix record holding the processable
/// rows in id order.
///
///   "TIDS" | u32 count | count × (u8 flag, u32 byte length, id bytes) | u32 CRC-32
///
/// flag is 1 for a stored vector and 0 for unprocessable; the CRC covers
/// everything between the magic and itself.
class DescriptorStore {
public:
    explicit DescriptorStore(std::size_t dim = 0, ContainerRole role = ContainerRole::Descriptors);

    std::size_t dim() const noexcept { return dim_; }
    ContainerRole role() const noexcept { return role_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t processable_count() const;

    /// Throws DimMismatch when values.size() != dim().
    void put(const std::string& media_id, std::vector<double> values);
    void mark_unprocessable(const std::string& media_id);

    bool contains(const std::string& media_id) const { return entries_.contains(media_id); }
    /// nullptr when the id is absent or unprocessable.
    const std::vector<double>* find(const std::string& media_id) const;

    const std::map<std::string, std::optional<std::vector<double>>>& entries() const noexcept {
        return entries_;
    }

    bool operator==(const DescriptorStore&) const = default;

private:
    std::size_t dim_;
    ContainerRole role_;
    std::map<std::string, std::optional<std::vector<double>>> entries_;
};

std::vector<std::uint8_t> encode_store(const DescriptorStore& store);
DescriptorStore decode_store(std::span<const std::uint8_t> bytes);

void store_write(const DescriptorStore& store, const std::filesystem::path& path);
DescriptorStore store_read(const std::filesystem::path& path);

}  // namespace templar
