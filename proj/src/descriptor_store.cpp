#include "templar/descriptor_store.hpp"

#include <cstring>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"

namespace templar {

namespace {

constexpr std::uint8_t kIdMagic[4] = {'T', 'I', 'D', 'S'};

bool store_role(ContainerRole role) {
    return role == ContainerRole::Descriptors || role == ContainerRole::Aligned;
}

}  // namespace

DescriptorStore::DescriptorStore(std::size_t dim, ContainerRole role) : dim_(dim), role_(role) {
    if (!store_role(role)) {
        raise(ErrorCode::InvalidArgument, std::string("role ") + to_string(role) +
                                              " cannot back a descriptor store");
    }
}

std::size_t DescriptorStore::processable_count() const {
    std::size_t n = 0;
    for (const auto& [id, v] : entries_) n += v.has_value();
    return n;
}

void DescriptorStore::put(const std::string& media_id, std::vector<double> values) {
    if (values.size() != dim_) {
        raise(ErrorCode::DimMismatch, "store dim " + std::to_string(dim_) + " but '" + media_id +
                                          "' has " + std::to_string(values.size()));
    }
    entries_[media_id] = std::move(values);
}

void DescriptorStore::mark_unprocessable(const std::string& media_id) {
    entries_[media_id] = std::nullopt;
}

const std::vector<double>* DescriptorStore::find(const std::string& media_id) const {
    auto it = entries_.find(media_id);
    if (it == entries_.end() || !it->second) return nullptr;
    return &*it->second;
}

std::vector<std::uint8_t> encode_store(const DescriptorStore& store) {
    std::vector<std::uint8_t> out(std::begin(kIdMagic), std::end(kIdMagic));
    const std::size_t body_start = out.size();
    put_u32(out, static_cast<std::uint32_t>(store.size()));
    MatrixRecord rec;
    rec.role = store.role();
    rec.cols = store.dim();
    for (const auto& [id, values] : store.entries()) {
        out.push_back(values ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(id.size()));
        out.insert(out.end(), id.begin(), id.end());
        if (values) {
            rec.values.insert(rec.values.end(), values->begin(), values->end());
            ++rec.rows;
        }
    }
    put_u32(out, crc32(std::span(out).subspan(body_start)));
    append_record(out, rec);
    return out;
}

DescriptorStore decode_store(std::span<const std::uint8_t> bytes) {
    auto need = [&](std::size_t at, std::size_t n) {
        if (at + n > bytes.size()) raise(ErrorCode::FormatError, "truncated id table");
    };
    need(0, 8);
    if (std::memcmp(bytes.data(), kIdMagic, 4) != 0) {
        raise(ErrorCode::FormatError, "bad store magic");
    }
    const std::uint32_t count = get_u32(bytes, 4);
    std::size_t at = 8;
    std::vector<std::pair<std::string, bool>> ids;
    ids.reserve(std::min<std::size_t>(count, bytes.size() / 5));
    for (std::uint32_t i = 0; i < count; ++i) {
        need(at, 5);
        const std::uint8_t flag = bytes[at];
        if (flag > 1) raise(ErrorCode::FormatError, "bad entry flag " + std::to_string(flag));
        const std::uint32_t len = get_u32(bytes, at + 1);
        at += 5;
        need(at, len);
        ids.emplace_back(std::string(reinterpret_cast<const char*>(bytes.data() + at), len), flag == 1);
        at += len;
    }
    need(at, 4);
    if (crc32(bytes.subspan(4, at - 4)) != get_u32(bytes, at)) {
        raise(ErrorCode::CorruptPayload, "CRC mismatch in store id table");
    }
    at += 4;

    RecordReader reader(bytes.subspan(at));
    MatrixRecord rec = reader.next();
    reader.expect_end();
    if (!store_role(rec.role)) {
        raise(ErrorCode::FormatError, std::string("unexpected role ") + to_string(rec.role) +
                                          " in descriptor store");
    }
    std::size_t processable = 0;
    for (const auto& [id, ok] : ids) processable += ok;
    if (rec.rows != processable) {
        raise(ErrorCode::FormatError, "id table lists " + std::to_string(processable) +
                                          " stored vectors but payload has " +
                                          std::to_string(rec.rows) + " rows");
    }

    DescriptorStore store(static_cast<std::size_t>(rec.cols), rec.role);
    std::size_t row = 0;
    const std::string* prev = nullptr;
    for (const auto& [id, ok] : ids) {
        if (prev && !(*prev < id)) {
            raise(ErrorCode::FormatError, "store ids not strictly increasing at '" + id + "'");
        }
        prev = &id;
        if (ok) {
            const auto first = rec.values.begin() + static_cast<std::ptrdiff_t>(row * rec.cols);
            store.put(id, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rec.cols)));
            ++row;
        } else {
            store.mark_unprocessable(id);
        }
    }
    return store;
}

void store_write(const DescriptorStore& store, const std::filesystem::path& path) {
    write_file_atomic(path, encode_store(store));
}

DescriptorStore store_read(const std::filesystem::path& path) {
    return decode_store(read_file_bytes(path));
}

}  // namespace templar
