#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "curator/core.hpp"
#include "curator/io/binary.hpp"

namespace curator::io {

/// Access metadata of one vector: its owner and every tenant allowed to read it.
struct AccessRecord {
    Label label{};
    TenantId owner{};
    std::vector<TenantId> tenants;

    friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

inline void validate_access_record(const AccessRecord& r) {
    std::vector<TenantId> sorted = r.tenants;
    std::sort(sorted.begin(), sorted.end());
    CURATOR_THROW_IF_NOT(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                         ErrorCode::validation_error,
                         "label " + std::to_string(to_underlying(r.label)) + ": duplicate tenant");
    CURATOR_THROW_IF_NOT(std::binary_search(sorted.begin(), sorted.end(), r.owner), ErrorCode::validation_error,
                         "label " + std::to_string(to_underlying(r.label)) + ": owner missing from tenants");
}

inline std::string format_access_line(const AccessRecord& r) {
    nlohmann::ordered_json j;
    j["label"] = to_underlying(r.label);
    j["owner"] = to_underlying(r.owner);
    auto& ts = j["tenants"] = nlohmann::ordered_json::array();
    for (TenantId t : r.tenants) {
        ts.push_back(to_underlying(t));
    }
    return j.dump();
}

inline AccessRecord parse_access_line(const std::string& line, std::size_t line_no) {
    auto fail = [&](ErrorCode code, const std::string& what) {
        return Error(code, "access file line " + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw fail(ErrorCode::parse_error, e.what());
    }
    if (!j.is_object() || !j.contains("label") || !j.contains("owner") || !j.contains("tenants")) {
        throw fail(ErrorCode::parse_error, "expected object with label, owner, tenants");
    }
    if (!j["label"].is_number_unsigned() || !j["owner"].is_number_unsigned() || !j["tenants"].is_array()) {
        throw fail(ErrorCode::parse_error, "label and owner must be unsigned integers, tenants an array");
    }
    if (j.size() != 3) {
        throw fail(ErrorCode::parse_error, "unexpected extra fields");
    }
    auto tenant_of = [&](const nlohmann::json& v) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
            throw fail(ErrorCode::parse_error, "tenant ids must be 32-bit unsigned integers");
        }
        return TenantId{v.get<std::uint32_t>()};
    };
    AccessRecord r;
    r.label = Label{j["label"].get<std::uint64_t>()};
    r.owner = tenant_of(j["owner"]);
    for (const auto& t : j["tenants"]) {
        r.tenants.push_back(tenant_of(t));
    }
    try {
        validate_access_record(r);
    } catch (const Error& e) {
        throw fail(ErrorCode::validation_error, e.what());
    }
    return r;
}

/// Streams records one line at a time.
class AccessJsonlReader {
public:
    explicit AccessJsonlReader(const std::filesystem::path& path) : in_(path), path_(path) {
        CURATOR_THROW_IF_NOT(in_.good(), ErrorCode::io_error, "cannot open " + path.string());
    }

    std::optional<AccessRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                // blank lines are allowed only at the very end
                saw_blank_ = true;
                continue;
            }
            CURATOR_THROW_IF_NOT(!saw_blank_, ErrorCode::parse_error,
                                 "access file line " + std::to_string(line_no_) + ": record after blank line");
            return parse_access_line(line, line_no_);
        }
        CURATOR_THROW_IF_NOT(in_.eof(), ErrorCode::io_error, "failed reading " + path_.string());
        return std::nullopt;
    }

    std::size_t line_number() const noexcept { return line_no_; }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    std::size_t line_no_ = 0;
    bool saw_blank_ = false;
};

inline std::vector<AccessRecord> read_access_jsonl(const std::filesystem::path& path) {
    AccessJsonlReader reader(path);
    std::vector<AccessRecord> out;
    while (auto r = reader.next()) {
        out.push_back(std::move(*r));
    }
    return out;
}

inline void write_access_jsonl(const std::filesystem::path& path, const std::vector<AccessRecord>& records) {
    std::string text;
    for (const auto& r : records) {
        validate_access_record(r);
        text += format_access_line(r);
        text += '\n';
    }
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace curator::io
