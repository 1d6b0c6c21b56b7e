#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ccstress/trace.hpp"

namespace ccstress {

/// Raised for malformed trace input. `line` is 1-based; 0 when unknown.
class TraceParseError : public std::runtime_error {
public:
    TraceParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

nlohmann::json trace_to_json(const PacketTrace& trace);
PacketTrace trace_from_json(const nlohmann::json& j);

std::string write_trace_json(const PacketTrace& trace);
PacketTrace parse_trace_json(const std::string& text);

/// One integer millisecond per line, one line per 1500-byte delivery
/// opportunity. Microseconds are rounded to the nearest millisecond.
/// Traffic traces are refused.
std::string write_mahimahi(const PacketTrace& trace);

/// Reads a MahiMahi link trace. When `duration_us` is not given it becomes the
/// smallest whole second strictly after the last timestamp.
PacketTrace parse_mahimahi(const std::string& text, std::optional<std::int64_t> duration_us = {});

PacketTrace load_trace_file(const std::filesystem::path& path);
void save_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ccstress
