#include "ccstress/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ccstress {

using nlohmann::json;

json trace_to_json(const PacketTrace& trace)
{
    return json{{"mode", std::string(to_string(trace.mode))},
                {"duration_us", trace.duration_us},
                {"packet_budget", trace.packet_budget},
                {"timestamps_us", trace.timestamps_us}};
}

PacketTrace trace_from_json(const json& j)
{
    PacketTrace t;
    try {
        t.mode = trace_mode_from_string(j.at("mode").get<std::string>());
        t.duration_us = j.at("duration_us").get<std::int64_t>();
        t.packet_budget = j.at("packet_budget").get<std::int64_t>();
        t.timestamps_us = j.at("timestamps_us").get<std::vector<std::int64_t>>();
    } catch (const json::exception& e) {
        throw TraceParseError(std::string("bad trace object: ") + e.what(), 0);
    } catch (const std::invalid_argument& e) {
        throw TraceParseError(e.what(), 0);
    }
    if (auto err = validate(t); !err.empty()) {
        throw TraceParseError("invalid trace: " + err, 0);
    }
    return t;
}

std::string write_trace_json(const PacketTrace& trace)
{
    return trace_to_json(trace).dump() + "\n";
}

PacketTrace parse_trace_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw TraceParseError(e.what(), line);
    }
    return trace_from_json(j);
}

std::string write_mahimahi(const PacketTrace& trace)
{
    if (trace.mode != TraceMode::Link) {
        throw std::invalid_argument("traffic traces cannot be exported as MahiMahi link traces");
    }
    std::string out;
    out.reserve(trace.size() * 6);
    for (auto us : trace.timestamps_us) {
        out += std::to_string((us + 500) / 1000);
        out += '\n';
    }
    return out;
}

PacketTrace parse_mahimahi(const std::string& text, std::optional<std::int64_t> duration_us)
{
    PacketTrace t;
    t.mode = TraceMode::Link;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            continue;
        }
        auto e = line.find_last_not_of(" \t\r");
        std::string_view tok(line.data() + b, e - b + 1);
        std::int64_t ms = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), ms);
        if (ec != std::errc() || p != tok.data() + tok.size() || ms < 0) {
            throw TraceParseError("expected a non-negative integer millisecond, got '" + std::string(tok) + "'", lineno);
        }
        if (!t.timestamps_us.empty() && ms * 1000 < t.timestamps_us.back()) {
            throw TraceParseError("timestamps must be sorted", lineno);
        }
        t.timestamps_us.push_back(ms * 1000);
    }
    if (duration_us) {
        t.duration_us = *duration_us;
    } else {
        const std::int64_t last = t.timestamps_us.empty() ? 0 : t.timestamps_us.back();
        t.duration_us = (last / 1'000'000 + 1) * 1'000'000;
    }
    t.packet_budget = static_cast<std::int64_t>(t.timestamps_us.size());
    if (auto err = validate(t); !err.empty()) {
        throw TraceParseError("invalid trace: " + err, 0);
    }
    return t;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_text_file(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << contents;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

PacketTrace load_trace_file(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        return parse_trace_json(text);
    }
    return parse_mahimahi(text);
}

}  // namespace ccstress
