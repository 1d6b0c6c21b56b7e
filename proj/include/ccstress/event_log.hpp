#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ccstress {

enum class LogSource { Sim, Tcp, Cca };

/// One row of the simulation event log.
struct LogEvent {
    std::int64_t time_us = 0;
    LogSource source = LogSource::Sim;
    std::string kind;
    std::int64_t seq = -1;
    double value = 0.0;
    std::string detail;
};

/// Append-only event sink. A null EventLog* means logging is disabled;
/// callers check the pointer before formatting anything.
class EventLog {
public:
    void add(std::int64_t time_us, LogSource source, std::string kind, std::int64_t seq = -1,
             double value = 0.0, std::string detail = {})
    {
        events_.push_back(LogEvent{time_us, source, std::move(kind), seq, value, std::move(detail)});
    }

    const std::vector<LogEvent>& events() const { return events_; }
    std::vector<LogEvent> take() { return std::move(events_); }

private:
    std::vector<LogEvent> events_;
};

const char* to_string(LogSource source);

}  // namespace ccstress
