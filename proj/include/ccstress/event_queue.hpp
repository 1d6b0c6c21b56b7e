#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

namespace ccstress {

/// Tie-break classes for events scheduled at the same microsecond.
enum class EventClass : std::uint8_t {
    LinkService = 0,
    Arrival = 1,
    Timer = 2,
    App = 3,
};

/// Time-ordered pending events. Events at equal times dequeue by class, then
/// by insertion order. Popping never moves the clock backwards.
template <typename Payload>
class EventQueue {
public:
    struct Entry {
        std::int64_t time_us;
        EventClass cls;
        std::uint64_t seq;
        Payload payload;
    };

    void schedule(std::int64_t time_us, EventClass cls, Payload payload)
    {
        if (time_us < now_) {
            throw std::logic_error("event scheduled in the past");
        }
        heap_.push(Entry{time_us, cls, next_seq_++, std::move(payload)});
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    std::int64_t now() const { return now_; }
    std::int64_t next_time() const { return heap_.top().time_us; }

    Entry pop()
    {
        Entry e = heap_.top();
        heap_.pop();
        if (e.time_us < now_) {
            throw std::logic_error("event queue went back in time");
        }
        now_ = e.time_us;
        return e;
    }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.time_us != b.time_us) {
                return a.time_us > b.time_us;
            }
            if (a.cls != b.cls) {
                return a.cls > b.cls;
            }
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::int64_t now_ = 0;
    std::uint64_t next_seq_ = 0;
};

}  // namespace ccstress
