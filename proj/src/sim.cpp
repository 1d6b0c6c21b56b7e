#include "ccstress/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "ccstress/event_queue.hpp"

namespace ccstress {

const char* to_string(LogSource source)
{
    switch (source) {
    case LogSource::Sim:
        return "sim";
    case LogSource::Tcp:
        return "tcp";
    case LogSource::Cca:
        return "cca";
    }
    return "?";
}

std::string_view to_string(FuzzMode mode)
{
    return mode == FuzzMode::LinkFuzz ? "link" : "traffic";
}

FuzzMode fuzz_mode_from_string(std::string_view s)
{
    if (s == "link") {
        return FuzzMode::LinkFuzz;
    }
    if (s == "traffic") {
        return FuzzMode::TrafficFuzz;
    }
    throw std::invalid_argument("unknown fuzz mode '" + std::string(s) + "' (expected link or traffic)");
}

TraceMode trace_mode_for(FuzzMode mode)
{
    return mode == FuzzMode::LinkFuzz ? TraceMode::Link : TraceMode::Traffic;
}

void SimConfig::check() const
{
    if (queue_capacity_pkts < 1) {
        throw std::invalid_argument("sim.queue_capacity_pkts must be >= 1");
    }
    if (prop_delay_us < 0 || access_delay_us < 0) {
        throw std::invalid_argument("sim.prop_delay_us and sim.access_delay_us must be >= 0");
    }
    if (!(bottleneck_rate_pps > 0.0) || !std::isfinite(bottleneck_rate_pps)) {
        throw std::invalid_argument("sim.bottleneck_rate_pps must be positive");
    }
    if (duration_us <= 0 || mtu_bytes <= 0) {
        throw std::invalid_argument("sim.duration_us and sim.mtu_bytes must be positive");
    }
    if (sender_start_us < 0 || throughput_window_us <= 0 || queue_sample_us <= 0) {
        throw std::invalid_argument("sim.sender_start_us must be >= 0 and the window and sample periods > 0");
    }
    tcp.check();
}

double SimResult::utilization() const
{
    if (capacity_bps <= 0.0 || duration_us <= 0) {
        return 0.0;
    }
    const double bits = static_cast<double>(goodput_segments) * static_cast<double>(mtu_bytes) * 8.0;
    return bits * 1e6 / static_cast<double>(duration_us) / capacity_bps;
}

std::uint64_t SimResult::digest() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::int64_t v) {
        auto u = static_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            h ^= (u >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto* f : {&sender, &cross}) {
        mix(f->sent);
        mix(f->delivered);
        mix(f->dropped);
        mix(f->queued_at_end);
        mix(f->on_wire_at_end);
    }
    mix(goodput_segments);
    mix(tcp.transmissions);
    mix(tcp.retransmissions);
    mix(tcp.fast_retransmits);
    mix(tcp.rtos);
    for (const auto& d : deliveries) {
        mix(d.arrival_us);
        mix(d.delay_us);
        mix(d.seq);
    }
    for (const auto& q : queue_series) {
        mix(q.occupancy_pkts);
    }
    return h;
}

namespace {

enum class Ev : std::uint8_t { Service, CrossArrival, SenderArrival, SinkArrival, AckArrival, Rto, Delack, Wake };

struct Pkt {
    std::int64_t seq = 0;
    std::int64_t sent_us = 0;
    bool cross = false;
};

struct Payload {
    Ev type = Ev::Wake;
    Pkt pkt;
    std::uint64_t token = 0;  ///< trace index for trace events, timer generation for timers
    Ack ack;
};

class Engine {
public:
    Engine(const SimConfig& cfg, const PacketTrace& trace, std::unique_ptr<Cca> cca)
        : cfg_(cfg), trace_(trace)
    {
        if (cfg_.record_events) {
            log_ = std::make_unique<EventLog>();
        }
        TcpConfig tcp = cfg_.tcp;
        tcp.mss_bytes = cfg_.mtu_bytes;
        result_.cca_name = std::string(cca->name());
        sender_ = std::make_unique<TcpSender>(tcp, std::move(cca), log_.get());
        receiver_ = std::make_unique<TcpReceiver>(tcp);
        tx_time_us_ = static_cast<std::int64_t>(std::llround(1e6 / cfg_.bottleneck_rate_pps));
        tx_time_us_ = std::max<std::int64_t>(tx_time_us_, 1);
    }

    SimResult run()
    {
        result_.duration_us = cfg_.duration_us;
        result_.mtu_bytes = cfg_.mtu_bytes;
        const double bits = static_cast<double>(cfg_.mtu_bytes) * 8.0;
        if (cfg_.mode == FuzzMode::TrafficFuzz) {
            result_.capacity_bps = 1e6 / static_cast<double>(tx_time_us_) * bits;
        } else {
            result_.capacity_bps = static_cast<double>(trace_.size()) * bits * 1e6 / static_cast<double>(cfg_.duration_us);
        }
        if (!trace_.timestamps_us.empty()) {
            q_.schedule(trace_.timestamps_us[0],
                        cfg_.mode == FuzzMode::LinkFuzz ? EventClass::LinkService : EventClass::Arrival,
                        Payload{cfg_.mode == FuzzMode::LinkFuzz ? Ev::Service : Ev::CrossArrival, {}, 0, {}});
        }
        q_.schedule(cfg_.sender_start_us, EventClass::App, Payload{Ev::Wake, {}, 0, {}});
        wake_pending_ = true;
        wake_at_ = cfg_.sender_start_us;

        while (!q_.empty() && q_.next_time() < cfg_.duration_us) {
            auto e = q_.pop();
            sample_queue(e.time_us);
            dispatch(e.time_us, e.payload);
        }
        sample_queue(cfg_.duration_us);

        for (const auto& p : queue_) {
            ++(p.cross ? result_.cross : result_.sender).queued_at_end;
        }
        result_.sender.on_wire_at_end = on_wire_[0];
        result_.cross.on_wire_at_end = on_wire_[1];
        result_.tcp = sender_->counters();
        if (log_) {
            result_.events = log_->take();
        }
        return std::move(result_);
    }

private:
    void sample_queue(std::int64_t upto)
    {
        while (next_sample_us_ <= upto) {
            result_.queue_series.push_back({next_sample_us_, static_cast<std::int64_t>(queue_.size())});
            next_sample_us_ += cfg_.queue_sample_us;
        }
    }

    void dispatch(std::int64_t now, const Payload& p)
    {
        switch (p.type) {
        case Ev::Service:
            on_service(now, p);
            break;
        case Ev::CrossArrival: {
            ++result_.cross.sent;
            gateway_arrival(Pkt{static_cast<std::int64_t>(p.token), now, true}, now);
            const auto next = p.token + 1;
            if (next < trace_.size()) {
                q_.schedule(trace_.timestamps_us[next], EventClass::Arrival, Payload{Ev::CrossArrival, {}, next, {}});
            }
            break;
        }
        case Ev::SenderArrival:
            --on_wire_[0];
            gateway_arrival(p.pkt, now);
            break;
        case Ev::SinkArrival:
            on_sink(now, p.pkt);
            break;
        case Ev::AckArrival:
            sender_->on_ack(p.ack, now);
            pump(now);
            break;
        case Ev::Rto:
            if (p.token == rto_token_) {
                rto_sched_.reset();
                sender_->on_rto(now);
                pump(now);
            }
            break;
        case Ev::Delack:
            if (p.token == delack_token_) {
                delack_sched_.reset();
                if (auto ack = receiver_->on_delack_timer(now)) {
                    send_ack(now, *ack);
                }
                sync_delack();
            }
            break;
        case Ev::Wake:
            if (wake_pending_ && now == wake_at_) {
                wake_pending_ = false;
            }
            pump(now);
            break;
        }
    }

    void on_service(std::int64_t now, const Payload& p)
    {
        if (cfg_.mode == FuzzMode::LinkFuzz) {
            if (!queue_.empty()) {
                forward(now, queue_.front());
                queue_.pop_front();
            }
            const auto next = p.token + 1;
            if (next < trace_.size()) {
                q_.schedule(trace_.timestamps_us[next], EventClass::LinkService, Payload{Ev::Service, {}, next, {}});
            }
            return;
        }
        forward(now, queue_.front());
        queue_.pop_front();
        if (!queue_.empty()) {
            q_.schedule(now + tx_time_us_, EventClass::LinkService, Payload{Ev::Service, {}, 0, {}});
        } else {
            link_busy_ = false;
        }
    }

    void forward(std::int64_t now, const Pkt& pkt)
    {
        ++on_wire_[pkt.cross ? 1 : 0];
        q_.schedule(now + cfg_.prop_delay_us, EventClass::Arrival, Payload{Ev::SinkArrival, pkt, 0, {}});
    }

    void gateway_arrival(const Pkt& pkt, std::int64_t now)
    {
        if (static_cast<std::int64_t>(queue_.size()) >= cfg_.queue_capacity_pkts) {
            ++(pkt.cross ? result_.cross : result_.sender).dropped;
            if (log_) {
                log_->add(now, LogSource::Sim, "drop", pkt.seq, 0.0, pkt.cross ? "cross" : "sender");
            }
            return;
        }
        queue_.push_back(pkt);
        result_.max_queue_occupancy = std::max<std::int64_t>(result_.max_queue_occupancy, static_cast<std::int64_t>(queue_.size()));
        if (cfg_.mode == FuzzMode::TrafficFuzz && !link_busy_) {
            link_busy_ = true;
            q_.schedule(now + tx_time_us_, EventClass::LinkService, Payload{Ev::Service, {}, 0, {}});
        }
    }

    void on_sink(std::int64_t now, const Pkt& pkt)
    {
        --on_wire_[pkt.cross ? 1 : 0];
        if (pkt.cross) {
            ++result_.cross.delivered;
            return;
        }
        ++result_.sender.delivered;
        const bool fresh = !receiver_->has(pkt.seq);
        if (fresh) {
            ++result_.goodput_segments;
        }
        result_.deliveries.push_back({now, now - pkt.sent_us, pkt.seq, fresh});
        if (auto ack = receiver_->on_data(pkt.seq, now)) {
            send_ack(now, *ack);
        }
        sync_delack();
    }

    void send_ack(std::int64_t now, const Ack& ack)
    {
        Payload p;
        p.type = Ev::AckArrival;
        p.ack = ack;
        q_.schedule(now + cfg_.prop_delay_us, EventClass::Arrival, p);
    }

    void pump(std::int64_t now)
    {
        while (auto seg = sender_->poll_send(now)) {
            ++result_.sender.sent;
            const Pkt pkt{seg->seq, now, false};
            if (cfg_.access_delay_us == 0) {
                gateway_arrival(pkt, now);
            } else {
                ++on_wire_[0];
                q_.schedule(now + cfg_.access_delay_us, EventClass::Arrival, Payload{Ev::SenderArrival, pkt, 0, {}});
            }
        }
        if (sender_->blocked(now) == SendBlock::Pacing) {
            const std::int64_t at = sender_->next_send_time_us();
            if (!wake_pending_ || wake_at_ != at) {
                wake_pending_ = true;
                wake_at_ = at;
                q_.schedule(at, EventClass::App, Payload{Ev::Wake, {}, 0, {}});
            }
        }
        sync_rto();
    }

    void sync_rto()
    {
        const auto d = sender_->rto_deadline_us();
        if (d == rto_sched_) {
            return;
        }
        rto_sched_ = d;
        ++rto_token_;
        if (d) {
            q_.schedule(*d, EventClass::Timer, Payload{Ev::Rto, {}, rto_token_, {}});
        }
    }

    void sync_delack()
    {
        const auto d = receiver_->delack_deadline_us();
        if (d == delack_sched_) {
            return;
        }
        delack_sched_ = d;
        ++delack_token_;
        if (d) {
            q_.schedule(*d, EventClass::Timer, Payload{Ev::Delack, {}, delack_token_, {}});
        }
    }

    const SimConfig& cfg_;
    const PacketTrace& trace_;
    std::unique_ptr<EventLog> log_;
    std::unique_ptr<TcpSender> sender_;
    std::unique_ptr<TcpReceiver> receiver_;
    EventQueue<Payload> q_;
    std::deque<Pkt> queue_;
    bool link_busy_ = false;
    std::int64_t tx_time_us_ = 1000;
    std::int64_t on_wire_[2] = {0, 0};
    std::int64_t next_sample_us_ = 0;
    std::optional<std::int64_t> rto_sched_;
    std::uint64_t rto_token_ = 0;
    std::optional<std::int64_t> delack_sched_;
    std::uint64_t delack_token_ = 0;
    bool wake_pending_ = false;
    std::int64_t wake_at_ = 0;
    SimResult result_;
};

}  // namespace

SimResult run_sim(const SimConfig& config, const PacketTrace& trace, std::unique_ptr<Cca> cca)
{
    config.check();
    if (trace.mode != trace_mode_for(config.mode)) {
        throw std::invalid_argument("trace mode does not match simulation mode");
    }
    if (trace.duration_us != config.duration_us) {
        throw std::invalid_argument("trace duration " + std::to_string(trace.duration_us) +
                                    " us does not match simulation duration " + std::to_string(config.duration_us) + " us");
    }
    if (auto err = validate(trace); !err.empty()) {
        throw std::invalid_argument("invalid trace: " + err);
    }
    if (!cca) {
        throw std::invalid_argument("run_sim needs a CCA");
    }
    Engine engine(config, trace, std::move(cca));
    return engine.run();
}

SimResult run_sim(const SimConfig& config, const PacketTrace& trace)
{
    CcaConfig cc = config.cca;
    cc.mss_bytes = config.mtu_bytes;
    cc.seed = derive_seed(config.rng_seed, {0xcca});
    return run_sim(config, trace, make_cca(cc));
}

std::vector<double> windowed_throughput(const SimResult& result, std::int64_t window_us)
{
    if (window_us <= 0) {
        throw std::invalid_argument("window_us must be positive");
    }
    const std::int64_t n = (result.duration_us + window_us - 1) / window_us;
    std::vector<double> bytes(static_cast<std::size_t>(n), 0.0);
    for (const auto& d : result.deliveries) {
        if (!d.fresh || d.arrival_us >= result.duration_us) {
            continue;
        }
        bytes[static_cast<std::size_t>(d.arrival_us / window_us)] += static_cast<double>(result.mtu_bytes);
    }
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t len = std::min(window_us, result.duration_us - i * window_us);
        bytes[static_cast<std::size_t>(i)] = bytes[static_cast<std::size_t>(i)] * 8.0 / static_cast<double>(len);
    }
    return bytes;
}

std::string throughput_csv(const SimResult& result, std::int64_t window_us)
{
    std::ostringstream out;
    out << "window_start_us,window_end_us,throughput_mbps\n";
    const auto series = windowed_throughput(result, window_us);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto start = static_cast<std::int64_t>(i) * window_us;
        out << start << ',' << std::min(start + window_us, result.duration_us) << ',' << series[i] << '\n';
    }
    return out.str();
}

std::string delays_csv(const SimResult& result)
{
    std::ostringstream out;
    out << "arrival_us,seq,delay_us,fresh\n";
    for (const auto& d : result.deliveries) {
        out << d.arrival_us << ',' << d.seq << ',' << d.delay_us << ',' << (d.fresh ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string queue_csv(const SimResult& result)
{
    std::ostringstream out;
    out << "time_us,occupancy_pkts\n";
    for (const auto& q : result.queue_series) {
        out << q.time_us << ',' << q.occupancy_pkts << '\n';
    }
    return out.str();
}

std::string events_csv(const SimResult& result)
{
    std::ostringstream out;
    out << "time_us,source,event,seq,value,detail\n";
    for (const auto& e : result.events) {
        std::string detail = e.detail;
        if (detail.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char c : detail) {
                q += c;
                if (c == '"') {
                    q += '"';
                }
            }
            detail = q + "\"";
        }
        out << e.time_us << ',' << to_string(e.source) << ',' << e.kind << ',' << e.seq << ',' << e.value << ','
            << detail << '\n';
    }
    return out.str();
}

}  // namespace ccstress
