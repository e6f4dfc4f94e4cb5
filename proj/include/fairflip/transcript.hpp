#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fairflip {

// Protocol phases where aborts can land. Values appear in transcripts.
enum class Site : int {
    OuterDefense = 0,   // wrapper's defense batch
    InnerDefense = 1,   // step 1 of the inner protocol
    DeltaBroadcast = 2, // step 2, reconstruction of the shared value
    CoinCall = 3,       // step 3(a)
    LoopDefense = 4,    // step 3(b)
    CoinBroadcast = 5,  // step 3(c)
    HTRound = 6,        // two-party per-round defense call
    HTBroadcast = 7,    // two-party coin share exchange
};

inline const char* site_name(Site s) {
    switch (s) {
        case Site::OuterDefense: return "outer_defense";
        case Site::InnerDefense: return "inner_defense";
        case Site::DeltaBroadcast: return "delta_broadcast";
        case Site::CoinCall: return "coin_call";
        case Site::LoopDefense: return "loop_defense";
        case Site::CoinBroadcast: return "coin_broadcast";
        case Site::HTRound: return "ht_round";
        case Site::HTBroadcast: return "ht_broadcast";
    }
    return "?";
}

struct Event {
    enum class Type : int { Header, OracleCall, Delivery, Broadcast, Abort, Recovery, Output } type;
    int depth = 0;
    int round = 0;           // 0 = before the main loop
    int party = -1;          // acting / receiving party, -1 if n/a
    Site site = Site::OuterDefense;
    std::string kind;        // payload or message tag
    unsigned long subset_mask = 0;
    long ivalue = 0;         // coin value, bank weight, output bit, ...
    double dvalue = 0.0;     // delta digests
    std::string note;
};

struct Transcript {
    // Config echo for the header line.
    int m = 0;
    int t = 0;
    std::uint64_t seed = 0;
    std::string mode = "float";
    std::vector<Event> events;
    int broadcast_rounds = 0;
    int max_depth = 0;

    void push(Event e) {
        if (e.type == Event::Type::Broadcast) ++broadcast_rounds;
        if (e.depth > max_depth) max_depth = e.depth;
        events.push_back(std::move(e));
    }

    nlohmann::ordered_json header_json() const {
        return nlohmann::ordered_json{{"type", "header"}, {"m", m}, {"t", t}, {"seed", seed}, {"mode", mode}};
    }

    static nlohmann::ordered_json event_json(const Event& e) {
        static const char* names[] = {"header", "oracle_call", "delivery", "broadcast", "abort", "recovery", "output"};
        nlohmann::ordered_json j{{"type", names[static_cast<int>(e.type)]},
                                 {"depth", e.depth},
                                 {"round", e.round},
                                 {"site", site_name(e.site)}};
        if (e.party >= 0) j["party"] = e.party;
        if (!e.kind.empty()) j["kind"] = e.kind;
        if (e.subset_mask != 0) j["subset"] = e.subset_mask;
        j["ivalue"] = e.ivalue;
        j["dvalue"] = e.dvalue;
        if (!e.note.empty()) j["note"] = e.note;
        return j;
    }

    void write_jsonl(std::ostream& os) const {
        os << header_json().dump() << "\n";
        for (const auto& e : events) os << event_json(e).dump() << "\n";
    }

    void write_jsonl(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open transcript path: " + path);
        write_jsonl(f);
    }
};

}  // namespace fairflip
