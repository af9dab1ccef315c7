#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>
#include <vector>

#include "octoflow/comm/schedule.hpp"

namespace octoflow::comm {

//! One aggregated message: everything rank `src` sends to rank `dst` for one (level, pattern)
//! exchange, numbered by the per-(level, pattern) exchange counter.
struct MessageKey {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    int level = 0;
    Pattern pattern = Pattern::equal;
    std::uint64_t seq = 0;

    auto tie() const { return std::make_tuple(src, dst, level, int(pattern), seq); }
    friend bool operator<(const MessageKey& a, const MessageKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const MessageKey& a, const MessageKey& b) { return a.tie() == b.tie(); }
};

inline std::string to_string(const MessageKey& k) {
    std::ostringstream os;
    os << "(" << k.src << "->" << k.dst << ", level " << k.level << ", " << to_string(k.pattern) << ", #" << k.seq << ")";
    return os.str();
}

class TransportError : public Error {
public:
    using Error::Error;
};

//! In-process mailboxes, one per virtual rank. send() never blocks; receive() waits up to the
//! configured timeout and then reports every message still queued for that rank.
class Transport {
public:
    explicit Transport(std::uint32_t ranks, std::chrono::milliseconds timeout = std::chrono::minutes(10))
        : boxes_(ranks), timeout_(timeout) {
        if (ranks == 0) throw Error("transport needs at least one rank");
    }

    std::uint32_t ranks() const { return std::uint32_t(boxes_.size()); }
    void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

    void send(const MessageKey& key, std::vector<double> payload) {
        check(key);
        Mailbox& box = boxes_[key.dst];
        {
            std::lock_guard lock(box.mutex);
            if (!box.queue.emplace(key, std::move(payload)).second)
                throw TransportError("duplicate message " + to_string(key));
            ++box.delivered[{key.src, int(key.pattern)}];
        }
        box.cv.notify_all();
    }

    std::vector<double> receive(const MessageKey& key) {
        check(key);
        Mailbox& box = boxes_[key.dst];
        std::unique_lock lock(box.mutex);
        const bool ok = box.cv.wait_for(lock, timeout_, [&] { return box.queue.count(key) > 0; });
        if (!ok) {
            std::ostringstream os;
            os << "timed out waiting for " << to_string(key) << "; queued for rank " << key.dst << ":";
            if (box.queue.empty()) os << " none";
            for (auto& [k, v] : box.queue) os << " " << to_string(k);
            throw TransportError(os.str());
        }
        auto node = box.queue.extract(key);
        return std::move(node.mapped());
    }

    //! Messages delivered to `dst` from `src` with the given pattern so far.
    std::uint64_t message_count(std::uint32_t src, std::uint32_t dst, Pattern p) const {
        const Mailbox& box = boxes_.at(dst);
        std::lock_guard lock(box.mutex);
        auto it = box.delivered.find({src, int(p)});
        return it == box.delivered.end() ? 0 : it->second;
    }

    std::size_t pending() const {
        std::size_t n = 0;
        for (auto& b : boxes_) {
            std::lock_guard lock(b.mutex);
            n += b.queue.size();
        }
        return n;
    }

private:
    struct Mailbox {
        mutable std::mutex mutex;
        std::condition_variable cv;
        std::map<MessageKey, std::vector<double>> queue;
        std::map<std::pair<std::uint32_t, int>, std::uint64_t> delivered;
    };

    void check(const MessageKey& key) const {
        if (key.src >= boxes_.size() || key.dst >= boxes_.size()) throw TransportError("rank out of range in " + to_string(key));
    }

    std::vector<Mailbox> boxes_;
    std::chrono::milliseconds timeout_;
};

} // namespace octoflow::comm
