// SPDX-License-Identifier: Apache-2.0
//
// Task descriptors and the training grid: (compression ratio, control-channel
// SNR, channel type) tuples enumerated in a fixed order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace psic {

enum class ChannelType : std::uint8_t { kLos = 0, kNlos = 1 };

inline const char* channel_name(ChannelType t) { return t == ChannelType::kLos ? "los" : "nlos"; }

inline ChannelType parse_channel(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "los") return ChannelType::kLos;
    if (s == "nlos") return ChannelType::kNlos;
    throw std::invalid_argument("unknown channel type '" + s + "' (expected los or nlos)");
}

// Shortest decimal form, e.g. 0.125 -> "0.125", 15.0 -> "15".
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct TaskDescriptor {
    double cr = 0.25;
    double snr_db = 15.0;
    ChannelType channel = ChannelType::kNlos;

    bool operator==(const TaskDescriptor& o) const {
        return cr == o.cr && snr_db == o.snr_db && channel == o.channel;
    }
    bool operator!=(const TaskDescriptor& o) const { return !(*this == o); }
};

// Stable identifier used in file names, logs and CSV cells.
inline std::string task_key(const TaskDescriptor& t) {
    return "cr" + format_number(t.cr) + "_snr" + format_number(t.snr_db) + "_" + channel_name(t.channel);
}

struct TaskGrid {
    std::vector<double> crs = {0.125, 0.25, 0.5};
    std::vector<double> snrs_db = {10.0, 15.0};
    std::vector<ChannelType> channels = {ChannelType::kLos, ChannelType::kNlos};

    // Enumeration order is fixed (cr-major, then snr, then channel); task
    // index in this order keys seed substreams and the prompt bank.
    std::vector<TaskDescriptor> tasks() const {
        std::vector<TaskDescriptor> out;
        for (double cr : crs)
            for (double snr : snrs_db)
                for (ChannelType ch : channels) out.push_back({cr, snr, ch});
        return out;
    }

    int size() const {
        return static_cast<int>(crs.size() * snrs_db.size() * channels.size());
    }

    int task_index(const TaskDescriptor& t) const {
        const auto all = tasks();
        for (std::size_t i = 0; i < all.size(); ++i)
            if (all[i] == t) return static_cast<int>(i);
        return -1;
    }

    // Index of cr within the configured ratios, -1 when off-grid.
    int cr_index(double cr) const {
        for (std::size_t i = 0; i < crs.size(); ++i)
            if (crs[i] == cr) return static_cast<int>(i);
        return -1;
    }

    double max_cr() const { return *std::max_element(crs.begin(), crs.end()); }
};

// Latent length for a compression ratio over an H×W surface.
inline int latent_length(double cr, int h, int w) {
    return static_cast<int>(std::lround(cr * h * w));
}

}  // namespace psic
