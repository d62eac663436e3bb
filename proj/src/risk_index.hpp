#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "switchiv/dataset.hpp"

namespace switchiv {

// Subjects sorted by follow-up time descending so the at-risk set at each
// successive event time is a shrinking prefix. aalen and ivest iterate
// subjects in this shared order so their score sums match bit for bit.
struct RiskIndex {
    std::vector<size_t> order;                  // subject indices, T desc, ties by index
    std::vector<size_t> n_at_risk;              // prefix length per grid time
    std::vector<std::vector<size_t>> events_at; // subject indices with dN = 1 per grid time

    RiskIndex(const Dataset& d, const EventGrid& grid) {
        const auto& subj = d.subjects;
        order.resize(subj.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return subj[a].time > subj[b].time; });
        n_at_risk.resize(grid.times.size());
        events_at.resize(grid.times.size());
        size_t m = subj.size();
        for (size_t j = 0; j < grid.times.size(); ++j) {
            double t = grid.times[j];
            while (m > 0 && subj[order[m - 1]].time < t) --m;
            n_at_risk[j] = m;
        }
        for (size_t i = 0; i < subj.size(); ++i) {
            if (!subj[i].event) continue;
            auto it = std::lower_bound(grid.times.begin(), grid.times.end(), subj[i].time);
            if (it != grid.times.end() && *it == subj[i].time)
                events_at[static_cast<size_t>(it - grid.times.begin())].push_back(i);
        }
        for (auto& v : events_at) std::sort(v.begin(), v.end());
    }
};

}  // namespace switchiv
