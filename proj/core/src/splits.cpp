#include "mmdg/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mmdg/error.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

namespace {

void require_two_by_two(const DatasetManifest& m) {
    std::set<std::string> scenarios, locations;
    for (const auto& [s, l] : m.domains) {
        scenarios.insert(s);
        locations.insert(l);
    }
    if (scenarios.size() < 2 || locations.size() < 2)
        throw ConfigError("splits need >= 2 scenarios and >= 2 locations, have " +
                          std::to_string(scenarios.size()) + " scenario(s) and " + std::to_string(locations.size()) +
                          " location(s)");
}

DomainList resolve_designated(const DatasetManifest& m, const DomainList& designated) {
    if (designated.empty()) return m.domains;
    for (const auto& d : designated)
        if (std::find(m.domains.begin(), m.domains.end(), d) == m.domains.end())
            throw ConfigError("designated test domain " + domain_name(d.first, d.second) + " not in manifest");
    return designated;
}

}  // namespace

std::vector<SplitSpec> make_splits(const DatasetManifest& manifest, const std::vector<ClipRecord>& records,
                                   const DomainList& designated) {
    require_two_by_two(manifest);
    std::vector<SplitSpec> splits;
    for (const auto& [scen, loc] : resolve_designated(manifest, designated)) {
        SplitSpec sp;
        sp.held_out_scenario = scen;
        sp.held_out_location = loc;
        for (const auto& r : records) {
            if (r.scenario == scen && r.location == loc)
                sp.test_ids.push_back(r.clip_id);
            else if (r.scenario != scen && r.location != loc)
                sp.train_ids.push_back(r.clip_id);
            // clips sharing exactly one axis belong to neither side
        }
        if (sp.test_ids.empty())
            throw ConfigError("test domain " + domain_name(scen, loc) + " has zero clips");
        splits.push_back(std::move(sp));
    }
    return splits;
}

std::vector<SplitSpec> make_seen_domain_splits(const DatasetManifest& manifest,
                                               const std::vector<ClipRecord>& records, double test_fraction,
                                               uint64_t seed, const DomainList& designated) {
    require_two_by_two(manifest);
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw ConfigError("test_fraction must be in (0, 1), got " + std::to_string(test_fraction));
    std::vector<SplitSpec> splits;
    for (const auto& [scen, loc] : resolve_designated(manifest, designated)) {
        std::vector<size_t> domain_rows;
        for (size_t i = 0; i < records.size(); ++i)
            if (records[i].scenario == scen && records[i].location == loc) domain_rows.push_back(i);
        if (domain_rows.empty()) throw ConfigError("test domain " + domain_name(scen, loc) + " has zero clips");

        Rng rng(Rng::derive(seed, fnv1a64_str(domain_name(scen, loc))));
        rng.shuffle(domain_rows);
        size_t n_test = static_cast<size_t>(std::lround(test_fraction * static_cast<double>(domain_rows.size())));
        n_test = std::clamp<size_t>(n_test, 1, domain_rows.size() - 1);

        std::vector<bool> is_test(records.size(), false);
        for (size_t k = 0; k < n_test; ++k) is_test[domain_rows[k]] = true;

        SplitSpec sp;
        sp.held_out_scenario = scen;
        sp.held_out_location = loc;
        for (size_t i = 0; i < records.size(); ++i) {
            if (is_test[i])
                sp.test_ids.push_back(records[i].clip_id);
            else
                sp.train_ids.push_back(records[i].clip_id);
        }
        splits.push_back(std::move(sp));
    }
    return splits;
}

}  // namespace mmdg
