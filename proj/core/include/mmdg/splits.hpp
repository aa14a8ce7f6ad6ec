#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmdg/dataset.hpp"

namespace mmdg {

/// One leave-one-(scenario, location)-out train/test partition.
struct SplitSpec {
    std::string held_out_scenario;
    std::string held_out_location;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    std::string name() const { return domain_name(held_out_scenario, held_out_location); }
};

using DomainList = std::vector<std::pair<std::string, std::string>>;

/// Strict leave-both-out splits: the test set is every clip of the held-out
/// domain; the train set contains no clip sharing its scenario OR its
/// location. One split per designated domain (defaults to every domain in
/// manifest order). Deterministic given record order.
std::vector<SplitSpec> make_splits(const DatasetManifest& manifest, const std::vector<ClipRecord>& records,
                                   const DomainList& designated = {});

/// In-domain baseline splits for the performance-drop analysis: the same
/// held-out domains, but only a seeded clip-level fraction of each domain is
/// tested while the rest of that domain joins the training set (along with
/// every other clip).
std::vector<SplitSpec> make_seen_domain_splits(const DatasetManifest& manifest,
                                               const std::vector<ClipRecord>& records, double test_fraction,
                                               uint64_t seed = 0, const DomainList& designated = {});

}  // namespace mmdg
