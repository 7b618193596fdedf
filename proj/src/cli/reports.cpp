#include "cli/reports.hpp"

#include "cli/config.hpp"
#include "templar/protocol.hpp"

namespace templar::cli {

using nlohmann::json;

json to_json(const VerifReport& r, SetupPolicy policy) {
    json j;
    j["policy"] = to_string(policy);
    j["n_pairs_used"] = r.n_pairs_used;
    j["n_pairs_skipped"] = r.n_pairs_skipped;
    j["n_genuine"] = r.n_genuine;
    j["n_impostor"] = r.n_impostor;
    json tar = json::object();
    for (const auto& [far, value] : metrics_of(r)) tar[far] = value;
    j["tar_at_far"] = tar;
    j["roc_points"] = r.roc.size();
    return j;
}

json to_json(const IdentReport& r, SetupPolicy policy) {
    json j;
    j["policy"] = to_string(policy);
    j["n_probes_used"] = r.n_probes_used;
    j["n_probes_skipped"] = r.n_probes_skipped;
    j["gallery_size"] = r.cmc.size();
    json ranks = json::object();
    for (const auto& [k, acc] : metrics_of(r)) ranks[k] = acc;
    j["rank_accuracy"] = ranks;
    return j;
}

json to_json(const SplitSummary& s, SetupPolicy policy) {
    json j;
    j["policy"] = to_string(policy);
    j["splits"] = s.splits.size();
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["per_split"] = s.splits;
    return j;
}

std::string roc_csv(const VerifReport& r) {
    std::string out = "far,tar\n";
    for (const auto& p : r.roc) out += format_double(p.far) + "," + format_double(p.tar) + "\n";
    return out;
}

std::string cmc_csv(const IdentReport& r) {
    std::string out = "rank,accuracy\n";
    for (std::size_t k = 0; k < r.cmc.size(); ++k) out += std::to_string(k + 1) + "," + format_double(r.cmc[k]) + "\n";
    return out;
}

std::string summary_csv(const SplitSummary& s) {
    std::string out = "metric,mean,std\n";
    for (const auto& [key, mean] : s.mean) out += key + "," + format_double(mean) + "," + format_double(s.stddev.at(key)) + "\n";
    return out;
}

void check_report(const VerifReport& r) {
    for (std::size_t i = 0; i < r.roc.size(); ++i) {
        const auto& p = r.roc[i];
        if (p.far < 0.0 || p.far > 1.0 || p.tar < 0.0 || p.tar > 1.0) throw InvariantViolation("ROC point outside [0,1]");
        if (i > 0 && (p.far < r.roc[i - 1].far || p.tar < r.roc[i - 1].tar)) {
            throw InvariantViolation("ROC is not monotone at point " + std::to_string(i));
        }
    }
}

void check_report(const IdentReport& r, SetupPolicy policy) {
    for (std::size_t k = 1; k < r.cmc.size(); ++k) {
        if (r.cmc[k] < r.cmc[k - 1]) throw InvariantViolation("CMC decreases at rank " + std::to_string(k + 1));
    }
    if (!r.cmc.empty() && r.cmc.back() != 1.0) {
        throw InvariantViolation(std::string("CMC at gallery size is not 1 under ") + to_string(policy));
    }
}

}  // namespace templar::cli
