#pragma once

#include <string>

#include <json.hpp>

#include "templar/template_eval.hpp"

namespace templar::cli {

nlohmann::json to_json(const VerifReport& r, SetupPolicy policy);
nlohmann::json to_json(const IdentReport& r, SetupPolicy policy);
nlohmann::json to_json(const SplitSummary& s, SetupPolicy policy);

/// `far,tar` rows in ROC order.
std::string roc_csv(const VerifReport& r);
/// `rank,accuracy` rows for ranks 1..gallery size.
std::string cmc_csv(const IdentReport& r);
/// `metric,mean,std` rows.
std::string summary_csv(const SplitSummary& s);

/// Throws InvariantViolation when a report breaks ROC/CMC monotonicity or
/// leaves [0, 1].
void check_report(const VerifReport& r);
void check_report(const IdentReport& r, SetupPolicy policy);

}  // namespace templar::cli
