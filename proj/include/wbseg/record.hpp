#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace wbseg {

// One (scan, class) evaluation row.
struct MetricRecord {
  std::string scan_id;
  std::uint32_t class_id = 0;
  // Undefined when both masks are empty.
  std::optional<double> dsc;
  // Undefined when either mask is empty or HD was disabled.
  std::optional<double> hd95;
  // Connected components of the prediction; set for vessel classes only.
  std::optional<std::int64_t> components;
  // Free-form tags such as sequence, sex and age.
  std::map<std::string, std::string> strata;
};

}  // namespace wbseg
