#pragma once

namespace auv {
inline constexpr const char* tool_version = "0.1.0";
inline constexpr const char* records_schema = "auv-records/1";
inline constexpr const char* stats_schema = "auv-stats/1";
inline constexpr const char* manifest_schema = "auv-manifest/1";
inline constexpr const char* loss_report_schema = "duo-loss-report/1";
}  // namespace auv
