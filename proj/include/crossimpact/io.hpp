#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "crossimpact/calibration.hpp"
#include "crossimpact/estimation.hpp"
#include "crossimpact/liquidity.hpp"
#include "crossimpact/mixture.hpp"
#include "crossimpact/orderflow.hpp"
#include "crossimpact/schedule.hpp"

namespace crossimpact::io {

/// Parse failure with file/line context in what().
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::filesystem::path& file, Index line, const std::string& message)
        : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + message),
          line_(line) {}
    Index line() const { return line_; }

  private:
    Index line_;
};

/// Shortest representation that parses back to the same double (up to 17
/// significant digits); all numeric output goes through this.
std::string format_double(double x);

// --- CSV round trips; exact column layouts are documented in the README.

void write_liquidity_csv(const std::filesystem::path& path, const LiquidityModelXd& model);
LiquidityModelXd read_liquidity_csv(const std::filesystem::path& path);

void write_mixture_csv(const std::filesystem::path& path, const MixtureProfileXd& profile);
MixtureProfileXd read_mixture_csv(const std::filesystem::path& path);

void write_schedule_csv(const std::filesystem::path& path, const ScheduleXd& schedule);
ScheduleXd read_schedule_csv(const std::filesystem::path& path);

void write_target_csv(const std::filesystem::path& path, const Eigen::VectorXd& x0);
Eigen::VectorXd read_target_csv(const std::filesystem::path& path);

void write_market_profiles_csv(const std::filesystem::path& path, const MarketProfiles& profiles);
MarketProfiles read_market_profiles_csv(const std::filesystem::path& path);

void write_panel_csv(const std::filesystem::path& path, const VolumePanel& panel);
VolumePanel read_panel_csv(const std::filesystem::path& path);

// --- Flat key = value files.

void write_key_value_file(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::pair<std::string, std::string>> read_key_value_file(
    const std::filesystem::path& path);

void write_orderflow_params(const std::filesystem::path& path, const OrderFlowParams& params);
OrderFlowParams read_orderflow_params(const std::filesystem::path& path);

void write_coefficients(const std::filesystem::path& path, const ImpactCoefficients& coef);
ImpactCoefficients read_coefficients(const std::filesystem::path& path);

// --- Transaction-record directories: manifest.csv plus one CSV per record.

void write_records_dir(const std::filesystem::path& dir,
                       const std::vector<TransactionRecord>& records);
std::vector<TransactionRecord> read_records_dir(const std::filesystem::path& dir);

/// First header cell of a CSV file; lets the CLI dispatch on input kind.
std::string peek_csv_header(const std::filesystem::path& path);

}  // namespace crossimpact::io
