#include "crossimpact/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace crossimpact::io {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

/// Line-oriented CSV reader with positional error reporting. Lines starting
/// with '#' are surfaced separately as metadata.
class CsvFile {
  public:
    explicit CsvFile(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open file: " + path.string());
        std::string line;
        Index number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            if (trimmed.front() == '#') {
                metadata_.emplace_back(number, trimmed.substr(1));
                continue;
            }
            rows_.emplace_back(number, split_csv(trimmed));
        }
    }

    const std::filesystem::path& path() const { return path_; }
    std::size_t size() const { return rows_.size(); }
    Index line_of(std::size_t row) const { return rows_[row].first; }
    const std::vector<std::string>& cells(std::size_t row) const { return rows_[row].second; }
    const std::vector<std::pair<Index, std::string>>& metadata() const { return metadata_; }

    [[noreturn]] void fail(std::size_t row, const std::string& message) const {
        throw ParseError(path_, row < rows_.size() ? rows_[row].first : 0, message);
    }

    void expect_cells(std::size_t row, std::size_t count) const {
        if (cells(row).size() != count) {
            fail(row, "expected " + std::to_string(count) + " cells, got " +
                          std::to_string(cells(row).size()));
        }
    }

    double number(std::size_t row, std::size_t col) const {
        const auto& cell = cells(row).at(col);
        if (cell.empty()) fail(row, "missing value in column " + std::to_string(col + 1));
        try {
            std::size_t used = 0;
            const double value = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
            return value;
        } catch (const std::exception&) {
            fail(row, "cannot parse number '" + cell + "' in column " + std::to_string(col + 1));
        }
    }

    long integer(std::size_t row, std::size_t col) const {
        const auto& cell = cells(row).at(col);
        long value = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            fail(row, "cannot parse integer '" + cell + "' in column " + std::to_string(col + 1));
        }
        return value;
    }

  private:
    std::filesystem::path path_;
    std::vector<std::pair<Index, std::vector<std::string>>> rows_;
    std::vector<std::pair<Index, std::string>> metadata_;
};

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    return out;
}

void require_header(const CsvFile& csv, const std::vector<std::string>& expected) {
    if (csv.size() == 0) throw ParseError(csv.path(), 0, "empty file");
    const auto& cells = csv.cells(0);
    if (cells.size() < expected.size()) csv.fail(0, "header too short");
    for (std::size_t c = 0; c < expected.size(); ++c) {
        if (cells[c] != expected[c]) {
            csv.fail(0, "expected header column '" + expected[c] + "', got '" + cells[c] + "'");
        }
    }
}

std::map<std::string, std::string> metadata_map(const CsvFile& csv) {
    std::map<std::string, std::string> out;
    for (const auto& [line, text] : csv.metadata()) {
        const auto eq = text.find('=');
        if (eq == std::string::npos) continue;
        out[trim(text.substr(0, eq))] = trim(text.substr(eq + 1));
    }
    return out;
}

double parse_double_or_throw(const std::filesystem::path& path, const std::string& value,
                             const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ": cannot parse " + what + " '" + value + "'");
    }
}

std::vector<double> parse_double_list(const std::filesystem::path& path,
                                      const std::string& value, const std::string& what) {
    std::vector<double> out;
    for (const auto& cell : split_csv(value)) {
        if (cell.empty()) continue;
        out.push_back(parse_double_or_throw(path, cell, what));
    }
    return out;
}

std::string join_doubles(const Eigen::VectorXd& v) {
    std::string out;
    for (Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_double(v[i]);
    }
    return out;
}

}  // namespace

std::string format_double(double x) {
    // 17 significant digits round-trip any double; trim to the shortest
    // representation that still parses back bit-exactly.
    for (int precision = 1; precision <= 17; ++precision) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
        if (std::stod(buf) == x) return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_liquidity_csv(const std::filesystem::path& path, const LiquidityModelXd& model) {
    model.validate();
    auto out = open_out(path);
    out << "asset,psi_id";
    for (Index k = 0; k < model.n_funds(); ++k) out << ",w" << (k + 1);
    out << "\n";
    for (Index i = 0; i < model.n_assets(); ++i) {
        out << (i + 1) << "," << format_double(model.psi_id[i]);
        for (Index k = 0; k < model.n_funds(); ++k) {
            out << "," << format_double(model.W(i, k));
        }
        out << "\n";
    }
    if (model.n_funds() > 0) {
        out << "psi_f,";
        for (Index k = 0; k < model.n_funds(); ++k) {
            out << "," << format_double(model.psi_f[k]);
        }
        out << "\n";
    }
}

LiquidityModelXd read_liquidity_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"asset", "psi_id"});
    const Index k = static_cast<Index>(csv.cells(0).size()) - 2;
    for (Index j = 0; j < k; ++j) {
        const std::string expected = "w" + std::to_string(j + 1);
        if (csv.cells(0)[static_cast<std::size_t>(j + 2)] != expected) {
            csv.fail(0, "expected fund column '" + expected + "'");
        }
    }
    bool has_psi_f = false;
    std::size_t asset_rows = csv.size() - 1;
    if (csv.size() >= 2 && csv.cells(csv.size() - 1).at(0) == "psi_f") {
        has_psi_f = true;
        asset_rows -= 1;
    }
    if (k > 0 && !has_psi_f) throw ParseError(path, 0, "missing psi_f row for fund columns");
    if (k == 0 && has_psi_f) throw ParseError(path, 0, "psi_f row present without fund columns");
    if (asset_rows == 0) throw ParseError(path, 0, "no asset rows");

    LiquidityModelXd model;
    const Index n = static_cast<Index>(asset_rows);
    model.psi_id.resize(n);
    model.psi_f.resize(k);
    model.W.resize(n, k);
    for (std::size_t row = 1; row <= asset_rows; ++row) {
        csv.expect_cells(row, static_cast<std::size_t>(k) + 2);
        if (csv.integer(row, 0) != static_cast<long>(row)) {
            csv.fail(row, "asset rows must be numbered 1..N in order");
        }
        const Index i = static_cast<Index>(row) - 1;
        model.psi_id[i] = csv.number(row, 1);
        for (Index j = 0; j < k; ++j) {
            model.W(i, j) = csv.number(row, static_cast<std::size_t>(j) + 2);
        }
    }
    if (has_psi_f) {
        const std::size_t row = csv.size() - 1;
        csv.expect_cells(row, static_cast<std::size_t>(k) + 2);
        if (!csv.cells(row)[1].empty()) csv.fail(row, "psi_f row must leave the psi_id cell empty");
        for (Index j = 0; j < k; ++j) {
            model.psi_f[j] = csv.number(row, static_cast<std::size_t>(j) + 2);
        }
    }
    model.validate();
    return model;
}

void write_mixture_csv(const std::filesystem::path& path, const MixtureProfileXd& profile) {
    profile.validate();
    auto out = open_out(path);
    out << "# theta=" << format_double(profile.theta) << "\n";
    out << "period,alpha,beta\n";
    for (Index t = 0; t < profile.periods(); ++t) {
        out << (t + 1) << "," << format_double(profile.alpha[t]) << ","
            << format_double(profile.beta[t]) << "\n";
    }
}

MixtureProfileXd read_mixture_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"period", "alpha", "beta"});
    const auto meta = metadata_map(csv);
    const auto theta_it = meta.find("theta");
    if (theta_it == meta.end()) throw ParseError(path, 0, "missing '# theta=' metadata line");
    MixtureProfileXd profile;
    profile.theta = parse_double_or_throw(path, theta_it->second, "theta");
    const Index t_count = static_cast<Index>(csv.size()) - 1;
    if (t_count < 1) throw ParseError(path, 0, "no period rows");
    profile.alpha.resize(t_count);
    profile.beta.resize(t_count);
    for (std::size_t row = 1; row < csv.size(); ++row) {
        csv.expect_cells(row, 3);
        if (csv.integer(row, 0) != static_cast<long>(row)) {
            csv.fail(row, "period rows must be numbered 1..T in order");
        }
        profile.alpha[static_cast<Index>(row) - 1] = csv.number(row, 1);
        profile.beta[static_cast<Index>(row) - 1] = csv.number(row, 2);
    }
    profile.validate();
    return profile;
}

void write_schedule_csv(const std::filesystem::path& path, const ScheduleXd& schedule) {
    schedule.validate();
    auto out = open_out(path);
    out << "period";
    for (Index i = 0; i < schedule.n_assets(); ++i) out << ",v" << (i + 1);
    out << "\n";
    for (Index t = 0; t < schedule.periods(); ++t) {
        out << (t + 1);
        for (Index i = 0; i < schedule.n_assets(); ++i) {
            out << "," << format_double(schedule.v(t, i));
        }
        out << "\n";
    }
    out << "total";
    const Eigen::VectorXd sums = schedule.v.colwise().sum().transpose();
    for (Index i = 0; i < schedule.n_assets(); ++i) out << "," << format_double(sums[i]);
    out << "\n";
}

ScheduleXd read_schedule_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"period"});
    const Index n = static_cast<Index>(csv.cells(0).size()) - 1;
    if (n < 1) throw ParseError(path, 0, "no asset columns");
    if (csv.size() < 3) throw ParseError(path, 0, "need at least one period row and a total row");
    const std::size_t total_row = csv.size() - 1;
    if (csv.cells(total_row).at(0) != "total") csv.fail(total_row, "missing trailing total row");

    ScheduleXd schedule;
    const Index t_count = static_cast<Index>(total_row) - 1;
    schedule.v.resize(t_count, n);
    for (std::size_t row = 1; row < total_row; ++row) {
        csv.expect_cells(row, static_cast<std::size_t>(n) + 1);
        if (csv.integer(row, 0) != static_cast<long>(row)) {
            csv.fail(row, "period rows must be numbered 1..T in order");
        }
        for (Index i = 0; i < n; ++i) {
            schedule.v(static_cast<Index>(row) - 1, i) =
                csv.number(row, static_cast<std::size_t>(i) + 1);
        }
    }
    csv.expect_cells(total_row, static_cast<std::size_t>(n) + 1);
    schedule.x0.resize(n);
    for (Index i = 0; i < n; ++i) {
        schedule.x0[i] = csv.number(total_row, static_cast<std::size_t>(i) + 1);
    }
    const Eigen::VectorXd sums = schedule.v.colwise().sum().transpose();
    const double scale = std::max(1.0, schedule.x0.lpNorm<Eigen::Infinity>());
    if ((sums - schedule.x0).lpNorm<Eigen::Infinity>() > 1e-9 * scale) {
        csv.fail(total_row, "checksum row does not match the column sums");
    }
    schedule.validate();
    return schedule;
}

void write_target_csv(const std::filesystem::path& path, const Eigen::VectorXd& x0) {
    auto out = open_out(path);
    out << "asset,x0\n";
    for (Index i = 0; i < x0.size(); ++i) {
        out << (i + 1) << "," << format_double(x0[i]) << "\n";
    }
}

Eigen::VectorXd read_target_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"asset", "x0"});
    const Index n = static_cast<Index>(csv.size()) - 1;
    if (n < 1) throw ParseError(path, 0, "no asset rows");
    Eigen::VectorXd x0(n);
    for (std::size_t row = 1; row < csv.size(); ++row) {
        csv.expect_cells(row, 2);
        if (csv.integer(row, 0) != static_cast<long>(row)) {
            csv.fail(row, "asset rows must be numbered 1..N in order");
        }
        x0[static_cast<Index>(row) - 1] = csv.number(row, 1);
    }
    return x0;
}

void write_market_profiles_csv(const std::filesystem::path& path,
                               const MarketProfiles& profiles) {
    profiles.validate();
    auto out = open_out(path);
    out << "period,avg_vol_alloc,avg_correl\n";
    for (Index t = 0; t < profiles.periods(); ++t) {
        out << (t + 1) << "," << format_double(profiles.avg_vol_alloc[t]) << ","
            << format_double(profiles.avg_correl[t]) << "\n";
    }
}

MarketProfiles read_market_profiles_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"period", "avg_vol_alloc", "avg_correl"});
    const Index t_count = static_cast<Index>(csv.size()) - 1;
    if (t_count < 1) throw ParseError(path, 0, "no period rows");
    MarketProfiles profiles;
    profiles.avg_vol_alloc.resize(t_count);
    profiles.avg_correl.resize(t_count);
    for (std::size_t row = 1; row < csv.size(); ++row) {
        csv.expect_cells(row, 3);
        if (csv.integer(row, 0) != static_cast<long>(row)) {
            csv.fail(row, "period rows must be numbered 1..T in order");
        }
        profiles.avg_vol_alloc[static_cast<Index>(row) - 1] = csv.number(row, 1);
        profiles.avg_correl[static_cast<Index>(row) - 1] = csv.number(row, 2);
    }
    profiles.validate();
    return profiles;
}

void write_panel_csv(const std::filesystem::path& path, const VolumePanel& panel) {
    panel.validate();
    auto out = open_out(path);
    out << "day,period,asset,dvol\n";
    for (Index d = 0; d < panel.days; ++d) {
        for (Index t = 0; t < panel.periods; ++t) {
            for (Index i = 0; i < panel.assets; ++i) {
                out << (d + 1) << "," << (t + 1) << "," << (i + 1) << ","
                    << format_double(panel.at(d, t, i)) << "\n";
            }
        }
    }
}

VolumePanel read_panel_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"day", "period", "asset", "dvol"});
    if (csv.size() < 2) throw ParseError(path, 0, "no volume rows");
    Index days = 0;
    Index periods = 0;
    Index assets = 0;
    for (std::size_t row = 1; row < csv.size(); ++row) {
        csv.expect_cells(row, 4);
        days = std::max<Index>(days, csv.integer(row, 0));
        periods = std::max<Index>(periods, csv.integer(row, 1));
        assets = std::max<Index>(assets, csv.integer(row, 2));
    }
    VolumePanel panel;
    panel.days = days;
    panel.periods = periods;
    panel.assets = assets;
    panel.dvol.resize(days * periods, assets);
    std::vector<char> seen(static_cast<std::size_t>(days * periods * assets), 0);
    for (std::size_t row = 1; row < csv.size(); ++row) {
        const Index d = csv.integer(row, 0) - 1;
        const Index t = csv.integer(row, 1) - 1;
        const Index i = csv.integer(row, 2) - 1;
        if (d < 0 || t < 0 || i < 0) csv.fail(row, "indices must be 1-based");
        const std::size_t flat = static_cast<std::size_t>((d * periods + t) * assets + i);
        if (seen[flat]) csv.fail(row, "duplicate (day, period, asset) cell");
        seen[flat] = 1;
        panel.at(d, t, i) = csv.number(row, 3);
    }
    for (std::size_t flat = 0; flat < seen.size(); ++flat) {
        if (!seen[flat]) {
            throw ParseError(path, 0,
                             "incomplete panel: missing cell at flat index " +
                                 std::to_string(flat) + " (grid must be complete)");
        }
    }
    panel.validate();
    return panel;
}

void write_key_value_file(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& entries) {
    auto out = open_out(path);
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
}

std::vector<std::pair<std::string, std::string>> read_key_value_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    Index number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path, number, "expected 'key = value'");
        }
        entries.emplace_back(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
    }
    return entries;
}

void write_orderflow_params(const std::filesystem::path& path, const OrderFlowParams& params) {
    params.validate();
    write_key_value_file(path, {
                                   {"lambda", format_double(params.lambda)},
                                   {"cv", format_double(params.cv)},
                                   {"qbar_f", format_double(params.qbar_f)},
                                   {"qbar_id", join_doubles(params.qbar_id)},
                                   {"w_tilde", join_doubles(params.w_tilde)},
                                   {"alpha", join_doubles(params.alpha)},
                                   {"beta", join_doubles(params.beta)},
                               });
}

OrderFlowParams read_orderflow_params(const std::filesystem::path& path) {
    std::map<std::string, std::string> map;
    for (const auto& [key, value] : read_key_value_file(path)) map[key] = value;
    const auto require = [&](const std::string& key) -> const std::string& {
        const auto it = map.find(key);
        if (it == map.end()) {
            throw std::runtime_error(path.string() + ": missing key '" + key + "'");
        }
        return it->second;
    };
    const auto to_vector = [](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size())).eval();
    };
    OrderFlowParams params;
    params.lambda = parse_double_or_throw(path, require("lambda"), "lambda");
    params.cv = parse_double_or_throw(path, require("cv"), "cv");
    params.qbar_f = parse_double_or_throw(path, require("qbar_f"), "qbar_f");
    params.qbar_id = to_vector(parse_double_list(path, require("qbar_id"), "qbar_id"));
    params.w_tilde = to_vector(parse_double_list(path, require("w_tilde"), "w_tilde"));
    params.alpha = to_vector(parse_double_list(path, require("alpha"), "alpha"));
    params.beta = to_vector(parse_double_list(path, require("beta"), "beta"));
    params.validate();
    return params;
}

void write_coefficients(const std::filesystem::path& path, const ImpactCoefficients& coef) {
    coef.validate();
    std::vector<std::pair<std::string, std::string>> entries;
    entries.emplace_back("gamma_id", format_double(coef.gamma_id));
    entries.emplace_back("gamma_f", join_doubles(coef.gamma_f));
    write_key_value_file(path, entries);
}

ImpactCoefficients read_coefficients(const std::filesystem::path& path) {
    std::map<std::string, std::string> map;
    for (const auto& [key, value] : read_key_value_file(path)) map[key] = value;
    const auto id_it = map.find("gamma_id");
    if (id_it == map.end()) {
        throw std::runtime_error(path.string() + ": missing key 'gamma_id'");
    }
    ImpactCoefficients coef;
    coef.gamma_id = parse_double_or_throw(path, id_it->second, "gamma_id");
    std::vector<double> gf;
    if (const auto f_it = map.find("gamma_f"); f_it != map.end()) {
        gf = parse_double_list(path, f_it->second, "gamma_f");
    }
    coef.gamma_f = Eigen::Map<const Eigen::VectorXd>(gf.data(), static_cast<Index>(gf.size()));
    coef.validate();
    return coef;
}

namespace {

void write_vector_rows(std::ofstream& out, const std::string& field, const Eigen::VectorXd& v) {
    for (Index i = 0; i < v.size(); ++i) {
        out << field << "," << (i + 1) << ",," << format_double(v[i]) << "\n";
    }
}

void write_matrix_rows(std::ofstream& out, const std::string& field, const Eigen::MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            out << field << "," << (i + 1) << "," << (j + 1) << "," << format_double(m(i, j))
                << "\n";
        }
    }
}

}  // namespace

void write_records_dir(const std::filesystem::path& dir,
                       const std::vector<TransactionRecord>& records) {
    if (records.empty()) throw std::invalid_argument("write_records_dir: no records");
    std::filesystem::create_directories(dir);
    auto manifest = open_out(dir / "manifest.csv");
    manifest << "record,file\n";
    for (std::size_t r = 0; r < records.size(); ++r) {
        records[r].validate();
        char name[32];
        std::snprintf(name, sizeof(name), "record_%05zu.csv", r + 1);
        manifest << (r + 1) << "," << name << "\n";
        auto out = open_out(dir / name);
        out << "field,i,j,value\n";
        write_vector_rows(out, "v_tilde", records[r].v_tilde);
        write_vector_rows(out, "r_bar", records[r].r_bar);
        write_vector_rows(out, "dvol_hat", records[r].dvol_hat);
        write_vector_rows(out, "sigma_hat", records[r].sigma_hat);
        write_vector_rows(out, "dvol_f_hat", records[r].dvol_f_hat);
        write_vector_rows(out, "sigma_f_hat", records[r].sigma_f_hat);
        write_matrix_rows(out, "w_tilde", records[r].w_tilde);
        write_matrix_rows(out, "sigma_noise", records[r].sigma_noise);
    }
}

namespace {

TransactionRecord read_record_csv(const std::filesystem::path& path) {
    CsvFile csv(path);
    require_header(csv, {"field", "i", "j", "value"});
    std::map<std::string, std::vector<std::tuple<Index, Index, double>>> fields;
    for (std::size_t row = 1; row < csv.size(); ++row) {
        csv.expect_cells(row, 4);
        const std::string& field = csv.cells(row)[0];
        const Index i = csv.integer(row, 1);
        const Index j = csv.cells(row)[2].empty() ? 0 : csv.integer(row, 2);
        fields[field].emplace_back(i, j, csv.number(row, 3));
    }
    const auto vector_field = [&](const std::string& name, Index expected,
                                  bool required) -> Eigen::VectorXd {
        const auto it = fields.find(name);
        if (it == fields.end()) {
            if (required && expected != 0) {
                throw ParseError(path, 0, "missing field '" + name + "'");
            }
            return Eigen::VectorXd(0);
        }
        Eigen::VectorXd v = Eigen::VectorXd::Constant(
            expected >= 0 ? expected : static_cast<Index>(it->second.size()),
            std::numeric_limits<double>::quiet_NaN());
        for (const auto& [i, j, value] : it->second) {
            if (j != 0) throw ParseError(path, 0, "field '" + name + "' must leave j empty");
            if (i < 1 || i > v.size()) {
                throw ParseError(path, 0, "field '" + name + "' index out of range");
            }
            v[i - 1] = value;
        }
        if (v.hasNaN()) throw ParseError(path, 0, "field '" + name + "' has missing entries");
        return v;
    };

    TransactionRecord rec;
    rec.v_tilde = vector_field("v_tilde", fields.count("v_tilde")
                                              ? static_cast<Index>(fields["v_tilde"].size())
                                              : 0,
                               true);
    const Index n = rec.v_tilde.size();
    if (n < 1) throw ParseError(path, 0, "record has no v_tilde entries");
    rec.r_bar = vector_field("r_bar", n, true);
    rec.dvol_hat = vector_field("dvol_hat", n, true);
    rec.sigma_hat = vector_field("sigma_hat", n, true);
    const Index k = fields.count("dvol_f_hat") ? static_cast<Index>(fields["dvol_f_hat"].size())
                                               : 0;
    rec.dvol_f_hat = vector_field("dvol_f_hat", k, false);
    rec.sigma_f_hat = vector_field("sigma_f_hat", k, k > 0);

    const auto matrix_field = [&](const std::string& name, Index rows, Index cols,
                                  bool required) -> Eigen::MatrixXd {
        const auto it = fields.find(name);
        if (it == fields.end()) {
            if (required) throw ParseError(path, 0, "missing field '" + name + "'");
            return Eigen::MatrixXd(rows, 0);
        }
        Eigen::MatrixXd m =
            Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
        for (const auto& [i, j, value] : it->second) {
            if (i < 1 || i > rows || j < 1 || j > cols) {
                throw ParseError(path, 0, "field '" + name + "' index out of range");
            }
            m(i - 1, j - 1) = value;
        }
        if (m.hasNaN()) throw ParseError(path, 0, "field '" + name + "' has missing entries");
        return m;
    };
    rec.w_tilde = matrix_field("w_tilde", n, k, k > 0);
    rec.sigma_noise = matrix_field("sigma_noise", n, n, true);
    rec.validate();
    return rec;
}

}  // namespace

std::vector<TransactionRecord> read_records_dir(const std::filesystem::path& dir) {
    CsvFile manifest(dir / "manifest.csv");
    require_header(manifest, {"record", "file"});
    std::vector<TransactionRecord> records;
    for (std::size_t row = 1; row < manifest.size(); ++row) {
        manifest.expect_cells(row, 2);
        if (manifest.integer(row, 0) != static_cast<long>(row)) {
            manifest.fail(row, "records must be numbered 1..R in order");
        }
        records.push_back(read_record_csv(dir / manifest.cells(row)[1]));
    }
    if (records.empty()) throw ParseError(dir / "manifest.csv", 0, "manifest lists no records");
    return records;
}

std::string peek_csv_header(const std::filesystem::path& path) {
    CsvFile csv(path);
    if (csv.size() == 0) throw ParseError(path, 0, "empty file");
    return csv.cells(0).at(0);
}

}  // namespace crossimpact::io
