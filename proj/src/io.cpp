#include "hopfcole/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hopfcole::io {

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& field)
{
    std::size_t a = field.find_first_not_of(" \t\r");
    std::size_t b = field.find_last_not_of(" \t\r");
    require(a != std::string::npos, "parse_double: empty field");
    const std::string s = field.substr(a, b - a + 1);
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    require(res.ec == std::errc() && res.ptr == s.data() + s.size(), "parse_double: not a number: '" + s + "'");
    return v;
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

void write_support_csv(std::ostream& out, const core::SupportSet& s)
{
    for (Eigen::Index a = 0; a < s.dim(); ++a) out << "y_" << a << ',';
    out << "g\n";
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        for (Eigen::Index a = 0; a < s.dim(); ++a) out << format_double(s.atoms()(j, a)) << ',';
        out << format_double(s.values()[j]) << '\n';
    }
}

core::SupportSet read_support_csv(std::istream& in)
{
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "support csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    require(header.size() >= 2 && header.back() == "g", "support csv: header must be y_0,...,y_{d-1},g");
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    for (Eigen::Index a = 0; a < d; ++a)
        require(header[static_cast<std::size_t>(a)] == "y_" + std::to_string(a), "support csv: bad column '" +
                                                                                    header[static_cast<std::size_t>(a)] + "'");
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        require(static_cast<Eigen::Index>(f.size()) == d + 1,
                "support csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
        std::vector<double> r;
        for (const auto& x : f) r.push_back(parse_double(x));
        rows.push_back(std::move(r));
    }
    require(!rows.empty(), "support csv: no atoms");
    Matrix y(static_cast<Eigen::Index>(rows.size()), d);
    Vector g(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (Eigen::Index a = 0; a < d; ++a) y(static_cast<Eigen::Index>(j), a) = rows[j][static_cast<std::size_t>(a)];
        g[static_cast<Eigen::Index>(j)] = rows[j].back();
    }
    require(y.allFinite() && g.allFinite(), "support csv: non-finite entry");
    return core::SupportSet(std::move(y), std::move(g));
}

void save_support_csv(const std::filesystem::path& path, const core::SupportSet& support)
{
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot write " + path.string());
    write_support_csv(f, support);
}

core::SupportSet load_support_csv(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot read " + path.string());
    return read_support_csv(f);
}

nlohmann::json network_to_json(const core::HJNetwork& net)
{
    nlohmann::json j;
    j["d"] = net.dim();
    j["N"] = net.size();
    j["t"] = net.t();
    j["eps"] = net.eps();
    if (net.metric()) {
        std::vector<double> a;
        for (Eigen::Index r = 0; r < net.dim(); ++r)
            for (Eigen::Index c = 0; c < net.dim(); ++c) a.push_back(net.metric()->matrix()(r, c));
        j["metric"] = a;
    }
    std::vector<double> w;
    for (Eigen::Index r = 0; r < net.size(); ++r)
        for (Eigen::Index c = 0; c < net.dim(); ++c) w.push_back(net.weights()(r, c));
    j["W"] = w;
    j["b"] = std::vector<double>(net.biases().data(), net.biases().data() + net.size());
    return j;
}

core::HJNetwork network_from_json(const nlohmann::json& j)
{
    try {
        const auto d = j.at("d").get<Eigen::Index>();
        const auto n = j.at("N").get<Eigen::Index>();
        require(d >= 1 && n >= 1, "network json: d and N must be positive");
        const auto w = j.at("W").get<std::vector<double>>();
        const auto b = j.at("b").get<std::vector<double>>();
        require(static_cast<Eigen::Index>(w.size()) == n * d, "network json: W must hold N*d entries");
        require(static_cast<Eigen::Index>(b.size()) == n, "network json: b must hold N entries");
        Matrix wm(n, d);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < d; ++c) wm(r, c) = w[static_cast<std::size_t>(r * d + c)];
        std::optional<core::Metric> metric;
        if (j.contains("metric") && !j.at("metric").is_null()) {
            const auto a = j.at("metric").get<std::vector<double>>();
            require(static_cast<Eigen::Index>(a.size()) == d * d, "network json: metric must hold d*d entries");
            Matrix am(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c) am(r, c) = a[static_cast<std::size_t>(r * d + c)];
            metric = core::Metric(am);
        }
        return core::HJNetwork(wm, Eigen::Map<const Vector>(b.data(), n), j.at("eps").get<double>(),
                               j.at("t").get<double>(), metric);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("network json: ") + e.what());
    }
}

void Table::add_row(std::vector<Cell> row)
{
    require(row.size() == columns.size(), "table " + name + ": row width does not match the header");
    rows.push_back(std::move(row));
}

void write_csv(std::ostream& out, const Table& t)
{
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>)
                        out << format_double(v);
                    else if constexpr (std::is_same_v<T, long long> || std::is_same_v<T, std::string>)
                        out << v;
                },
                row[c]);
        }
        out << '\n';
    }
}

} // namespace hopfcole::io
