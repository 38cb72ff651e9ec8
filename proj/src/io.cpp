#include "twoloc/io.hpp"

#include <fstream>

namespace twoloc {

namespace {

Eigen::MatrixXd matrix_from_json(const Json& j, const char* name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an array of arrays");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (j[i].size() != static_cast<std::size_t>(cols))
            throw Error(ErrorCode::InvalidArgument, std::string(name) + " is ragged");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        out.push_back(row);
    }
    return out;
}

Counts counts_from_json(const Json& j, const char* name) {
    if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an array");
    Counts v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<int>();
    return v;
}

}  // namespace

ModelParams params_from_json(const Json& j) {
    try {
        ModelParams p;
        p.thetaA = j.value("thetaA", j.value("theta", 1.0));
        p.thetaB = j.value("thetaB", j.value("theta", 1.0));
        p.rho = j.value("rho", 1.0);
        p.pim = j.value("pim", true);
        if (j.contains("PA")) {
            p.PA = matrix_from_json(j.at("PA"), "PA");
        } else if (j.contains("weightsA")) {
            const auto w = j.at("weightsA").get<std::vector<double>>();
            p.PA = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(w.size())) *
                   Eigen::Map<const Eigen::RowVectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        } else {
            const int K = j.value("K", 2);
            p.PA = Eigen::MatrixXd::Constant(K, K, 1.0 / K);
        }
        if (j.contains("PB")) {
            p.PB = matrix_from_json(j.at("PB"), "PB");
        } else if (j.contains("weightsB")) {
            const auto w = j.at("weightsB").get<std::vector<double>>();
            p.PB = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(w.size())) *
                   Eigen::Map<const Eigen::RowVectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        } else {
            const int L = j.value("L", 2);
            p.PB = Eigen::MatrixXd::Constant(L, L, 1.0 / L);
        }
        p.K = static_cast<int>(p.PA.rows());
        p.L = static_cast<int>(p.PB.rows());
        if (j.contains("K") && j.at("K").get<int>() != p.K)
            throw Error(ErrorCode::InvalidArgument, "K disagrees with PA");
        if (j.contains("L") && j.at("L").get<int>() != p.L)
            throw Error(ErrorCode::InvalidArgument, "L disagrees with PB");
        return p;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad params JSON: ") + e.what());
    }
}

Json params_to_json(const ModelParams& p) {
    return Json{{"K", p.K},        {"L", p.L},   {"thetaA", p.thetaA},           {"thetaB", p.thetaB},
                {"rho", p.rho},    {"pim", p.pim}, {"PA", matrix_to_json(p.PA)}, {"PB", matrix_to_json(p.PB)}};
}

SampleConfig config_from_json(const Json& j) {
    try {
        SampleConfig cfg;
        cfg.c = matrix_from_json(j.at("c"), "c").cast<int>();
        const auto K = cfg.c.rows();
        const auto L = cfg.c.cols();
        cfg.a = j.contains("a") ? counts_from_json(j.at("a"), "a") : Counts::Zero(K);
        cfg.b = j.contains("b") ? counts_from_json(j.at("b"), "b") : Counts::Zero(L);
        if (cfg.a.size() != K || cfg.b.size() != L)
            throw Error(ErrorCode::InvalidConfig, "a, b lengths must match the shape of c");
        return cfg;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad config JSON: ") + e.what());
    }
}

Json config_to_json(const SampleConfig& cfg) {
    Json a = Json::array(), b = Json::array(), c = Json::array();
    for (Eigen::Index i = 0; i < cfg.a.size(); ++i) a.push_back(cfg.a[i]);
    for (Eigen::Index i = 0; i < cfg.b.size(); ++i) b.push_back(cfg.b[i]);
    for (Eigen::Index i = 0; i < cfg.c.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < cfg.c.cols(); ++k) row.push_back(cfg.c(i, k));
        c.push_back(row);
    }
    return Json{{"a", a}, {"b", b}, {"c", c}};
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path + ": " + e.what());
    }
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace twoloc
