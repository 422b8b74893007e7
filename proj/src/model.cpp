#include "iplan/model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <iterator>
#include <sstream>

namespace iplan {

namespace {

constexpr const char* kMagic = "iplan-model";

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& v) { return v.is_null() ? kInfinity : v.get<double>(); }

nlohmann::json payload(const Model& model) {
    const auto& mdp = model.mdp();
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : mdp.nodes()) {
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& e : node.edges) {
            nlohmann::json outcomes = nlohmann::json::array();
            for (const auto& o : e.outcomes) outcomes.push_back({o.target, o.count});
            edges.push_back({{"action", e.action.name},
                             {"n", e.n},
                             {"total_duration", e.total_duration},
                             {"outcomes", outcomes}});
        }
        nodes.push_back({{"state", to_json(node.state)}, {"goal", node.is_goal}, {"edges", edges}});
    }
    nlohmann::json doc{{"schema", to_json(mdp.schema())},
                       {"n_reports", mdp.report_count()},
                       {"nodes", nodes},
                       {"weights", model.weights().w},
                       {"confidence_threshold", model.confidence_threshold()}};
    if (model.solved()) {
        const auto& sol = model.solution();
        nlohmann::json value = nlohmann::json::array();
        nlohmann::json q = nlohmann::json::array();
        nlohmann::json policy = nlohmann::json::array();
        for (NodeId s = 0; s < sol.value.size(); ++s) {
            value.push_back(number_or_null(sol.value[s]));
            nlohmann::json row = nlohmann::json::array();
            for (double x : sol.q[s]) row.push_back(number_or_null(x));
            q.push_back(std::move(row));
            policy.push_back(sol.policy[s] ? nlohmann::json(*sol.policy[s]) : nlohmann::json(nullptr));
        }
        nlohmann::json closed = nlohmann::json::array();
        for (NodeId s = 0; s < sol.closed.size(); ++s) {
            if (sol.closed[s]) closed.push_back(s);
        }
        doc["solution"] = {{"value", value},
                           {"q", q},
                           {"policy", policy},
                           {"closed", closed},
                           {"unreachable", sol.unreachable}};
    }
    return doc;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

Model::Model(StochasticMdp mdp, FeatureWeights weights) : mdp_(std::move(mdp)), weights_(std::move(weights)) {
    if (weights_.w.size() != mdp_.schema().dimension())
        throw std::invalid_argument("weight vector does not match the schema dimension");
    ssp_ = to_ssp(mdp_, CostModel::frequency_penalized);
    index_ = NodeIndex(mdp_);
    threshold_ = default_confidence_threshold(index_, weights_);
    build_hash_ = sha256_hex(payload(*this).dump());
}

Model Model::build(const Corpus& corpus) {
    auto reports = corpus.reports_in(Split::train);
    if (reports.empty()) {
        for (const auto& r : corpus.reports) reports.push_back(&r);
    }
    auto mdp = build_mdp(reports, corpus.schema);
    auto weights = compute_weights(group_by_resolution(reports), corpus.schema);
    return Model(std::move(mdp), std::move(weights));
}

void Model::solve(SolveOptions options) { adopt(iplan::solve(ssp_, options)); }

void Model::adopt(Solution solution) {
    if (solution.value.size() != mdp_.size()) throw std::invalid_argument("solution does not match the model");
    solution_ = std::move(solution);
    derive();
    build_hash_ = sha256_hex(payload(*this).dump());
}

void Model::derive() {
    time_solution_ = iplan::solve(to_ssp(mdp_, CostModel::time_only));
    forecasts_.emplace(mdp_, *time_solution_, ForecastPolicy::behavior, nullptr);
}

const Solution& Model::solution() const {
    if (!solution_) throw std::logic_error("model has not been solved");
    return *solution_;
}

const Solution& Model::time_solution() const {
    if (!time_solution_) throw std::logic_error("model has not been solved");
    return *time_solution_;
}

const ForecastTable& Model::forecasts() const {
    if (!forecasts_) throw std::logic_error("model has not been solved");
    return *forecasts_;
}

ModelStats Model::stats() const {
    ModelStats s;
    s.n_nodes = mdp_.size();
    s.n_edges = mdp_.edge_count();
    s.n_reports = mdp_.report_count();
    s.categories = schema().event_def().categories;
    s.build_hash = build_hash_;
    return s;
}

double default_confidence_threshold(const NodeIndex& index, const FeatureWeights& weights) {
    const std::size_t n = index.size();
    if (n < 2) return 0.0;
    const std::size_t stride = std::max<std::size_t>(1, n / 1000);
    std::vector<double> nearest;
    for (NodeId i = 0; i < n; i += stride) {
        double best = kInfinity;
        for (NodeId j = 0; j < n; ++j) {
            if (j != i) best = std::min(best, distance(index.vector(i), index.vector(j), weights));
        }
        nearest.push_back(best);
    }
    std::sort(nearest.begin(), nearest.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(nearest.size()))) - 1;
    return nearest[std::min(rank, nearest.size() - 1)];
}

void write_model(const Model& model, std::ostream& out) {
    const std::string body = payload(model).dump();
    out << kMagic << ' ' << kModelFormatVersion << ' ' << sha256_hex(body) << ' ' << body.size() << '\n' << body;
    if (!out) throw ModelFormatError("failed to write model");
}

Model read_model(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ModelFormatError("empty model file");
    std::istringstream fields(header);
    std::string magic, checksum;
    int version = 0;
    std::size_t size = 0;
    if (!(fields >> magic) || magic != kMagic) throw ModelFormatError("not a model file (bad magic)");
    if (!(fields >> version)) throw ModelFormatError("corrupt model header");
    if (version > kModelFormatVersion)
        throw VersionError("model format version " + std::to_string(version) + " is newer than supported version " +
                           std::to_string(kModelFormatVersion));
    if (version != kModelFormatVersion)
        throw VersionError("unsupported model format version " + std::to_string(version));
    if (!(fields >> checksum >> size)) throw ModelFormatError("corrupt model header");

    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (body.size() != size || sha256_hex(body) != checksum)
        throw ChecksumError("model checksum mismatch (truncated or corrupt file)");

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
        auto schema = schema_from_json(doc.at("schema"));
        std::vector<Node> nodes;
        for (const auto& jn : doc.at("nodes")) {
            Node node;
            node.state = state_from_json(jn.at("state"), schema);
            node.key = state_key(node.state, schema);
            node.is_goal = jn.at("goal").get<bool>();
            for (const auto& je : jn.at("edges")) {
                Edge e;
                e.action = ActionId{je.at("action").get<std::string>()};
                e.n = je.at("n").get<std::uint64_t>();
                e.total_duration = je.at("total_duration").get<double>();
                for (const auto& jo : je.at("outcomes"))
                    e.outcomes.push_back({jo.at(0).get<NodeId>(), jo.at(1).get<std::uint64_t>(), 0.0});
                node.edges.push_back(std::move(e));
            }
            nodes.push_back(std::move(node));
        }
        StochasticMdp mdp(schema, std::move(nodes), doc.at("n_reports").get<std::size_t>());
        FeatureWeights weights{doc.at("weights").get<std::vector<double>>()};

        Model model;
        model.mdp_ = std::move(mdp);
        model.weights_ = std::move(weights);
        if (model.weights_.w.size() != model.mdp_.schema().dimension())
            throw ModelFormatError("weight vector does not match the schema dimension");
        model.ssp_ = to_ssp(model.mdp_, CostModel::frequency_penalized);
        model.index_ = NodeIndex(model.mdp_);
        model.threshold_ = doc.at("confidence_threshold").get<double>();

        if (doc.contains("solution")) {
            const auto& js = doc["solution"];
            Solution sol;
            const std::size_t n = model.mdp_.size();
            for (const auto& v : js.at("value")) sol.value.push_back(number_from(v));
            for (const auto& row : js.at("q")) {
                std::vector<double> r;
                for (const auto& v : row) r.push_back(number_from(v));
                sol.q.push_back(std::move(r));
            }
            for (const auto& p : js.at("policy"))
                sol.policy.push_back(p.is_null() ? std::nullopt : std::optional<std::size_t>(p.get<std::size_t>()));
            sol.closed.assign(n, false);
            for (const auto& c : js.at("closed")) sol.closed.at(c.get<NodeId>()) = true;
            sol.unreachable = js.at("unreachable").get<std::vector<NodeId>>();
            if (sol.value.size() != n || sol.q.size() != n || sol.policy.size() != n)
                throw ModelFormatError("solution does not match the graph");
            for (NodeId s = 0; s < n; ++s) {
                if (sol.q[s].size() != model.ssp_.actions[s].size())
                    throw ModelFormatError("solution Q row does not match the actions of node " + std::to_string(s));
                if (sol.policy[s] && *sol.policy[s] >= sol.q[s].size())
                    throw ModelFormatError("policy index out of range at node " + std::to_string(s));
            }
            model.solution_ = std::move(sol);
            model.derive();
        }
        model.build_hash_ = checksum;
        return model;
    } catch (const ModelFormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelFormatError(std::string("invalid model payload: ") + e.what());
    }
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelFormatError("cannot write model file " + path);
    write_model(model, out);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open model file " + path);
    return read_model(in);
}

}  // namespace iplan
