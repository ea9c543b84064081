#include "sgta/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sgta {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["d"] = cfg.d;
  j["n"] = cfg.n;
  j["blocks"] = cfg.blocks;
  j["heads"] = cfg.heads;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["lambda_smooth"] = cfg.lambda_smooth;
  j["m"] = cfg.m;
  j["delta_loss"] = cfg.delta_loss;
  j["leaky_slope"] = cfg.leaky_slope;
  j["eps_scale"] = cfg.eps_scale;
  j["mc_samples_infer"] = cfg.mc_samples_infer;
  j["use_target"] = cfg.use_target;
  j["dropout"] = cfg.dropout;
  j["ablations"] = cfg.ablations.active();
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.d = j.at("d").get<int>();
  cfg.n = j.at("n").get<int>();
  cfg.blocks = j.at("blocks").get<int>();
  cfg.heads = j.value("heads", 1);
  cfg.beta = j.at("beta").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.lambda_smooth = j.at("lambda_smooth").get<double>();
  cfg.m = j.at("m").get<int>();
  cfg.delta_loss = j.at("delta_loss").get<double>();
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.eps_scale = j.at("eps_scale").get<double>();
  cfg.mc_samples_infer = j.value("mc_samples_infer", 1);
  cfg.use_target = j.value("use_target", false);
  cfg.dropout = j.value("dropout", 0.1);
  cfg.ablations =
      ablations_from_list(j.value("ablations", std::vector<std::string>{}));
  cfg.check();
  return cfg;
}

namespace {

json tensor_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd tensor_from_json(const json& rows) {
  const long nr = static_cast<long>(rows.size());
  const long nc = nr > 0 ? static_cast<long>(rows[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (long r = 0; r < nr; ++r) {
    if (static_cast<long>(rows[r].size()) != nc)
      throw ParseError("checkpoint: ragged tensor rows");
    for (long c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, SgtaModel& model) {
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = json::parse(config_to_json(model.cfg));
  j["vocab"] = model.vocab;
  for (auto& nt : model.tensors()) j["weights"][nt.name] = tensor_to_json(*nt.tensor);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

SgtaModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (!j.contains("version"))
    throw ParseError("checkpoint: missing version field");
  if (j["version"].get<int>() != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version");
  ModelConfig cfg = config_from_json(j.at("config").dump());
  std::vector<std::string> vocab = j.at("vocab").get<std::vector<std::string>>();
  SgtaModel model(cfg, vocab, 0);
  for (auto& nt : model.tensors()) {
    if (!j["weights"].contains(nt.name))
      throw ParseError("checkpoint: missing tensor " + nt.name);
    Eigen::MatrixXd m = tensor_from_json(j["weights"][nt.name]);
    if (m.rows() != nt.tensor->rows() || m.cols() != nt.tensor->cols())
      throw ParseError("checkpoint: shape mismatch for " + nt.name);
    *nt.tensor = m;
  }
  return model;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key=value");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

namespace {

int to_int(const std::string& k, const std::string& v) {
  try {
    std::size_t pos;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key " + k + ": not an integer: " + v);
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key " + k + ": not a number: " + v);
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + k + ": not a boolean: " + v);
}

}  // namespace

void apply_config(const std::map<std::string, std::string>& kv,
                  ModelConfig& mcfg, TrainConfig& tcfg) {
  for (const auto& [k, v] : kv) {
    if (k == "d") mcfg.d = to_int(k, v);
    else if (k == "n") mcfg.n = to_int(k, v);
    else if (k == "blocks") mcfg.blocks = to_int(k, v);
    else if (k == "heads") mcfg.heads = to_int(k, v);
    else if (k == "beta") mcfg.beta = to_double(k, v);
    else if (k == "gamma") mcfg.gamma = to_double(k, v);
    else if (k == "lambda_smooth") mcfg.lambda_smooth = to_double(k, v);
    else if (k == "m") mcfg.m = to_int(k, v);
    else if (k == "delta_loss") mcfg.delta_loss = to_double(k, v);
    else if (k == "leaky_slope") mcfg.leaky_slope = to_double(k, v);
    else if (k == "eps_scale") mcfg.eps_scale = to_double(k, v);
    else if (k == "mc_samples_infer") mcfg.mc_samples_infer = to_int(k, v);
    else if (k == "use_target") mcfg.use_target = to_bool(k, v);
    else if (k == "dropout") mcfg.dropout = to_double(k, v);
    else if (k == "lr") tcfg.lr = to_double(k, v);
    else if (k == "batch_size") tcfg.batch_size = to_int(k, v);
    else if (k == "epochs") tcfg.epochs = to_int(k, v);
    else if (k == "patience") tcfg.patience = to_int(k, v);
    else throw ConfigError("unknown config key: " + k);
  }
  mcfg.check();
}

}  // namespace sgta
