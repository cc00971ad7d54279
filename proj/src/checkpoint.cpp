// SPDX-License-Identifier: Apache-2.0
#include "stressdet/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace stressdet {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "stress-model";
constexpr int kVersion = 1;

void fnv1a_append(std::uint64_t& hash, const std::string& bytes) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
}

// Canonical digest over tensor names, shapes and full-precision values.
std::string content_checksum(const ModelParameters& params) {
  std::uint64_t hash = 14695981039346656037ULL;
  auto& p = const_cast<ModelParameters&>(params);
  visit_tensors(p, [&](const char* name, Eigen::MatrixXd& m) {
    char buf[64];
    fnv1a_append(hash, name);
    std::snprintf(buf, sizeof(buf), "|%lldx%lld|", static_cast<long long>(m.rows()),
                  static_cast<long long>(m.cols()));
    fnv1a_append(hash, buf);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g,", m(r, c));
        fnv1a_append(hash, buf);
      }
    }
  });
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a:%016llx",
                static_cast<unsigned long long>(hash));
  return out;
}

json config_to_json(const ModelConfig& cfg) {
  return json{{"max_syllables", cfg.max_syllables},
              {"gru_units", cfg.gru_units},
              {"head_units", cfg.head_units},
              {"dropout", cfg.dropout},
              {"phoneme_inventory", cfg.phoneme_inventory},
              {"use_attention", cfg.use_attention}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.max_syllables = j.at("max_syllables").get<int>();
  cfg.gru_units = j.at("gru_units").get<int>();
  cfg.head_units = j.at("head_units").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.phoneme_inventory = j.at("phoneme_inventory").get<int>();
  cfg.use_attention = j.at("use_attention").get<bool>();
  if (cfg.max_syllables < 2 || cfg.gru_units < 1 || cfg.head_units < 1 ||
      cfg.phoneme_inventory < 2) {
    throw std::runtime_error("checkpoint config: counts must be positive");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw std::runtime_error("checkpoint config: dropout outside [0, 1)");
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  validate_shapes(ckpt.params, ckpt.config);
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["config"] = config_to_json(ckpt.config);
  json tensors = json::object();
  auto& p = const_cast<ModelParameters&>(ckpt.params);
  visit_tensors(p, [&](const char* name, Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        data.push_back(m(r, c));
      }
    }
    tensors[name] = json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
  });
  doc["tensors"] = std::move(tensors);
  doc["checksum"] = content_checksum(ckpt.params);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != kFormat) {
    throw std::runtime_error("checkpoint '" + path + "': unknown format");
  }
  if (doc.value("version", -1) != kVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " +
                             std::to_string(doc.value("version", -1)));
  }
  Checkpoint ckpt;
  ckpt.config = config_from_json(doc.at("config"));
  ckpt.params = zero_parameters(ckpt.config);
  const json& tensors = doc.at("tensors");
  visit_tensors(ckpt.params, [&](const char* name, Eigen::MatrixXd& m) {
    if (!tensors.contains(name)) {
      throw std::runtime_error("checkpoint '" + path + "': missing tensor '" +
                               std::string(name) + "'");
    }
    const json& t = tensors.at(name);
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != m.rows() || cols != m.cols()) {
      throw std::runtime_error("checkpoint '" + path + "': tensor '" +
                               std::string(name) + "' has shape " +
                               std::to_string(rows) + "x" + std::to_string(cols) +
                               ", config requires " + std::to_string(m.rows()) +
                               "x" + std::to_string(m.cols()));
    }
    const json& data = t.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw std::runtime_error("checkpoint '" + path + "': tensor '" +
                               std::string(name) + "' data length mismatch");
    }
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = data[static_cast<std::size_t>(i++)].get<double>();
      }
    }
  });
  const std::string stored = doc.value("checksum", "");
  const std::string actual = content_checksum(ckpt.params);
  if (stored != actual) {
    throw std::runtime_error("checkpoint '" + path + "': checksum mismatch (" +
                             stored + " vs " + actual + ")");
  }
  validate_shapes(ckpt.params, ckpt.config);
  return ckpt;
}

void write_attention_csv(const Eigen::MatrixXd& weights, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write attention CSV '" + path + "'");
  char buf[64];
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", weights(r, c));
      out << buf << (c + 1 == weights.cols() ? "" : ",");
    }
    out << '\n';
  }
}

}  // namespace stressdet
