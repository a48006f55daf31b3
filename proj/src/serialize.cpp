#include "skipfold/serialize.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skipfold/errors.hpp"

namespace skipfold::io {

namespace {

using nlohmann::json;

json parse_strict(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid JSON: ") + e.what());
  }
}

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const char* what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known) throw Error(std::string(what) + ": unknown field '" + item.key() + "'");
  }
}

int read_positive_int(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw Error(std::string("weight file: '") + key + "' must be an integer");
  const int v = j.at(key).get<int>();
  if (v < 1) throw Error(std::string("weight file: '") + key + "' must be positive");
  return v;
}

Matrix read_matrix(const json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw Error("weight file: '" + name + "' must be an array of " + std::to_string(rows) +
                " rows");
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(rows) * cols);
  for (const json& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw Error("weight file: each row of '" + name + "' must hold " + std::to_string(cols) +
                  " numbers");
    for (const json& v : row) {
      if (!v.is_number()) throw Error("weight file: '" + name + "' entries must be numbers");
      flat.push_back(v.get<double>());
    }
  }
  try {
    return Matrix(rows, cols, std::move(flat));
  } catch (const Error& e) {
    throw Error("weight file: '" + name + "': " + e.what());
  }
}

Matrix read_free_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.at(0).is_array() || j.at(0).empty())
    throw Error("'" + name + "' must be a nonempty nested array");
  return read_matrix(j, static_cast<int>(j.size()), static_cast<int>(j.at(0).size()), name);
}

Skip read_skip(const json& j, int d) {
  if (j.is_string()) {
    const std::string tag = j.get<std::string>();
    if (tag == "none") return SkipNone{};
    if (tag == "identity") return SkipIdentity{};
    throw Error("weight file: skip must be \"none\", \"identity\", or {\"matrix\": ...}");
  }
  if (j.is_object()) {
    require_known_keys(j, {"matrix"}, "weight file skip");
    if (!j.contains("matrix")) throw Error("weight file: general skip needs a 'matrix' field");
    return SkipGeneral{read_matrix(j.at("matrix"), d, d, "skip.matrix")};
  }
  throw Error("weight file: skip must be a string tag or an object");
}

JsonValue skip_to_json(const Skip& skip) {
  if (std::holds_alternative<SkipNone>(skip)) return JsonValue::string("none");
  if (std::holds_alternative<SkipIdentity>(skip)) return JsonValue::string("identity");
  JsonValue obj = JsonValue::object();
  obj.set("matrix", matrix_to_json(std::get<SkipGeneral>(skip).m));
  return obj;
}

}  // namespace

JsonValue matrix_to_json(const Matrix& m) {
  JsonValue rows = JsonValue::array();
  for (int i = 0; i < m.rows(); ++i) {
    JsonValue row = JsonValue::array();
    for (int j = 0; j < m.cols(); ++j) row.push(JsonValue::number(m(i, j)));
    rows.push(std::move(row));
  }
  return rows;
}

JsonValue block_to_json(const Block& block) {
  JsonValue j = JsonValue::object();
  j.set("schema_version", JsonValue::integer(1));
  j.set("d", JsonValue::integer(block.d()));
  j.set("n", JsonValue::integer(block.n()));
  j.set("kind", JsonValue::string(block.is_ungated() ? "ungated" : "gated"));
  j.set("activation", JsonValue::string(std::string(activation_name(block.activation()))));
  if (block.is_ungated()) {
    j.set("w_up", matrix_to_json(block.as_ungated().w_up));
    j.set("w_down", matrix_to_json(block.as_ungated().w_down));
  } else {
    j.set("w_gate", matrix_to_json(block.as_gated().w_gate));
    j.set("w_val", matrix_to_json(block.as_gated().w_val));
    j.set("w_down", matrix_to_json(block.as_gated().w_down));
  }
  j.set("skip", skip_to_json(block.skip()));
  return j;
}

std::string block_to_json_text(const Block& block) { return block_to_json(block).dump() + "\n"; }

Block block_from_json_text(const std::string& text) {
  const json j = parse_strict(text);
  if (!j.is_object()) throw Error("weight file: top level must be an object");
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<int>() != 1)
    throw Error("weight file: schema_version must be the integer 1");
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw Error("weight file: 'kind' must be \"ungated\" or \"gated\"");
  const std::string kind = j.at("kind").get<std::string>();
  const int d = read_positive_int(j, "d");
  const int n = read_positive_int(j, "n");
  if (!j.contains("activation") || !j.at("activation").is_string())
    throw Error("weight file: 'activation' must be a string tag");
  const ActivationKind act = parse_activation(j.at("activation").get<std::string>());
  if (!j.contains("skip")) throw Error("weight file: 'skip' field is required");
  Skip skip = read_skip(j.at("skip"), d);

  if (kind == "ungated") {
    require_known_keys(j, {"schema_version", "d", "n", "kind", "activation", "w_up", "w_down",
                           "skip"},
                       "weight file");
    if (!j.contains("w_up") || !j.contains("w_down"))
      throw Error("weight file: ungated blocks need 'w_up' and 'w_down'");
    return Block::ungated(read_matrix(j.at("w_up"), n, d, "w_up"),
                          read_matrix(j.at("w_down"), d, n, "w_down"), act, std::move(skip));
  }
  if (kind == "gated") {
    require_known_keys(j, {"schema_version", "d", "n", "kind", "activation", "w_gate", "w_val",
                           "w_down", "skip"},
                       "weight file");
    if (!j.contains("w_gate") || !j.contains("w_val") || !j.contains("w_down"))
      throw Error("weight file: gated blocks need 'w_gate', 'w_val', and 'w_down'");
    return Block::gated(read_matrix(j.at("w_gate"), n, d, "w_gate"),
                        read_matrix(j.at("w_val"), n, d, "w_val"),
                        read_matrix(j.at("w_down"), d, n, "w_down"), act, std::move(skip));
  }
  throw Error("weight file: 'kind' must be \"ungated\" or \"gated\"");
}

Block load_block(const std::string& path) { return block_from_json_text(read_text_file(path)); }

void save_block(const Block& block, const std::string& path) {
  write_text_file(path, block_to_json_text(block));
}

Matrix matrix_from_json_text(const std::string& text) {
  return read_free_matrix(parse_strict(text), "matrix");
}

Matrix load_matrix(const std::string& path) { return matrix_from_json_text(read_text_file(path)); }

JsonValue certificate_to_json(const absorption::SubsetCertificate& cert) {
  JsonValue j = JsonValue::object();
  JsonValue subset = JsonValue::array();
  for (int i : cert.subset) subset.push(JsonValue::integer(i));
  j.set("subset", std::move(subset));
  j.set("residual", JsonValue::number(cert.residual));
  j.set("scale", JsonValue::number(cert.scale));
  if (cert.neg_identity_target) {
    j.set("target", JsonValue::string("neg_identity"));
  } else {
    JsonValue t = JsonValue::object();
    t.set("matrix", matrix_to_json(cert.target));
    j.set("target", std::move(t));
  }
  return j;
}

JsonValue report_to_json(const verification::VerificationReport& report) {
  JsonValue j = JsonValue::object();
  j.set("max_residual", JsonValue::number(report.max_residual));
  if (report.witness) {
    JsonValue w = JsonValue::array();
    for (int i = 0; i < report.witness->rows(); ++i)
      w.push(JsonValue::number((*report.witness)(i, 0)));
    j.set("witness", std::move(w));
  } else {
    j.set("witness", JsonValue());
  }
  j.set("samples_used", JsonValue::integer(report.samples_used));
  j.set("tolerance", JsonValue::number(report.tolerance));
  j.set("passed", JsonValue::boolean(report.passed));
  JsonValue detail = JsonValue::object();
  for (const auto& [key, value] : report.detail) detail.set(key, JsonValue::number(value));
  j.set("detail", std::move(detail));
  return j;
}

JsonValue probe_stats_to_json(const verification::ProbeStats& stats) {
  JsonValue j = JsonValue::object();
  j.set("trials", JsonValue::integer(stats.trials));
  j.set("hits", JsonValue::integer(stats.hits));
  JsonValue residuals = JsonValue::array();
  for (double r : stats.best_residuals) residuals.push(JsonValue::number(r));
  j.set("best_residuals", std::move(residuals));
  if (stats.trials > 0) {
    j.set("min_best", JsonValue::number(stats.min_best));
    j.set("mean_best", JsonValue::number(stats.mean_best));
    j.set("max_best", JsonValue::number(stats.max_best));
  } else {
    j.set("min_best", JsonValue());
    j.set("mean_best", JsonValue());
    j.set("max_best", JsonValue());
  }
  return j;
}

JsonValue approx_result_to_json(const approx::ApproxResult& result) {
  JsonValue j = JsonValue::object();
  j.set("v_up", matrix_to_json(result.v_up));
  j.set("v_down", matrix_to_json(result.v_down));
  JsonValue trace = JsonValue::array();
  for (double v : result.objective_trace) trace.push(JsonValue::number(v));
  j.set("objective_trace", std::move(trace));
  j.set("final_objective", JsonValue::number(result.final_objective));
  j.set("grad_check", JsonValue::number(result.grad_check));
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file '" + path + "'");
  out << content;
}

}  // namespace skipfold::io
