#include "branchlab/model_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace branchlab {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_fail(const std::string& origin, const std::string& what) {
  throw_error(ErrorCode::ParseError, origin + ": " + what);
}

const json& require_field(const json& j, const char* field, const std::string& origin) {
  auto it = j.find(field);
  if (it == j.end()) parse_fail(origin, std::string("missing field `") + field + "`");
  return *it;
}

VectorXd read_vector(const json& j, const char* field, int d, const std::string& origin) {
  const json& arr = require_field(j, field, origin);
  if (!arr.is_array() || static_cast<int>(arr.size()) != d)
    parse_fail(origin, std::string("field `") + field + "` must be an array of length " +
                           std::to_string(d));
  VectorXd v(d);
  for (int i = 0; i < d; ++i) {
    if (!arr[i].is_number()) parse_fail(origin, std::string("field `") + field + "` must be numeric");
    v(i) = arr[i].get<double>();
  }
  return v;
}

MatrixXd read_matrix_row_major(const json& j, const char* field, int d, const std::string& origin) {
  const json& arr = require_field(j, field, origin);
  if (!arr.is_array() || static_cast<int>(arr.size()) != d * d)
    parse_fail(origin, std::string("field `") + field + "` must be a row-major array of length " +
                           std::to_string(d * d));
  MatrixXd m(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y) m(x, y) = arr[x * d + y].get<double>();
  return m;
}

BmpModel parse_bmp(const json& j, const std::string& origin) {
  BmpModel model;
  model.d = require_field(j, "d", origin).get<int>();
  if (model.d < 1) parse_fail(origin, "`d` must be >= 1");
  model.name = j.value("name", std::string{});
  model.motion_rates = read_matrix_row_major(j, "Q", model.d, origin);
  model.branch_rate = read_vector(j, "beta", model.d, origin);

  const json& laws = require_field(j, "offspring", origin);
  if (!laws.is_array() || static_cast<int>(laws.size()) != model.d)
    parse_fail(origin, "`offspring` must list one law per type");
  model.offspring.resize(model.d);
  for (int x = 0; x < model.d; ++x) {
    if (!laws[x].is_array()) parse_fail(origin, "offspring law must be an array of atoms");
    for (const auto& atom_json : laws[x]) {
      OffspringAtom atom;
      atom.p = require_field(atom_json, "p", origin).get<double>();
      const json& counts = require_field(atom_json, "k", origin);
      if (!counts.is_array() || static_cast<int>(counts.size()) != model.d)
        parse_fail(origin, "offspring `k` must be an integer array of length " +
                               std::to_string(model.d));
      atom.counts.resize(model.d);
      for (int y = 0; y < model.d; ++y) atom.counts(y) = counts[y].get<int>();
      model.offspring[x].push_back(std::move(atom));
    }
  }
  return model;
}

SpModel parse_sp(const json& j, const std::string& origin) {
  SpModel model;
  model.d = require_field(j, "d", origin).get<int>();
  if (model.d < 1) parse_fail(origin, "`d` must be >= 1");
  model.name = j.value("name", std::string{});
  model.motion_rates = read_matrix_row_major(j, "Q", model.d, origin);
  model.a = read_vector(j, "a", model.d, origin);
  model.b = read_vector(j, "b", model.d, origin);
  if (j.contains("eta"))
    model.eta = read_matrix_row_major(j, "eta", model.d, origin);
  else
    model.eta = MatrixXd::Zero(model.d, model.d);

  model.jumps.resize(model.d);
  if (j.contains("jumps")) {
    const json& lists = j["jumps"];
    if (!lists.is_array() || static_cast<int>(lists.size()) != model.d)
      parse_fail(origin, "`jumps` must list one atom list per type");
    for (int x = 0; x < model.d; ++x) {
      for (const auto& atom_json : lists[x]) {
        JumpAtom atom;
        atom.rate = require_field(atom_json, "rate", origin).get<double>();
        atom.mass = read_vector(atom_json, "nu", model.d, origin);
        model.jumps[x].push_back(std::move(atom));
      }
    }
  }
  return model;
}

json matrix_to_json(const MatrixXd& m) {
  json arr = json::array();
  for (int x = 0; x < m.rows(); ++x)
    for (int y = 0; y < m.cols(); ++y) arr.push_back(m(x, y));
  return arr;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

AnyModel parse_model(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(origin, e.what());
  }
  const std::string kind = require_field(j, "kind", origin).get<std::string>();
  if (kind == "bmp") {
    BmpModel model = parse_bmp(j, origin);
    validate_bmp(model);
    return model;
  }
  if (kind == "sp") {
    SpModel model = parse_sp(j, origin);
    validate_sp(model);
    return model;
  }
  parse_fail(origin, "`kind` must be \"bmp\" or \"sp\"");
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::ParseError, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path);
}

std::string serialize_model(const BmpModel& model) {
  json j;
  j["kind"] = "bmp";
  if (!model.name.empty()) j["name"] = model.name;
  j["d"] = model.d;
  j["Q"] = matrix_to_json(model.motion_rates);
  j["beta"] = vector_to_json(model.branch_rate);
  json laws = json::array();
  for (const auto& law : model.offspring) {
    json atoms = json::array();
    for (const auto& atom : law) {
      json a;
      a["p"] = atom.p;
      json k = json::array();
      for (int y = 0; y < atom.counts.size(); ++y) k.push_back(atom.counts(y));
      a["k"] = k;
      atoms.push_back(a);
    }
    laws.push_back(atoms);
  }
  j["offspring"] = laws;
  return j.dump(2) + "\n";
}

std::string serialize_model(const SpModel& model) {
  json j;
  j["kind"] = "sp";
  if (!model.name.empty()) j["name"] = model.name;
  j["d"] = model.d;
  j["Q"] = matrix_to_json(model.motion_rates);
  j["a"] = vector_to_json(model.a);
  j["b"] = vector_to_json(model.b);
  j["eta"] = matrix_to_json(model.eta);
  json lists = json::array();
  for (const auto& list : model.jumps) {
    json atoms = json::array();
    for (const auto& atom : list) {
      json a;
      a["rate"] = atom.rate;
      a["nu"] = vector_to_json(atom.mass);
      atoms.push_back(a);
    }
    lists.push_back(atoms);
  }
  j["jumps"] = lists;
  return j.dump(2) + "\n";
}

std::string serialize_model(const AnyModel& model) {
  return is_bmp(model) ? serialize_model(as_bmp(model)) : serialize_model(as_sp(model));
}

void save_model(const AnyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_error(ErrorCode::ParseError, path + ": cannot open for writing");
  out << serialize_model(model);
}

}  // namespace branchlab
