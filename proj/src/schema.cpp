#include "cmf/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cmf {

namespace fs = std::filesystem;
using nlohmann::json;

const EntityType& RelationalSchema::type_by_id(int id) const {
  for (const auto& t : entity_types)
    if (t.id == id) return t;
  throw std::out_of_range("unknown entity type id " + std::to_string(id));
}

int RelationalSchema::relation_index(const std::string& id) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i].id == id) return static_cast<int>(i);
  return -1;
}

ValidationReport validate_schema(const RelationalSchema& schema) {
  ValidationReport rep;
  auto err = [&rep](const std::string& m) { rep.errors.push_back(m); };

  const int E = static_cast<int>(schema.entity_types.size());
  std::set<int> ids;
  for (const auto& t : schema.entity_types) {
    ids.insert(t.id);
    if (t.count < 1) err("entity type '" + t.name + "' has count < 1");
  }
  if (static_cast<int>(ids.size()) != E || (E > 0 && (*ids.begin() != 1 || *ids.rbegin() != E)))
    err("entity type ids are not contiguous 1..E");
  if (schema.relations.empty()) err("no relations");
  if (schema.matrices.size() != schema.relations.size())
    err("expected one observed matrix per relation");

  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const auto& spec = schema.relations[r];
    if (!ids.count(spec.row_type) || !ids.count(spec.col_type)) {
      err("relation '" + spec.id + "' references undeclared entity types");
      continue;
    }
    if (spec.row_type == spec.col_type)
      err("relation '" + spec.id + "' is a self-relation (row_type == col_type)");
    if (r >= schema.matrices.size()) continue;
    const auto& m = schema.matrices[r];
    long nr = schema.type_by_id(spec.row_type).count;
    long nc = schema.type_by_id(spec.col_type).count;
    std::set<std::pair<long, long>> seen;
    for (size_t t = 0; t < m.size(); ++t) {
      long i = m.rows[t], j = m.cols[t];
      auto pos = [&] {
        return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      };
      if (i < 0 || i >= nr || j < 0 || j >= nc)
        err("relation '" + spec.id + "': index out of range at " + pos());
      else if (!seen.insert({i, j}).second)
        err("relation '" + spec.id + "': duplicate entry at " + pos());
      if (!value_admissible(spec.family, m.vals[t]))
        err("relation '" + spec.id + "': value " + std::to_string(m.vals[t]) +
            " not admissible for " + family_name(spec.family) + " at " + pos());
    }
  }

  // Connectivity of the type/relation graph; a disconnected schema trains as
  // independent pieces, which is almost certainly a config mistake.
  if (E > 0 && !schema.relations.empty()) {
    std::vector<int> parent(E + 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&parent](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& spec : schema.relations)
      if (ids.count(spec.row_type) && ids.count(spec.col_type))
        parent[find(spec.row_type)] = find(spec.col_type);
    std::set<int> roots;
    for (const auto& t : schema.entity_types) roots.insert(find(t.id));
    if (roots.size() > 1)
      err("schema graph is disconnected: training would decompose into " +
          std::to_string(roots.size()) + " independent problems");
  }
  return rep;
}

ObservedMatrix standardize_gaussian(const ObservedMatrix& matrix) {
  size_t n = matrix.size();
  if (n < 2) throw std::invalid_argument("standardize: need at least 2 observed entries");
  double mean = 0.0;
  for (double v : matrix.vals) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : matrix.vals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population convention, so chance MSE is 1
  if (var <= 0.0) throw std::invalid_argument("standardize: constant matrix");
  double sd = std::sqrt(var);
  ObservedMatrix out = matrix;
  for (double& v : out.vals) v = (v - mean) / sd;
  out.std_mean = matrix.std_mean + matrix.std_stddev * mean;
  out.std_stddev = matrix.std_stddev * sd;
  return out;
}

Dataset compile(const RelationalSchema& schema) {
  Dataset ds;
  const int E = static_cast<int>(schema.entity_types.size());
  ds.counts.resize(E);
  ds.type_names.resize(E);
  std::vector<int> pos_of_id(E + 1, -1);
  for (int p = 0; p < E; ++p) {
    const auto& t = schema.entity_types[p];
    ds.counts[p] = t.count;
    ds.type_names[p] = t.name;
    pos_of_id[t.id] = p;
  }
  ds.specs = schema.relations;
  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const auto& spec = schema.relations[r];
    const auto& m = schema.matrices[r];
    RelationData rd;
    rd.spec_index = static_cast<int>(r);
    rd.row_type_pos = pos_of_id[spec.row_type];
    rd.col_type_pos = pos_of_id[spec.col_type];
    rd.family = spec.family;
    rd.std_mean = m.std_mean;
    rd.std_stddev = m.std_stddev;
    long nr = ds.counts[rd.row_type_pos];
    long nc = ds.counts[rd.col_type_pos];
    size_t nnz = m.size();

    // counting sort into both CSR orientations, entries ordered by
    // (row, col) so the layout is independent of triplet order
    std::vector<size_t> order(nnz);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return m.rows[a] != m.rows[b] ? m.rows[a] < m.rows[b] : m.cols[a] < m.cols[b];
    });
    rd.row_ptr.assign(nr + 1, 0);
    rd.row_col.resize(nnz);
    rd.row_val.resize(nnz);
    for (size_t t = 0; t < nnz; ++t) ++rd.row_ptr[m.rows[order[t]] + 1];
    for (long i = 0; i < nr; ++i) rd.row_ptr[i + 1] += rd.row_ptr[i];
    for (size_t t = 0; t < nnz; ++t) {
      rd.row_col[t] = m.cols[order[t]];
      rd.row_val[t] = m.vals[order[t]];
    }

    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return m.cols[a] != m.cols[b] ? m.cols[a] < m.cols[b] : m.rows[a] < m.rows[b];
    });
    rd.col_ptr.assign(nc + 1, 0);
    rd.col_row.resize(nnz);
    rd.col_val.resize(nnz);
    for (size_t t = 0; t < nnz; ++t) ++rd.col_ptr[m.cols[order[t]] + 1];
    for (long j = 0; j < nc; ++j) rd.col_ptr[j + 1] += rd.col_ptr[j];
    for (size_t t = 0; t < nnz; ++t) {
      rd.col_row[t] = m.rows[order[t]];
      rd.col_val[t] = m.vals[order[t]];
    }
    ds.rels.push_back(std::move(rd));
  }
  return ds;
}

long Dataset::total_observed() const {
  long n = 0;
  for (const auto& r : rels) n += static_cast<long>(r.row_val.size());
  return n;
}

RelationalSchema load_schema(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open schema file: " + json_path);
  json j = json::parse(in);
  RelationalSchema schema;
  int next_id = 1;
  for (const auto& t : j.at("entity_types"))
    schema.entity_types.push_back(
        {next_id++, t.at("name").get<std::string>(), t.at("count").get<long>()});
  auto type_id = [&](const std::string& name) {
    for (const auto& t : schema.entity_types)
      if (t.name == name) return t.id;
    throw std::runtime_error("schema references unknown entity type: " + name);
  };
  fs::path base = fs::path(json_path).parent_path();
  for (const auto& r : j.at("relations")) {
    RelationSpec spec;
    spec.id = r.at("id").get<std::string>();
    spec.row_type = type_id(r.at("row_type").get<std::string>());
    spec.col_type = type_id(r.at("col_type").get<std::string>());
    spec.family = family_from_string(r.at("family").get<std::string>());
    schema.relations.push_back(spec);
    fs::path data = r.at("data_path").get<std::string>();
    if (data.is_relative()) data = base / data;
    auto m = load_matrix_csv(data.string(), spec.id);
    if (r.contains("std_mean")) m.std_mean = r.at("std_mean").get<double>();
    if (r.contains("std_stddev")) m.std_stddev = r.at("std_stddev").get<double>();
    schema.matrices.push_back(std::move(m));
  }
  return schema;
}

void save_schema(const RelationalSchema& schema, const std::string& json_path,
                 const std::string& matrix_dir) {
  fs::create_directories(matrix_dir);
  json j;
  j["entity_types"] = json::array();
  for (const auto& t : schema.entity_types)
    j["entity_types"].push_back({{"name", t.name}, {"count", t.count}});
  j["relations"] = json::array();
  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const auto& spec = schema.relations[r];
    std::string file = spec.id + ".csv";
    save_matrix_csv(schema.matrices[r], (fs::path(matrix_dir) / file).string());
    json jr = {{"id", spec.id},
               {"row_type", schema.type_by_id(spec.row_type).name},
               {"col_type", schema.type_by_id(spec.col_type).name},
               {"family", family_name(spec.family)},
               {"data_path", file}};
    if (schema.matrices[r].std_stddev != 1.0 || schema.matrices[r].std_mean != 0.0) {
      jr["std_mean"] = schema.matrices[r].std_mean;
      jr["std_stddev"] = schema.matrices[r].std_stddev;
    }
    j["relations"].push_back(jr);
  }
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write schema file: " + json_path);
  out << j.dump(2) << "\n";
}

ObservedMatrix load_matrix_csv(const std::string& path, const std::string& relation) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  ObservedMatrix m;
  m.relation = relation;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    long i, j;
    double v;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf", &i, &j, &v) != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad triplet");
    m.rows.push_back(i - 1);
    m.cols.push_back(j - 1);
    m.vals.push_back(v);
  }
  return m;
}

void save_matrix_csv(const ObservedMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  char buf[64];
  for (size_t t = 0; t < m.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%.17g", m.vals[t]);
    out << (m.rows[t] + 1) << ',' << (m.cols[t] + 1) << ',' << buf << '\n';
  }
}

}  // namespace cmf
