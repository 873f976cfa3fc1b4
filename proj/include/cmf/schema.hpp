#pragma once

#include <string>
#include <vector>

#include "cmf/expfam.hpp"

namespace cmf {

struct EntityType {
  int id = 0;  // contiguous 1..E
  std::string name;
  long count = 0;
};

struct RelationSpec {
  std::string id;
  int row_type = 0;
  int col_type = 0;
  Family family = Family::Gaussian;
};

// Sparse observed matrix. Indices are 0-based in memory; the CSV format on
// disk is 1-based. Absent pairs carry weight 0, present pairs weight 1.
struct ObservedMatrix {
  std::string relation;
  std::vector<long> rows, cols;
  std::vector<double> vals;
  // Standardization transform (identity unless standardize_gaussian ran).
  double std_mean = 0.0;
  double std_stddev = 1.0;

  size_t size() const { return vals.size(); }
};

struct RelationalSchema {
  std::vector<EntityType> entity_types;  // sorted by id
  std::vector<RelationSpec> relations;
  std::vector<ObservedMatrix> matrices;  // parallel to relations

  const EntityType& type_by_id(int id) const;
  int relation_index(const std::string& id) const;  // -1 if absent
};

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_schema(const RelationalSchema& schema);

// Shifts/scales observed entries to mean 0, variance 1 (population stddev).
// Returns the transformed matrix with the transform recorded on it.
ObservedMatrix standardize_gaussian(const ObservedMatrix& matrix);

// Compiled row/column adjacency for training loops.
struct RelationData {
  int spec_index = 0;
  int row_type_pos = 0;  // positions into schema.entity_types
  int col_type_pos = 0;
  Family family = Family::Gaussian;
  double std_mean = 0.0, std_stddev = 1.0;
  // CSR over rows: for row i, cols/vals in [row_ptr[i], row_ptr[i+1])
  std::vector<long> row_ptr, row_col;
  std::vector<double> row_val;
  // CSR over cols
  std::vector<long> col_ptr, col_row;
  std::vector<double> col_val;
};

struct Dataset {
  std::vector<long> counts;  // per entity type, in id order
  std::vector<std::string> type_names;
  std::vector<RelationSpec> specs;
  std::vector<RelationData> rels;

  long total_observed() const;
};

Dataset compile(const RelationalSchema& schema);

// Disk formats: schema JSON + headerless triplet CSVs (1-based indices).
RelationalSchema load_schema(const std::string& json_path);
void save_schema(const RelationalSchema& schema, const std::string& json_path,
                 const std::string& matrix_dir);
ObservedMatrix load_matrix_csv(const std::string& path, const std::string& relation);
void save_matrix_csv(const ObservedMatrix& m, const std::string& path);

}  // namespace cmf
