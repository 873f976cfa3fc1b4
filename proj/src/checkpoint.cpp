#include "cmf/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace cmf {

namespace {

void fnv_mix(uint64_t& h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_mix_str(uint64_t& h, const std::string& s) {
  fnv_mix(h, s.data(), s.size());
  unsigned char sep = 0xff;
  fnv_mix(h, &sep, 1);
}

void fnv_mix_i64(uint64_t& h, int64_t v) { fnv_mix(h, &v, sizeof v); }

// Doubles cross the byte stream in little-endian order regardless of host.
void write_doubles_le(std::ofstream& out, const double* p, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(double)));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits;
      std::memcpy(&bits, &p[i], 8);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = char(bits >> (8 * b));
      out.write(buf, 8);
    }
  }
}

void read_doubles_le(std::ifstream& in, double* p, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(n * sizeof(double)));
  } else {
    for (size_t i = 0; i < n; ++i) {
      char buf[8];
      in.read(buf, 8);
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= uint64_t(uint8_t(buf[b])) << (8 * b);
      std::memcpy(&p[i], &bits, 8);
    }
  }
  if (!in) throw std::runtime_error("checkpoint: factor file truncated");
}

std::string factor_filename(int e) { return "factor_" + std::to_string(e) + ".bin"; }

json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto r = j.size();
  const auto c = r ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (size_t i = 0; i < r; ++i)
    for (size_t k = 0; k < c; ++k) m(Eigen::Index(i), Eigen::Index(k)) = j[i][k].get<double>();
  return m;
}

}  // namespace

uint64_t schema_fingerprint(const Dataset& ds) {
  uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix_i64(h, int64_t(ds.counts.size()));
  for (size_t e = 0; e < ds.counts.size(); ++e) {
    fnv_mix_str(h, ds.type_names[e]);
    fnv_mix_i64(h, ds.counts[e]);
  }
  fnv_mix_i64(h, int64_t(ds.specs.size()));
  for (size_t r = 0; r < ds.specs.size(); ++r) {
    fnv_mix_str(h, ds.specs[r].id);
    fnv_mix_i64(h, ds.specs[r].row_type);
    fnv_mix_i64(h, ds.specs[r].col_type);
    fnv_mix_str(h, family_name(ds.specs[r].family));
    fnv_mix_i64(h, int64_t(ds.rels[r].row_val.size()));
  }
  return h;
}

void save_checkpoint(const std::string& dir, const Dataset& ds,
                     const ModelState& state, uint64_t seed) {
  fs::create_directories(dir);

  json meta;
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(schema_fingerprint(ds)));
  meta["schema_hash"] = hex;
  meta["k"] = state.k;
  meta["seed"] = seed;

  json factors = json::array();
  for (size_t e = 0; e < state.factors.size(); ++e) {
    json f;
    f["entity_type"] = ds.type_names[e];
    f["file"] = factor_filename(int(e));
    f["rows"] = state.factors[e].rows();
    f["cols"] = state.factors[e].cols();
    factors.push_back(std::move(f));
  }
  meta["factors"] = std::move(factors);

  json priors = json::array();
  for (size_t e = 0; e < state.priors.size(); ++e) {
    json p;
    p["entity_type"] = ds.type_names[e];
    json mu = json::array();
    for (Eigen::Index i = 0; i < state.priors[e].mu.size(); ++i)
      mu.push_back(state.priors[e].mu(i));
    p["mu"] = std::move(mu);
    p["sigma"] = matrix_to_json(state.priors[e].sigma);
    priors.push_back(std::move(p));
  }
  meta["priors"] = std::move(priors);

  json rels = json::array();
  for (size_t r = 0; r < ds.specs.size(); ++r) {
    json rel;
    rel["id"] = ds.specs[r].id;
    rel["family"] = family_name(ds.specs[r].family);
    rel["std_mean"] = ds.rels[r].std_mean;
    rel["std_stddev"] = ds.rels[r].std_stddev;
    rels.push_back(std::move(rel));
  }
  meta["relations"] = std::move(rels);

  std::ofstream mf(fs::path(dir) / "metadata.json");
  mf << meta.dump(2) << "\n";
  if (!mf) throw std::runtime_error("checkpoint: cannot write " + dir);

  for (size_t e = 0; e < state.factors.size(); ++e) {
    std::ofstream bf(fs::path(dir) / factor_filename(int(e)), std::ios::binary);
    write_doubles_le(bf, state.factors[e].data(), size_t(state.factors[e].size()));
    if (!bf) throw std::runtime_error("checkpoint: cannot write factor file");
  }
}

ModelState load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "metadata.json");
  if (!mf) throw std::runtime_error("checkpoint: missing " + dir + "/metadata.json");
  json meta = json::parse(mf);

  ModelState st;
  st.k = meta.at("k").get<int>();
  for (const auto& f : meta.at("factors")) {
    const auto rows = f.at("rows").get<Eigen::Index>();
    const auto cols = f.at("cols").get<Eigen::Index>();
    MatRM m(rows, cols);
    std::ifstream bf(fs::path(dir) / f.at("file").get<std::string>(), std::ios::binary);
    if (!bf) throw std::runtime_error("checkpoint: missing factor file in " + dir);
    read_doubles_le(bf, m.data(), size_t(m.size()));
    st.factors.push_back(std::move(m));
  }
  for (const auto& p : meta.at("priors")) {
    FactorPrior fp;
    const auto& mu = p.at("mu");
    fp.mu.resize(Eigen::Index(mu.size()));
    for (size_t i = 0; i < mu.size(); ++i) fp.mu(Eigen::Index(i)) = mu[i].get<double>();
    fp.sigma = matrix_from_json(p.at("sigma"));
    st.priors.push_back(std::move(fp));
  }
  return st;
}

void save_chain(const std::string& dir, const Dataset& ds,
                const PosteriorChain& chain, uint64_t seed) {
  fs::create_directories(dir);
  for (size_t s = 0; s < chain.samples.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03d", int(s));
    save_checkpoint((fs::path(dir) / name).string(), ds, chain.samples[s], seed);
  }

  json cj;
  cj["seed"] = seed;
  cj["epochs"] = chain.energy.size();
  cj["samples"] = chain.samples.size();
  cj["sample_epochs"] = chain.sample_epochs;
  json acc = json::array();
  for (const auto& st : chain.acceptance) {
    json a;
    a["accepted"] = st.accepted;
    a["proposed"] = st.proposed;
    a["non_finite"] = st.non_finite;
    acc.push_back(std::move(a));
  }
  cj["acceptance"] = std::move(acc);
  cj["energy"] = chain.energy;

  std::ofstream cf(fs::path(dir) / "chain.json");
  cf << cj.dump(2) << "\n";
  if (!cf) throw std::runtime_error("checkpoint: cannot write " + dir + "/chain.json");
}

PosteriorChain load_chain(const std::string& dir) {
  std::ifstream cf(fs::path(dir) / "chain.json");
  if (!cf) throw std::runtime_error("checkpoint: missing " + dir + "/chain.json");
  json cj = json::parse(cf);

  PosteriorChain chain;
  chain.sample_epochs = cj.at("sample_epochs").get<std::vector<int>>();
  chain.energy = cj.at("energy").get<std::vector<double>>();
  for (const auto& a : cj.at("acceptance")) {
    EpochStats st;
    st.accepted = a.at("accepted").get<std::vector<long>>();
    st.proposed = a.at("proposed").get<std::vector<long>>();
    st.non_finite = a.at("non_finite").get<std::vector<long>>();
    chain.acceptance.push_back(std::move(st));
  }
  const auto n = cj.at("samples").get<size_t>();
  for (size_t s = 0; s < n; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03d", int(s));
    chain.samples.push_back(load_checkpoint((fs::path(dir) / name).string()));
  }
  return chain;
}

}  // namespace cmf
