#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "resgin/chem.hpp"
#include "resgin/rng.hpp"

namespace resgin::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynergySample {
  std::string drug_a;
  std::string drug_b;
  std::string cell_line;
  int label = 0;
};

struct CellLineTable {
  std::vector<std::string> ids;  // file order
  std::unordered_map<std::string, std::vector<double>> profiles;
  int d_gene = 0;

  bool contains(const std::string& id) const { return profiles.count(id) != 0; }
  const std::vector<double>& profile(const std::string& id) const;
};

/// Parses each distinct SMILES exactly once and keeps the molecule plus its
/// featurized graph. Populated single-threaded at load; read-only after.
class GraphCache {
 public:
  struct Entry {
    chem::Molecule molecule;
    chem::MolecularGraph graph;
  };

  const Entry& get(const std::string& smiles);
  const Entry* find(const std::string& smiles) const;
  size_t parse_count() const { return parse_count_; }
  size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, Entry> entries_;
  size_t parse_count_ = 0;
};

struct Dataset {
  std::vector<SynergySample> samples;
  CellLineTable cells;
  GraphCache cache;

  const chem::MolecularGraph& graph(const std::string& smiles) const;
};

/// Expression table: header line (used only to auto-detect tab vs comma),
/// then one row per cell line: id followed by numeric values.
CellLineTable load_cell_lines(const std::string& path);

/// CSV with header drug_a_smiles,drug_b_smiles,cell_line,label. Row-level
/// problems (bad SMILES, bad label, unknown cell line) are collected and
/// reported together unless fail_fast is set.
std::vector<SynergySample> load_samples(const std::string& path, const CellLineTable& cells,
                                        GraphCache& cache, bool fail_fast = false);

Dataset load_dataset(const std::string& samples_path, const std::string& cells_path,
                     bool fail_fast = false);

void write_samples(const std::string& path, const std::vector<SynergySample>& samples);

struct FoldSplit {
  std::vector<std::vector<int>> folds;

  int fold_count() const { return static_cast<int>(folds.size()); }
  /// All indices outside fold `held_out`, in fold order.
  std::vector<int> train_indices(int held_out) const;
};

/// Seeded shuffle then contiguous slicing; fold sizes differ by at most one.
FoldSplit kfold_split(int n, int k, uint64_t seed);

/// One epoch of index batches; covers every index exactly once, last batch
/// may be short. shuffle=false keeps the given order.
std::vector<std::vector<int>> batch_iter(const std::vector<int>& indices, int batch_size,
                                         bool shuffle, uint64_t seed);

/// The 20 small molecules used by the synthetic dataset.
const std::vector<std::string>& toy_smiles();

/// Label rule of the synthetic set: positive iff one drug contains oxygen
/// and the other is aromatic (in either assignment).
int toy_label(const chem::Molecule& a, const chem::Molecule& b);

/// Writes <dir>/toy.csv (500 pairs over 4 synthetic cell lines) and
/// <dir>/toy_expr.tsv (16 expression values per line).
void write_toy_dataset(const std::string& dir, uint64_t seed);

}  // namespace resgin::data
