#include "resgin/data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace resgin::data {

namespace {

std::vector<std::string> read_lines(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string("FileNotFound: cannot open ") + what + " file " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

const std::vector<double>& CellLineTable::profile(const std::string& id) const {
  auto it = profiles.find(id);
  if (it == profiles.end()) throw DataError("unknown cell line '" + id + "'");
  return it->second;
}

const GraphCache::Entry& GraphCache::get(const std::string& smiles) {
  auto it = entries_.find(smiles);
  if (it != entries_.end()) return it->second;
  ++parse_count_;
  Entry e;
  e.molecule = chem::parse_smiles(smiles);
  e.graph = chem::build_graph(e.molecule);
  return entries_.emplace(smiles, std::move(e)).first->second;
}

const GraphCache::Entry* GraphCache::find(const std::string& smiles) const {
  auto it = entries_.find(smiles);
  return it == entries_.end() ? nullptr : &it->second;
}

const chem::MolecularGraph& Dataset::graph(const std::string& smiles) const {
  const GraphCache::Entry* e = cache.find(smiles);
  if (!e) throw DataError("SMILES not present in dataset cache: " + smiles);
  return e->graph;
}

CellLineTable load_cell_lines(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path, "expression");
  if (lines.empty() || lines[0].empty())
    throw DataError("BadHeader: expression file " + path + " has no header line");
  const char delim = lines[0].find('\t') != std::string::npos ? '\t' : ',';

  CellLineTable table;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    std::vector<std::string> fields = split(lines[i], delim);
    if (fields.size() < 2)
      throw DataError("RaggedRow: line " + std::to_string(line_no) + " has no expression values");
    const std::string& id = fields[0];
    if (table.contains(id))
      throw DataError("DuplicateId: cell line '" + id + "' repeated at line " +
                      std::to_string(line_no));
    std::vector<double> values(fields.size() - 1);
    for (size_t j = 1; j < fields.size(); ++j) {
      if (!parse_double(fields[j], values[j - 1]))
        throw DataError("RaggedRow: line " + std::to_string(line_no) + " column " +
                        std::to_string(j + 1) + " is not numeric: '" + fields[j] + "'");
    }
    if (table.d_gene == 0) {
      table.d_gene = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != table.d_gene) {
      throw DataError("RaggedRow: line " + std::to_string(line_no) + " has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(table.d_gene));
    }
    table.ids.push_back(id);
    table.profiles.emplace(id, std::move(values));
  }
  if (table.ids.empty()) throw DataError("expression file " + path + " has no data rows");
  return table;
}

static const char* kSampleHeader = "drug_a_smiles,drug_b_smiles,cell_line,label";

std::vector<SynergySample> load_samples(const std::string& path, const CellLineTable& cells,
                                        GraphCache& cache, bool fail_fast) {
  const std::vector<std::string> lines = read_lines(path, "sample");
  if (lines.empty() || lines[0] != kSampleHeader)
    throw DataError("BadHeader: sample file " + path + " must start with '" + kSampleHeader + "'");

  std::vector<SynergySample> samples;
  std::vector<std::string> errors;
  auto row_error = [&](int line_no, const std::string& msg) {
    errors.push_back("line " + std::to_string(line_no) + ": " + msg);
    if (fail_fast) throw DataError("bad row in " + path + ", " + errors.back());
  };

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    std::vector<std::string> fields = split(lines[i], ',');
    if (fields.size() != 4) {
      row_error(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    SynergySample s;
    s.drug_a = fields[0];
    s.drug_b = fields[1];
    s.cell_line = fields[2];
    if (fields[3] == "0") {
      s.label = 0;
    } else if (fields[3] == "1") {
      s.label = 1;
    } else {
      row_error(line_no, "InvalidLabel: '" + fields[3] + "' is not 0 or 1");
      continue;
    }
    if (!cells.contains(s.cell_line)) {
      row_error(line_no, "unknown cell line '" + s.cell_line + "'");
      continue;
    }
    bool parsed = true;
    for (const std::string* smiles : {&s.drug_a, &s.drug_b}) {
      try {
        cache.get(*smiles);
      } catch (const chem::SmilesError& e) {
        row_error(line_no, "bad SMILES '" + *smiles + "': " + e.what());
        parsed = false;
        break;
      }
    }
    if (!parsed) continue;
    samples.push_back(std::move(s));
  }

  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " bad row(s) in " + path;
    for (const std::string& e : errors) msg += "\n  " + e;
    throw DataError(msg);
  }
  return samples;
}

Dataset load_dataset(const std::string& samples_path, const std::string& cells_path,
                     bool fail_fast) {
  Dataset d;
  d.cells = load_cell_lines(cells_path);
  d.samples = load_samples(samples_path, d.cells, d.cache, fail_fast);
  return d;
}

void write_samples(const std::string& path, const std::vector<SynergySample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write sample file " + path);
  out << kSampleHeader << "\n";
  for (const SynergySample& s : samples)
    out << s.drug_a << ',' << s.drug_b << ',' << s.cell_line << ',' << s.label << "\n";
}

std::vector<int> FoldSplit::train_indices(int held_out) const {
  std::vector<int> out;
  for (int f = 0; f < fold_count(); ++f) {
    if (f == held_out) continue;
    out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  return out;
}

FoldSplit kfold_split(int n, int k, uint64_t seed) {
  if (k < 2) throw DataError("InvalidK: need at least 2 folds, got " + std::to_string(k));
  if (n < k)
    throw DataError("InvalidK: " + std::to_string(n) + " samples cannot fill " + std::to_string(k) +
                    " folds");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  FoldSplit split;
  split.folds.resize(k);
  const int base = n / k;
  const int extra = n % k;
  size_t cursor = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    split.folds[f].assign(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
  }
  return split;
}

std::vector<std::vector<int>> batch_iter(const std::vector<int>& indices, int batch_size,
                                         bool shuffle, uint64_t seed) {
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  std::vector<int> order = indices;
  if (shuffle) Rng(seed).shuffle(order);
  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

const std::vector<std::string>& toy_smiles() {
  static const std::vector<std::string> list = {
      "C",          "CC",          "CCC",        "CC(C)C",     "C=C",
      "C#C",        "CCO",         "CC(=O)O",    "CC(=O)C",    "OS(=O)(=O)O",
      "C1CCCCC1",   "C%10CCCCC%10", "c1ccccc1",  "Cc1ccccc1",  "Oc1ccccc1",
      "Nc1ccccc1",  "c1ccncc1",    "c1ccc2ccccc2c1", "c1ccoc1", "c1cc[nH]c1",
  };
  return list;
}

namespace {

bool has_oxygen(const chem::Molecule& m) {
  for (const chem::Atom& a : m.atoms)
    if (a.element == "O") return true;
  return false;
}

bool has_aromatic(const chem::Molecule& m) {
  for (const chem::Atom& a : m.atoms)
    if (a.aromatic) return true;
  return false;
}

}  // namespace

int toy_label(const chem::Molecule& a, const chem::Molecule& b) {
  const bool positive =
      (has_oxygen(a) && has_aromatic(b)) || (has_oxygen(b) && has_aromatic(a));
  return positive ? 1 : 0;
}

void write_toy_dataset(const std::string& dir, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::vector<std::string>& smiles = toy_smiles();
  const int n = static_cast<int>(smiles.size());

  std::vector<chem::Molecule> mols;
  mols.reserve(n);
  for (const std::string& s : smiles) mols.push_back(chem::parse_smiles(s));

  const std::vector<std::string> cell_ids = {"CELL_A", "CELL_B", "CELL_C", "CELL_D"};
  constexpr int kGenes = 16;
  Rng rng(mix_seed(seed, 0x70));
  std::ofstream expr(fs::path(dir) / "toy_expr.tsv", std::ios::binary);
  if (!expr) throw DataError("cannot write " + dir + "/toy_expr.tsv");
  expr << "cell_line";
  for (int g = 0; g < kGenes; ++g) expr << "\tg" << g;
  expr << "\n";
  expr.precision(17);
  for (const std::string& id : cell_ids) {
    expr << id;
    for (int g = 0; g < kGenes; ++g) expr << '\t' << rng.uniform(-1.0, 1.0);
    expr << "\n";
  }

  std::vector<SynergySample> samples;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      SynergySample s;
      s.drug_a = smiles[i];
      s.drug_b = smiles[j];
      s.cell_line = cell_ids[(i * n + j) % cell_ids.size()];
      s.label = toy_label(mols[i], mols[j]);
      samples.push_back(std::move(s));
    }
  }
  for (int t = 0; t < 100; ++t) {
    const int i = (t * 3) % n;
    const int j = (t * 7 + 1) % n;
    SynergySample s;
    s.drug_a = smiles[i];
    s.drug_b = smiles[j];
    s.cell_line = cell_ids[(t + 2) % cell_ids.size()];
    s.label = toy_label(mols[i], mols[j]);
    samples.push_back(std::move(s));
  }
  write_samples((fs::path(dir) / "toy.csv").string(), samples);
}

}  // namespace resgin::data
