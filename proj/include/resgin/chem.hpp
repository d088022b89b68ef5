#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resgin/tensor.hpp"

namespace resgin::chem {

enum class BondOrder { Single, Double, Triple, Aromatic };

/// Contribution of one bond to an atom's valence; aromatic counts 1.5.
double bond_order_value(BondOrder order);

struct Atom {
  std::string element;           // capitalized symbol as written ("C", "Cl", "Se")
  bool aromatic = false;
  int formal_charge = 0;
  std::optional<int> explicit_h; // present only for bracket atoms
  int degree = 0;                // heavy-atom neighbors, filled at finalize
  int implicit_h = 0;            // computed at finalize
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::string source;  // original SMILES text

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }
};

enum class SmilesErrorKind {
  EmptyInput,
  UnclosedBranch,
  UnmatchedRingBond,
  UnknownSymbol,
  UnsupportedFeature,
};

class SmilesError : public std::runtime_error {
 public:
  SmilesError(SmilesErrorKind kind, size_t offset, const std::string& what);
  SmilesErrorKind kind() const { return kind_; }
  size_t offset() const { return offset_; }

 private:
  SmilesErrorKind kind_;
  size_t offset_;
};

/// Parses the supported SMILES subset: organic-subset atoms, bracket atoms
/// with charge and H count, branches, ring closures (digits and %nn), bond
/// symbols - = # :. Stereo markers and isotopes are accepted and ignored.
Molecule parse_smiles(std::string_view text);

/// Default valence minus the summed incident bond orders (aromatic as 1.5),
/// floored at zero. Only meaningful for the organic subset; bracket atoms
/// carry their H count explicitly.
int implicit_hydrogens(const Atom& atom, const std::vector<BondOrder>& incident_orders);

inline constexpr int kAtomFeatureDim = 78;

/// One-hot symbol table used by the 44-slot element block; last slot catches
/// everything else.
const std::vector<std::string>& featurizer_symbols();

/// 78-dim atom feature vector: element one-hot (44), degree (11), total
/// hydrogens (11), implicit valence (11), aromatic flag (1). Count blocks
/// clamp out-of-range values into their final slot.
std::vector<double> featurize_atom(const Atom& atom, const Molecule& mol);

struct MolecularGraph {
  diff::Tensor node_features;               // N x 78
  std::vector<std::vector<int>> neighbors;  // symmetric adjacency lists

  int node_count() const { return node_features.rows; }
};

MolecularGraph build_graph(const Molecule& mol);

}  // namespace resgin::chem
