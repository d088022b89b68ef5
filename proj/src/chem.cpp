#include "resgin/chem.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>

namespace resgin::chem {

double bond_order_value(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

namespace {

const char* kind_name(SmilesErrorKind k) {
  switch (k) {
    case SmilesErrorKind::EmptyInput: return "EmptyInput";
    case SmilesErrorKind::UnclosedBranch: return "UnclosedBranch";
    case SmilesErrorKind::UnmatchedRingBond: return "UnmatchedRingBond";
    case SmilesErrorKind::UnknownSymbol: return "UnknownSymbol";
    case SmilesErrorKind::UnsupportedFeature: return "UnsupportedFeature";
  }
  return "SmilesError";
}

int default_valence(const std::string& element) {
  static const std::map<std::string, int> table = {
      {"B", 3}, {"C", 4}, {"N", 3}, {"O", 2},  {"P", 3},
      {"S", 2}, {"F", 1}, {"Cl", 1}, {"Br", 1}, {"I", 1},
  };
  auto it = table.find(element);
  return it == table.end() ? 0 : it->second;
}

bool is_organic_aromatic(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
  size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Molecule run() {
    if (text_.empty()) throw SmilesError(SmilesErrorKind::EmptyInput, 0, "empty SMILES string");
    while (pos_ < text_.size()) step();
    finish();
    mol_.source = std::string(text_);
    finalize_hydrogens();
    return std::move(mol_);
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
  Molecule mol_;
  int prev_ = -1;
  std::vector<int> branch_stack_;
  std::optional<BondOrder> pending_;
  size_t pending_offset_ = 0;
  std::map<int, RingOpen> open_rings_;

  [[noreturn]] void fail(SmilesErrorKind kind, size_t offset, const std::string& msg) {
    throw SmilesError(kind, offset, msg);
  }

  void step() {
    const char c = text_[pos_];
    switch (c) {
      case '(':
        if (prev_ < 0)
          fail(SmilesErrorKind::UnclosedBranch, pos_, "branch opened before any atom");
        if (pending_)
          fail(SmilesErrorKind::UnknownSymbol, pending_offset_, "bond symbol before '('");
        branch_stack_.push_back(prev_);
        ++pos_;
        return;
      case ')':
        if (branch_stack_.empty())
          fail(SmilesErrorKind::UnclosedBranch, pos_, "unmatched ')'");
        if (pending_)
          fail(SmilesErrorKind::UnknownSymbol, pending_offset_, "bond symbol before ')'");
        prev_ = branch_stack_.back();
        branch_stack_.pop_back();
        ++pos_;
        return;
      case '-': set_bond(BondOrder::Single); return;
      case '=': set_bond(BondOrder::Double); return;
      case '#': set_bond(BondOrder::Triple); return;
      case ':': set_bond(BondOrder::Aromatic); return;
      case '/':
      case '\\':
        // up/down markers carry cis/trans configuration we do not model;
        // the bond itself is the default single bond
        ++pos_;
        return;
      case '.':
        fail(SmilesErrorKind::UnsupportedFeature, pos_, "multi-fragment input ('.') not supported");
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
          fail(SmilesErrorKind::UnknownSymbol, pos_, "'%' must be followed by two digits");
        const int rnum = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_bond(rnum, pos_);
        pos_ += 3;
        return;
      }
      case '[': parse_bracket(); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_bond(c - '0', pos_);
      ++pos_;
      return;
    }
    if (std::isupper(static_cast<unsigned char>(c))) {
      parse_organic_upper();
      return;
    }
    if (is_organic_aromatic(c)) {
      Atom a;
      a.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      a.aromatic = true;
      add_atom(std::move(a));
      ++pos_;
      return;
    }
    fail(SmilesErrorKind::UnknownSymbol, pos_,
         std::string("unexpected character '") + c + "'");
  }

  void set_bond(BondOrder order) {
    if (pending_)
      fail(SmilesErrorKind::UnknownSymbol, pos_, "consecutive bond symbols");
    pending_ = order;
    pending_offset_ = pos_;
    ++pos_;
  }

  void parse_organic_upper() {
    static const std::array<const char*, 2> two = {"Cl", "Br"};
    static const std::array<char, 8> one = {'B', 'C', 'N', 'O', 'P', 'S', 'F', 'I'};
    for (const char* sym : two) {
      if (text_.substr(pos_).starts_with(sym)) {
        Atom a;
        a.element = sym;
        add_atom(std::move(a));
        pos_ += 2;
        return;
      }
    }
    if (std::find(one.begin(), one.end(), text_[pos_]) != one.end()) {
      Atom a;
      a.element = std::string(1, text_[pos_]);
      add_atom(std::move(a));
      ++pos_;
      return;
    }
    fail(SmilesErrorKind::UnknownSymbol, pos_,
         std::string("element '") + text_[pos_] + "' needs bracket notation");
  }

  void parse_bracket() {
    const size_t start = pos_;
    ++pos_;  // '['
    Atom a;
    // isotope digits are ignored
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size())
      fail(SmilesErrorKind::UnknownSymbol, start, "unterminated bracket atom");

    char c = text_[pos_];
    if (std::isupper(static_cast<unsigned char>(c))) {
      a.element = std::string(1, c);
      ++pos_;
      if (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_]))) {
        a.element += text_[pos_];
        ++pos_;
      }
    } else if (std::islower(static_cast<unsigned char>(c))) {
      // aromatic element inside brackets: b c n o p s, plus se/as
      std::string sym(1, c);
      if ((c == 's' || c == 'a') && pos_ + 1 < text_.size() &&
          ((c == 's' && text_[pos_ + 1] == 'e') || (c == 'a' && text_[pos_ + 1] == 's'))) {
        sym += text_[pos_ + 1];
        pos_ += 2;
      } else if (is_organic_aromatic(c)) {
        ++pos_;
      } else {
        fail(SmilesErrorKind::UnknownSymbol, pos_, std::string("unknown aromatic symbol '") + c + "'");
      }
      a.aromatic = true;
      sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
      a.element = sym;
    } else {
      fail(SmilesErrorKind::UnknownSymbol, pos_, "expected element symbol in bracket");
    }

    // chirality markers are ignored
    while (pos_ < text_.size() && text_[pos_] == '@') ++pos_;

    int hcount = 0;
    if (pos_ < text_.size() && text_[pos_] == 'H') {
      ++pos_;
      hcount = 1;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        hcount = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          hcount = hcount * 10 + (text_[pos_++] - '0');
      }
    }
    a.explicit_h = hcount;

    if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char sign_char = text_[pos_];
      const int sign = sign_char == '+' ? 1 : -1;
      int magnitude = 0;
      while (pos_ < text_.size() && text_[pos_] == sign_char) {
        ++magnitude;
        ++pos_;
      }
      if (magnitude == 1 && pos_ < text_.size() &&
          std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        magnitude = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          magnitude = magnitude * 10 + (text_[pos_++] - '0');
      }
      a.formal_charge = sign * magnitude;
    }

    // atom class is ignored
    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
        fail(SmilesErrorKind::UnknownSymbol, pos_ - 1, "atom class ':' needs digits");
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    if (pos_ >= text_.size() || text_[pos_] != ']')
      fail(SmilesErrorKind::UnknownSymbol, start, "unterminated bracket atom");
    ++pos_;
    add_atom(std::move(a));
  }

  void add_atom(Atom a) {
    mol_.atoms.push_back(std::move(a));
    const int idx = mol_.atom_count() - 1;
    if (prev_ >= 0) add_bond(prev_, idx, take_pending(prev_, idx));
    prev_ = idx;
  }

  BondOrder take_pending(int a, int b) {
    if (pending_) {
      BondOrder o = *pending_;
      pending_.reset();
      return o;
    }
    return (mol_.atoms[a].aromatic && mol_.atoms[b].aromatic) ? BondOrder::Aromatic
                                                              : BondOrder::Single;
  }

  void add_bond(int a, int b, BondOrder order) {
    for (const Bond& bond : mol_.bonds)
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        fail(SmilesErrorKind::UnmatchedRingBond, pos_,
             "duplicate bond between atoms " + std::to_string(a) + " and " + std::to_string(b));
    mol_.bonds.push_back(Bond{a, b, order});
  }

  void ring_bond(int rnum, size_t offset) {
    if (prev_ < 0)
      fail(SmilesErrorKind::UnmatchedRingBond, offset, "ring closure before any atom");
    auto it = open_rings_.find(rnum);
    if (it == open_rings_.end()) {
      open_rings_[rnum] = RingOpen{prev_, pending_, offset};
      pending_.reset();
      return;
    }
    const RingOpen open = it->second;
    open_rings_.erase(it);
    if (open.atom == prev_)
      fail(SmilesErrorKind::UnmatchedRingBond, offset, "ring closure bonds an atom to itself");
    std::optional<BondOrder> order;
    if (open.order && pending_ && *open.order != *pending_)
      fail(SmilesErrorKind::UnmatchedRingBond, offset, "conflicting bond orders on ring closure");
    order = open.order ? open.order : pending_;
    pending_.reset();
    BondOrder resolved =
        order ? *order
              : ((mol_.atoms[open.atom].aromatic && mol_.atoms[prev_].aromatic)
                     ? BondOrder::Aromatic
                     : BondOrder::Single);
    add_bond(open.atom, prev_, resolved);
  }

  void finish() {
    if (!branch_stack_.empty())
      fail(SmilesErrorKind::UnclosedBranch, text_.size(), "unclosed '('");
    if (!open_rings_.empty())
      fail(SmilesErrorKind::UnmatchedRingBond, open_rings_.begin()->second.offset,
           "ring bond " + std::to_string(open_rings_.begin()->first) + " never closed");
    if (pending_)
      fail(SmilesErrorKind::UnknownSymbol, pending_offset_, "bond symbol with nothing to bond");
    if (mol_.atoms.empty())
      fail(SmilesErrorKind::UnknownSymbol, 0, "input contains no atoms");
  }

  void finalize_hydrogens() {
    std::vector<std::vector<BondOrder>> incident(mol_.atoms.size());
    for (const Bond& b : mol_.bonds) {
      incident[b.a].push_back(b.order);
      incident[b.b].push_back(b.order);
    }
    for (size_t i = 0; i < mol_.atoms.size(); ++i) {
      Atom& a = mol_.atoms[i];
      a.degree = static_cast<int>(incident[i].size());
      a.implicit_h = a.explicit_h ? *a.explicit_h : implicit_hydrogens(a, incident[i]);
    }
  }
};

}  // namespace

SmilesError::SmilesError(SmilesErrorKind kind, size_t offset, const std::string& what)
    : std::runtime_error(std::string(kind_name(kind)) + " at byte " + std::to_string(offset) +
                         ": " + what),
      kind_(kind),
      offset_(offset) {}

Molecule parse_smiles(std::string_view text) { return Parser(text).run(); }

int implicit_hydrogens(const Atom& atom, const std::vector<BondOrder>& incident_orders) {
  if (atom.explicit_h) return *atom.explicit_h;
  double used = 0.0;
  for (BondOrder o : incident_orders) used += bond_order_value(o);
  const double free_valence = default_valence(atom.element) - used;
  return free_valence <= 0.0 ? 0 : static_cast<int>(std::floor(free_valence));
}

const std::vector<std::string>& featurizer_symbols() {
  static const std::vector<std::string> symbols = {
      "C",  "N",  "O",  "S",  "F",  "Si", "P",  "Cl", "Br", "Mg", "Na",
      "Ca", "Fe", "As", "Al", "I",  "B",  "V",  "K",  "Tl", "Yb", "Sb",
      "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H",  "Li", "Ge", "Cu",
      "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb", "Unknown"};
  return symbols;
}

namespace {

void one_hot_count(std::vector<double>& out, size_t base, int value, int slots) {
  const int clamped = std::clamp(value, 0, slots - 1);
  out[base + static_cast<size_t>(clamped)] = 1.0;
}

}  // namespace

std::vector<double> featurize_atom(const Atom& atom, const Molecule& mol) {
  (void)mol;
  const auto& symbols = featurizer_symbols();
  std::vector<double> f(kAtomFeatureDim, 0.0);
  size_t slot = symbols.size() - 1;  // "Unknown"
  for (size_t i = 0; i + 1 < symbols.size(); ++i) {
    if (symbols[i] == atom.element) {
      slot = i;
      break;
    }
  }
  f[slot] = 1.0;
  size_t base = symbols.size();
  one_hot_count(f, base, atom.degree, 11);
  base += 11;
  one_hot_count(f, base, atom.implicit_h, 11);
  base += 11;
  // declared hydrogens on bracket atoms are explicit, not implicit valence
  one_hot_count(f, base, atom.explicit_h ? 0 : atom.implicit_h, 11);
  base += 11;
  f[base] = atom.aromatic ? 1.0 : 0.0;
  return f;
}

MolecularGraph build_graph(const Molecule& mol) {
  MolecularGraph g;
  g.node_features = diff::Tensor(mol.atom_count(), kAtomFeatureDim);
  for (int i = 0; i < mol.atom_count(); ++i) {
    const std::vector<double> f = featurize_atom(mol.atoms[i], mol);
    std::copy(f.begin(), f.end(), g.node_features.row_ptr(i));
  }
  g.neighbors.resize(mol.atoms.size());
  for (const Bond& b : mol.bonds) {
    g.neighbors[b.a].push_back(b.b);
    g.neighbors[b.b].push_back(b.a);
  }
  return g;
}

}  // namespace resgin::chem
