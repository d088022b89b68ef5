#include <doctest.h>

#include <cctype>
#include <string>
#include <vector>

#include "resgin/chem.hpp"

using namespace resgin;
using chem::BondOrder;
using chem::Molecule;
using chem::parse_smiles;
using chem::SmilesError;
using chem::SmilesErrorKind;

#include "golden_corpus.hpp"

using resgin::testing::GoldenRow;

namespace {

const std::vector<GoldenRow>& golden() { return resgin::testing::golden_corpus(); }

// independent token counter: one count per atom token, nothing else
int count_atom_tokens(const std::string& s) {
  int count = 0;
  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '[') {
      while (i < s.size() && s[i] != ']') ++i;
      ++i;
      ++count;
    } else if (s.compare(i, 2, "Cl") == 0 || s.compare(i, 2, "Br") == 0) {
      i += 2;
      ++count;
    } else if (std::isupper(static_cast<unsigned char>(c)) ||
               std::string("bcnops").find(c) != std::string::npos) {
      ++i;
      ++count;
    } else {
      ++i;
    }
  }
  return count;
}

}  // namespace

TEST_SUITE("chem") {

TEST_CASE("golden corpus atom and bond counts") {
  for (const GoldenRow& row : golden()) {
    CAPTURE(row.smiles);
    const Molecule m = parse_smiles(row.smiles);
    CHECK(m.atom_count() == row.atoms);
    CHECK(m.bond_count() == row.bonds);
    int aromatic = 0;
    for (const chem::Atom& a : m.atoms) aromatic += a.aromatic ? 1 : 0;
    CHECK(aromatic == row.aromatic_atoms);
  }
}

TEST_CASE("atom count equals atom token count") {
  for (const GoldenRow& row : golden()) {
    CAPTURE(row.smiles);
    CHECK(parse_smiles(row.smiles).atom_count() == count_atom_tokens(row.smiles));
  }
}

TEST_CASE("parse_smiles basics") {
  const Molecule methane = parse_smiles("C");
  CHECK(methane.atom_count() == 1);
  CHECK(methane.bond_count() == 0);
  CHECK(methane.atoms[0].element == "C");
  CHECK(methane.atoms[0].implicit_h == 4);

  const Molecule benzene = parse_smiles("c1ccccc1");
  CHECK(benzene.atom_count() == 6);
  for (const chem::Atom& a : benzene.atoms) {
    CHECK(a.aromatic);
    CHECK(a.element == "C");
    CHECK(a.implicit_h == 1);
  }
  for (const chem::Bond& b : benzene.bonds) CHECK(b.order == BondOrder::Aromatic);

  const Molecule acetic = parse_smiles("CC(=O)O");
  CHECK(acetic.atom_count() == 4);
  CHECK(acetic.bond_count() == 3);
  int doubles = 0;
  for (const chem::Bond& b : acetic.bonds) doubles += b.order == BondOrder::Double ? 1 : 0;
  CHECK(doubles == 1);
}

TEST_CASE("parse_smiles determinism") {
  for (const GoldenRow& row : golden()) {
    const Molecule a = parse_smiles(row.smiles);
    const Molecule b = parse_smiles(row.smiles);
    REQUIRE(a.atom_count() == b.atom_count());
    REQUIRE(a.bond_count() == b.bond_count());
    for (int i = 0; i < a.atom_count(); ++i) {
      CHECK(a.atoms[i].element == b.atoms[i].element);
      CHECK(a.atoms[i].aromatic == b.atoms[i].aromatic);
      CHECK(a.atoms[i].implicit_h == b.atoms[i].implicit_h);
      CHECK(a.atoms[i].formal_charge == b.atoms[i].formal_charge);
    }
    for (int i = 0; i < a.bond_count(); ++i) {
      CHECK(a.bonds[i].a == b.bonds[i].a);
      CHECK(a.bonds[i].b == b.bonds[i].b);
      CHECK(a.bonds[i].order == b.bonds[i].order);
    }
  }
}

TEST_CASE("parse errors") {
  auto expect_error = [](const char* text, SmilesErrorKind kind) {
    CAPTURE(text);
    try {
      (void)parse_smiles(text);
      FAIL_CHECK("expected SmilesError");
    } catch (const SmilesError& e) {
      CHECK(e.kind() == kind);
    }
  };
  expect_error("", SmilesErrorKind::EmptyInput);
  expect_error("C(", SmilesErrorKind::UnclosedBranch);
  expect_error("C(C", SmilesErrorKind::UnclosedBranch);
  expect_error("CC)", SmilesErrorKind::UnclosedBranch);
  expect_error("(CC)", SmilesErrorKind::UnclosedBranch);
  expect_error("C1CC", SmilesErrorKind::UnmatchedRingBond);
  expect_error("1CC", SmilesErrorKind::UnmatchedRingBond);
  expect_error("C11", SmilesErrorKind::UnmatchedRingBond);
  expect_error("C1C1", SmilesErrorKind::UnmatchedRingBond);
  expect_error("C-1CC=1", SmilesErrorKind::UnmatchedRingBond);
  expect_error("CC.CC", SmilesErrorKind::UnsupportedFeature);
  expect_error("CQ", SmilesErrorKind::UnknownSymbol);
  expect_error("C=", SmilesErrorKind::UnknownSymbol);
  expect_error("C=-C", SmilesErrorKind::UnknownSymbol);
  expect_error("[NH4+", SmilesErrorKind::UnknownSymbol);
  expect_error("C%1C", SmilesErrorKind::UnknownSymbol);

  try {
    (void)parse_smiles("CQ");
    FAIL_CHECK("expected SmilesError");
  } catch (const SmilesError& e) {
    CHECK(e.offset() == 1);  // byte offset of the offending symbol
  }
}

TEST_CASE("bracket atoms") {
  const Molecule ammonium = parse_smiles("[NH4+]");
  REQUIRE(ammonium.atom_count() == 1);
  CHECK(ammonium.atoms[0].element == "N");
  CHECK(ammonium.atoms[0].formal_charge == 1);
  REQUIRE(ammonium.atoms[0].explicit_h.has_value());
  CHECK(*ammonium.atoms[0].explicit_h == 4);
  CHECK(ammonium.atoms[0].implicit_h == 4);  // bracket H count is authoritative

  const Molecule oxide = parse_smiles("[O-]");
  CHECK(oxide.atoms[0].formal_charge == -1);
  CHECK(*oxide.atoms[0].explicit_h == 0);

  const Molecule isotope = parse_smiles("[13CH4]");
  CHECK(isotope.atoms[0].element == "C");
  CHECK(*isotope.atoms[0].explicit_h == 4);

  const Molecule doubly = parse_smiles("[Fe+2]");
  CHECK(doubly.atoms[0].element == "Fe");
  CHECK(doubly.atoms[0].formal_charge == 2);

  const Molecule minus2 = parse_smiles("[O--]");
  CHECK(minus2.atoms[0].formal_charge == -2);

  const Molecule chiral = parse_smiles("[C@@H](N)(O)C");
  CHECK(chiral.atom_count() == 4);
  CHECK(*chiral.atoms[0].explicit_h == 1);

  const Molecule klass = parse_smiles("[CH3:1]C");
  CHECK(klass.atom_count() == 2);

  const Molecule exotic = parse_smiles("[Pt]");
  CHECK(exotic.atoms[0].element == "Pt");
}

TEST_CASE("implicit_hydrogens valence arithmetic") {
  auto atom = [](const char* element, bool aromatic = false) {
    chem::Atom a;
    a.element = element;
    a.aromatic = aromatic;
    return a;
  };
  CHECK(chem::implicit_hydrogens(atom("C"), {}) == 4);
  CHECK(chem::implicit_hydrogens(atom("O"), {BondOrder::Single}) == 1);
  CHECK(chem::implicit_hydrogens(atom("N"), {BondOrder::Triple}) == 0);
  // aromatic ring member: 4 - (1.5 + 1.5) = 1
  CHECK(chem::implicit_hydrogens(atom("C", true), {BondOrder::Aromatic, BondOrder::Aromatic}) == 1);
  // pyridine nitrogen: 3 - 3 = 0
  CHECK(chem::implicit_hydrogens(atom("N", true), {BondOrder::Aromatic, BondOrder::Aromatic}) == 0);
  // hypervalent sulfur clamps at zero
  CHECK(chem::implicit_hydrogens(atom("S"),
                                 {BondOrder::Double, BondOrder::Double, BondOrder::Single,
                                  BondOrder::Single}) == 0);

  // bracket atoms bypass the valence table
  chem::Atom bracket = atom("N");
  bracket.explicit_h = 4;
  CHECK(chem::implicit_hydrogens(bracket, {}) == 4);
}

TEST_CASE("featurize_atom layout") {
  const auto& symbols = chem::featurizer_symbols();
  REQUIRE(symbols.size() == 44);
  constexpr size_t kDegreeBase = 44;
  constexpr size_t kHydrogenBase = 55;
  constexpr size_t kValenceBase = 66;
  constexpr size_t kAromatic = 77;

  const Molecule methane = parse_smiles("C");
  const std::vector<double> f = chem::featurize_atom(methane.atoms[0], methane);
  REQUIRE(f.size() == 78);
  CHECK(f[0] == 1.0);  // "C" is the first symbol slot
  CHECK(f[kDegreeBase + 0] == 1.0);
  CHECK(f[kHydrogenBase + 4] == 1.0);
  CHECK(f[kValenceBase + 4] == 1.0);
  CHECK(f[kAromatic] == 0.0);

  const Molecule benzene = parse_smiles("c1ccccc1");
  const std::vector<double> fb = chem::featurize_atom(benzene.atoms[0], benzene);
  CHECK(fb[kAromatic] == 1.0);
  CHECK(fb[kDegreeBase + 2] == 1.0);

  // unknown element lands in the final symbol slot
  const Molecule exotic = parse_smiles("[Zz]");
  const std::vector<double> fz = chem::featurize_atom(exotic.atoms[0], exotic);
  CHECK(fz[43] == 1.0);

  // bracket hydrogens are explicit: hydrogen block sees them, valence block does not
  const Molecule ammonium = parse_smiles("[NH4+]");
  const std::vector<double> fn = chem::featurize_atom(ammonium.atoms[0], ammonium);
  CHECK(fn[kHydrogenBase + 4] == 1.0);
  CHECK(fn[kValenceBase + 0] == 1.0);
}

TEST_CASE("every one-hot block sums to exactly one across the corpus") {
  for (const GoldenRow& row : golden()) {
    const Molecule m = parse_smiles(row.smiles);
    for (const chem::Atom& a : m.atoms) {
      const std::vector<double> f = chem::featurize_atom(a, m);
      REQUIRE(f.size() == 78);
      auto block_sum = [&f](size_t base, size_t len) {
        double s = 0.0;
        for (size_t i = base; i < base + len; ++i) s += f[i];
        return s;
      };
      CHECK(block_sum(0, 44) == 1.0);
      CHECK(block_sum(44, 11) == 1.0);
      CHECK(block_sum(55, 11) == 1.0);
      CHECK(block_sum(66, 11) == 1.0);
      CHECK((f[77] == 0.0 || f[77] == 1.0));
    }
  }
}

TEST_CASE("out-of-range counts clamp into the final slot") {
  chem::Atom crowded;
  crowded.element = "C";
  crowded.degree = 14;
  crowded.implicit_h = 12;
  const std::vector<double> f = chem::featurize_atom(crowded, Molecule{});
  CHECK(f[44 + 10] == 1.0);
  CHECK(f[55 + 10] == 1.0);
}

TEST_CASE("build_graph") {
  const chem::MolecularGraph methane = chem::build_graph(parse_smiles("C"));
  CHECK(methane.node_count() == 1);
  CHECK(methane.neighbors[0].empty());
  CHECK(methane.node_features.cols == 78);

  const chem::MolecularGraph ethane = chem::build_graph(parse_smiles("CC"));
  CHECK(ethane.neighbors[0] == std::vector<int>{1});
  CHECK(ethane.neighbors[1] == std::vector<int>{0});

  const chem::MolecularGraph benzene = chem::build_graph(parse_smiles("c1ccccc1"));
  for (const std::vector<int>& nb : benzene.neighbors) CHECK(nb.size() == 2);
}

TEST_CASE("neighbor lists are symmetric for the whole corpus") {
  for (const GoldenRow& row : golden()) {
    const chem::MolecularGraph g = chem::build_graph(parse_smiles(row.smiles));
    for (size_t v = 0; v < g.neighbors.size(); ++v) {
      for (int u : g.neighbors[v]) {
        const auto& back = g.neighbors[u];
        CHECK(std::find(back.begin(), back.end(), static_cast<int>(v)) != back.end());
      }
    }
  }
}

}  // TEST_SUITE
