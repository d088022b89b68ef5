#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "resgin/data.hpp"
#include "resgin/eval.hpp"
#include "resgin/model.hpp"
#include "resgin/train.hpp"

namespace py = pybind11;
using namespace resgin;

namespace {

py::array_t<double> atom_features(const std::string& smiles) {
  const chem::MolecularGraph g = chem::build_graph(chem::parse_smiles(smiles));
  py::array_t<double> out({g.node_features.rows, g.node_features.cols});
  std::copy(g.node_features.data.begin(), g.node_features.data.end(), out.mutable_data());
  return out;
}

std::vector<std::vector<int>> neighbor_lists(const std::string& smiles) {
  return chem::build_graph(chem::parse_smiles(smiles)).neighbors;
}

py::object opt_metric(const std::optional<double>& v) {
  return v ? py::cast(*v) : py::none();
}

py::dict metrics_dict(const eval::MetricsReport& m) {
  py::dict d;
  d["acc"] = opt_metric(m.acc);
  d["prec"] = opt_metric(m.prec);
  d["recall"] = opt_metric(m.recall);
  d["tpr"] = opt_metric(m.tpr);
  d["tnr"] = opt_metric(m.tnr);
  d["bacc"] = opt_metric(m.bacc);
  d["f1"] = opt_metric(m.f1);
  d["auc"] = opt_metric(m.auc);
  return d;
}

py::dict classification_metrics_py(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
  return metrics_dict(eval::full_report(scores, labels, threshold));
}

struct PyModel {
  model::ModelParams params;

  explicit PyModel(model::ModelParams p) : params(std::move(p)) {}

  static PyModel load(const std::string& path) { return PyModel(model::load_checkpoint(path)); }

  void save(const std::string& path) { model::save_checkpoint(path, params); }

  py::dict predict(const std::string& smiles_a, const std::string& smiles_b,
                   const std::vector<double>& profile) {
    const chem::MolecularGraph ga = chem::build_graph(chem::parse_smiles(smiles_a));
    const chem::MolecularGraph gb = chem::build_graph(chem::parse_smiles(smiles_b));
    model::ForwardOutput out = model::forward(params, ga, gb, profile);
    py::dict d;
    d["p"] = out.p;
    d["attn_a"] = out.attn_gin_a;
    d["attn_b"] = out.attn_gin_b;
    d["attn_lstm_a"] = out.attn_lstm_a;
    d["attn_lstm_b"] = out.attn_lstm_b;
    return d;
  }

  py::dict config() const {
    py::dict d;
    d["molecule_channels"] = params.config.d_atom;
    d["hidden_channels"] = params.config.d_hidden;
    d["middle_channels"] = params.config.d_middle;
    d["layer_count"] = params.config.gin_layers;
    d["gene_channels"] = params.config.d_gene;
    d["dropout"] = params.config.dropout;
    d["variant"] = model::to_string(params.config.variant);
    return d;
  }
};

py::dict train_cv_py(const std::string& data, const std::string& cells, py::object out, int epochs,
                     int folds, uint64_t seed, double lr, int batch, int hidden, int middle,
                     int layers, double dropout, const std::string& variant, int parallel_folds) {
  model::ModelConfig mc;
  mc.d_hidden = hidden;
  mc.d_lstm = hidden;
  mc.d_middle = middle;
  mc.d_attn = middle;
  mc.gin_layers = layers;
  mc.dropout = dropout;
  mc.variant = model::variant_from_string(variant);

  train::TrainConfig tc;
  tc.epochs = epochs;
  tc.folds = folds;
  tc.seed = seed;
  tc.lr = lr;
  tc.batch = batch;
  tc.parallel_folds = parallel_folds;

  data::Dataset dataset = data::load_dataset(data, cells);
  train::CvResult cv;
  {
    py::gil_scoped_release release;
    cv = train::run_cv(dataset, mc, tc);
  }

  if (!out.is_none()) {
    const std::string dir = py::cast<std::string>(out);
    std::filesystem::create_directories(dir);
    for (train::FoldResult& f : cv.folds)
      model::save_checkpoint(dir + "/fold" + std::to_string(f.fold + 1) + ".ckpt", f.params);
  }

  py::dict d = metrics_dict(cv.mean);
  d["std"] = metrics_dict(cv.stdev);
  d["folds"] = cv.folds.size();
  py::list losses;
  for (const train::FoldResult& f : cv.folds) losses.append(f.epoch_losses);
  d["epoch_losses"] = losses;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "residual graph-isomorphism network for drug-pair synergy prediction";

  py::register_exception<chem::SmilesError>(m, "SmilesParseError", PyExc_ValueError);
  py::register_exception<data::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<model::ModelError>(m, "ModelError", PyExc_ValueError);

  py::class_<chem::Atom>(m, "Atom")
      .def_readonly("element", &chem::Atom::element)
      .def_readonly("aromatic", &chem::Atom::aromatic)
      .def_readonly("formal_charge", &chem::Atom::formal_charge)
      .def_readonly("explicit_h", &chem::Atom::explicit_h)
      .def_readonly("degree", &chem::Atom::degree)
      .def_readonly("implicit_h", &chem::Atom::implicit_h);

  py::class_<chem::Molecule>(m, "Molecule")
      .def_property_readonly("atom_count", &chem::Molecule::atom_count)
      .def_property_readonly("bond_count", &chem::Molecule::bond_count)
      .def_readonly("atoms", &chem::Molecule::atoms)
      .def_readonly("source", &chem::Molecule::source)
      .def("__repr__", [](const chem::Molecule& mol) {
        return "<Molecule '" + mol.source + "' atoms=" + std::to_string(mol.atom_count()) +
               " bonds=" + std::to_string(mol.bond_count()) + ">";
      });

  m.def("parse_smiles", &chem::parse_smiles, py::arg("smiles"),
        "Parse a SMILES string into a molecule.");
  m.def("atom_features", &atom_features, py::arg("smiles"),
        "78-wide atom feature matrix for a SMILES string.");
  m.def("neighbor_lists", &neighbor_lists, py::arg("smiles"),
        "Symmetric adjacency lists for a SMILES string.");
  m.def("featurizer_symbols", [] { return chem::featurizer_symbols(); },
        "Element symbols of the one-hot block, in slot order.");

  m.def("roc_auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          return eval::roc_auc(scores, labels);
        },
        py::arg("scores"), py::arg("labels"),
        "Tie-aware Mann-Whitney AUC.");
  m.def("classification_metrics", &classification_metrics_py, py::arg("scores"), py::arg("labels"),
        py::arg("threshold") = 0.5,
        "Confusion-matrix metrics plus AUC; undefined metrics come back as None.");

  m.def("kfold_split",
        [](int n, int k, uint64_t seed) { return data::kfold_split(n, k, seed).folds; },
        py::arg("n"), py::arg("k"), py::arg("seed") = 0,
        "Seeded disjoint fold index lists with sizes within one of each other.");

  m.def("write_toy_dataset", &data::write_toy_dataset, py::arg("dir"), py::arg("seed") = 0,
        "Write the synthetic separable dataset (toy.csv, toy_expr.tsv).");

  py::class_<PyModel>(m, "Model")
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("save", &PyModel::save, py::arg("path"))
      .def("predict", &PyModel::predict, py::arg("smiles_a"), py::arg("smiles_b"),
           py::arg("profile"),
           "Synergy probability and attention weights for one drug pair.")
      .def_property_readonly("config", &PyModel::config);

  m.def("train_cv", &train_cv_py, py::arg("data"), py::arg("cells"), py::kw_only(),
        py::arg("out") = py::none(), py::arg("epochs") = 200, py::arg("folds") = 5,
        py::arg("seed") = 0, py::arg("lr") = 0.0005, py::arg("batch") = 128,
        py::arg("hidden") = 128, py::arg("middle") = 64, py::arg("layers") = 2,
        py::arg("dropout") = 0.2, py::arg("variant") = "resgin", py::arg("parallel_folds") = 1,
        "k-fold cross-validated training; returns mean metrics (std under 'std').");
}
