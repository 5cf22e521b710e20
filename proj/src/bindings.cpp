#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pmx/inference.hpp"
#include "pmx/io.hpp"
#include "pmx/simulate.hpp"

namespace py = pybind11;
using namespace pmx;

namespace {

PairRecord make_record(const std::string& id, int sequence,
                       const std::array<std::optional<double>, 4>& y) {
  if (sequence != 1 && sequence != 2) throw std::invalid_argument("sequence must be 1 or 2");
  PairRecord rec;
  rec.pair_id = id;
  rec.sequence = sequence == 1 ? SequenceId::Seq1 : SequenceId::Seq2;
  rec.y = y;
  return rec;
}

GroupingScheme scheme_by_name(const std::string& name) { return load_grouping(name); }

}  // namespace

PYBIND11_MODULE(_pmxover, m) {
  m.doc() = "Pattern-mixture model for paired 2x2 crossover data";

  py::register_exception<PmxError>(m, "PmxError");

  py::class_<PairRecord>(m, "PairRecord")
      .def(py::init(&make_record), py::arg("pair_id"), py::arg("sequence"), py::arg("y"))
      .def_readonly("pair_id", &PairRecord::pair_id)
      .def_property_readonly("sequence",
                             [](const PairRecord& r) { return seq_index(r.sequence) + 1; })
      .def_property_readonly("y", [](const PairRecord& r) { return r.y; });

  py::class_<GroupingScheme>(m, "GroupingScheme")
      .def_static("default_scheme", &GroupingScheme::default_scheme)
      .def_static("merged_dp", &GroupingScheme::merged_dp)
      .def_static("naive", &GroupingScheme::naive)
      .def_readonly("groups", &GroupingScheme::groups);

  m.def("classify", [](const std::array<bool, 4>& observed) {
    return classify(ObservationMask{observed}).p;
  });
  m.def("mask_of", [](int p) { return mask_of(PatternId{p}).observed; });
  m.def("selection_matrix", [](int p) { return selection_matrix(PatternId{p}); });
  m.def("assign_group",
        [](int p, const GroupingScheme& s) { return assign_group(PatternId{p}, s); });
  m.def("monotone_within_subject", [](int p) { return monotone_within_subject(PatternId{p}); });

  py::class_<GroupEffects>(m, "GroupEffects")
      .def(py::init<>())
      .def_readwrite("mu_1A", &GroupEffects::mu_1A)
      .def_readwrite("mu_1B", &GroupEffects::mu_1B)
      .def_readwrite("mu_2A", &GroupEffects::mu_2A)
      .def_readwrite("mu_2B", &GroupEffects::mu_2B)
      .def_readwrite("rho_1", &GroupEffects::rho_1)
      .def_readwrite("rho_2", &GroupEffects::rho_2)
      .def_readwrite("nu_1", &GroupEffects::nu_1)
      .def_readwrite("nu_2", &GroupEffects::nu_2)
      .def("as_vector", &GroupEffects::as_vector);

  m.def("design_matrix", [](int s) {
    if (s != 1 && s != 2) throw std::invalid_argument("sequence must be 1 or 2");
    return Eigen::MatrixXd(design_matrix(s == 1 ? SequenceId::Seq1 : SequenceId::Seq2));
  });

  py::class_<Proportions>(m, "Proportions")
      .def_readonly("pi_g", &Proportions::pi_g)
      .def_readonly("total", &Proportions::total);

  py::class_<ModelFit>(m, "ModelFit")
      .def_readonly("groups", &ModelFit::groups)
      .def_readonly("converged", &ModelFit::converged)
      .def_readonly("iterations", &ModelFit::iterations)
      .def_readonly("loglik", &ModelFit::loglik)
      .def_readonly("warnings", &ModelFit::warnings)
      .def_readonly("proportions", &ModelFit::proportions)
      .def_property_readonly("sigma", [](const ModelFit& f) { return f.cov.sigma; })
      .def("effects", &ModelFit::effects, py::return_value_policy::copy);

  py::class_<InferenceResult>(m, "InferenceResult")
      .def_readonly("gamma_hat", &InferenceResult::gamma_hat)
      .def_readonly("se", &InferenceResult::se)
      .def_readonly("z", &InferenceResult::z)
      .def_readonly("p_two_sided", &InferenceResult::p_two_sided)
      .def_readonly("ci_95", &InferenceResult::ci_95);

  m.def(
      "fit",
      [](const std::vector<PairRecord>& records, const std::string& grouping,
         const std::string& method) {
        FitOptions opts;
        opts.method = method == "ml" ? FitOptions::Method::ML : FitOptions::Method::REML;
        return fit(records, scheme_by_name(grouping), opts);
      },
      py::arg("records"), py::arg("grouping") = "default", py::arg("method") = "reml");

  m.def("delta_variance", [](const ModelFit& f) {
    return delta_variance(f, interaction_contrast());
  });
  m.def("pooled_means", [](const ModelFit& f) {
    const PooledMeans pm = pooled_means(f);
    return std::make_pair(Eigen::Vector4d(pm.means), Eigen::Matrix4d(pm.covariance));
  });
  m.def("wald_p", [](double gamma_hat, double se) { return wald_p(gamma_hat, se); });
  m.def("interaction_contrast", []() { return Eigen::Vector4d(interaction_contrast()); });

  m.def(
      "simulate_dataset",
      [](int n_pairs, uint64_t seed, uint64_t replicate) {
        SimScenario scn = default_scenario(n_pairs, seed);
        return simulate_dataset(scn, GroupingScheme::default_scheme(), replicate);
      },
      py::arg("n_pairs") = 200, py::arg("seed") = 1, py::arg("replicate") = 0);

  m.def("parse_csv", [](const std::string& path) {
    const Dataset ds = parse_csv(path);
    return ds.records;
  });
}
