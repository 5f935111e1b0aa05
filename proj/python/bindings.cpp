#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hsforest/errors.hpp"
#include "hsforest/estimands.hpp"
#include "hsforest/sampler.hpp"
#include "hsforest/simgen.hpp"

namespace py = pybind11;
using namespace hsforest;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& time,
                     const std::optional<Eigen::VectorXi>& status,
                     const std::optional<Eigen::VectorXi>& treatment, const std::string& outcome) {
  Dataset d;
  d.X = X;
  d.time = time;
  d.outcome = parse_outcome(outcome);
  d.status = status ? *status : Eigen::VectorXi::Ones(X.rows());
  if (treatment) d.treatment = *treatment;
  return d;
}

py::dict draws_dict(const PosteriorDraws& d) {
  py::dict out;
  out["cate"] = d.cate;
  out["ate"] = d.ate;
  out["sigma2"] = d.sigma2;
  out["fit_mean"] = d.fit_mean;
  out["fit_sd"] = d.fit_sd;
  out["test_fit_mean"] = d.test_fit_mean;
  out["test_cate_mean"] = d.test_cate_mean;
  out["propensity"] = d.propensity;
  out["center"] = d.standardizer.center;
  out["scale"] = d.standardizer.scale;
  return out;
}

std::optional<PredictionSet> prediction_set(const std::optional<Eigen::MatrixXd>& X_test,
                                            const std::optional<Eigen::VectorXi>& A_test) {
  if (!X_test) return std::nullopt;
  PredictionSet p;
  p.X = *X_test;
  p.treatment = A_test ? *A_test : Eigen::VectorXi::Zero(X_test->rows());
  return p;
}

}  // namespace

PYBIND11_MODULE(_hsforest, m) {
  m.doc() = "Horseshoe forests for causal survival analysis";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);
  py::register_exception<TailOverflowError>(m, "TailOverflowError", PyExc_ArithmeticError);

  py::class_<ChainConfig>(m, "ChainConfig")
      .def(py::init<>())
      .def_readwrite("m_f", &ChainConfig::m_f)
      .def_readwrite("m_tau", &ChainConfig::m_tau)
      .def_readwrite("k", &ChainConfig::k)
      .def_readwrite("a", &ChainConfig::a)
      .def_readwrite("b", &ChainConfig::b)
      .def_readwrite("max_depth", &ChainConfig::max_depth)
      .def_readwrite("omega_f", &ChainConfig::omega_f)
      .def_readwrite("omega_tau", &ChainConfig::omega_tau)
      .def_readwrite("omega_single", &ChainConfig::omega_single)
      .def_readwrite("iterations", &ChainConfig::iterations)
      .def_readwrite("burnin", &ChainConfig::burnin)
      .def_readwrite("thin", &ChainConfig::thin)
      .def_readwrite("nu_prior", &ChainConfig::nu_prior)
      .def_readwrite("psi_prior", &ChainConfig::psi_prior)
      .def_readwrite("seed", &ChainConfig::seed)
      .def_readwrite("invariant_codes", &ChainConfig::invariant_codes)
      .def_readwrite("propensity", &ChainConfig::propensity)
      .def_readwrite("propensity_trees", &ChainConfig::propensity_trees)
      .def_readwrite("propensity_iterations", &ChainConfig::propensity_iterations)
      .def_readwrite("propensity_burnin", &ChainConfig::propensity_burnin)
      .def("validate", &ChainConfig::validate);

  m.def(
      "simulate",
      [](const std::string& family, int n, int p, std::uint64_t seed, double censoring, double noise_var,
         const std::string& error, std::optional<double> copula_rho) {
        ScenarioSpec s;
        s.family = parse_family(family);
        s.n = n;
        s.p = p;
        s.seed = seed;
        s.censor_target = censoring;
        s.noise_var = noise_var;
        s.error = parse_error(error);
        s.copula_rho = copula_rho;
        const GeneratedData g = generate(s);
        py::dict out;
        out["X"] = g.data.X;
        out["time"] = g.data.time;
        out["status"] = g.data.status;
        out["treatment"] = g.data.treatment;
        out["truth_cate"] = g.truth_cate;
        out["truth_ate"] = g.truth_ate;
        out["propensity"] = g.propensity;
        out["censoring_rate"] = g.censoring_rate;
        out["eta"] = g.eta;
        return out;
      },
      py::arg("family") = "linear", py::arg("n") = 200, py::arg("p") = 100, py::arg("seed") = 0,
      py::arg("censoring") = 0.35, py::arg("noise_var") = 3.0, py::arg("error") = "normal",
      py::arg("copula_rho") = py::none(), "Simulated dataset with its true treatment effects.");

  m.def(
      "fit_causal",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& time, const Eigen::VectorXi& treatment,
         std::optional<Eigen::VectorXi> status, const ChainConfig& cfg, const std::string& outcome,
         std::optional<Eigen::MatrixXd> X_test, std::optional<Eigen::VectorXi> A_test) {
        const Dataset d = make_dataset(X, time, status, treatment, outcome);
        const auto test = prediction_set(X_test, A_test);
        PosteriorDraws draws;
        {
          py::gil_scoped_release release;
          draws = run_causal_chain(d, cfg, test ? &*test : nullptr);
        }
        return draws_dict(draws);
      },
      py::arg("X"), py::arg("time"), py::arg("treatment"), py::arg("status") = py::none(),
      py::arg("config") = ChainConfig{}, py::arg("outcome") = "survival", py::arg("X_test") = py::none(),
      py::arg("A_test") = py::none(), "Causal horseshoe forest; CATE draws are rows x draws.");

  m.def(
      "fit_forest",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& time, std::optional<Eigen::VectorXi> status,
         const ChainConfig& cfg, const std::string& outcome, std::optional<Eigen::MatrixXd> X_test) {
        const Dataset d = make_dataset(X, time, status, std::nullopt, outcome);
        const auto test = prediction_set(X_test, std::nullopt);
        PosteriorDraws draws;
        {
          py::gil_scoped_release release;
          draws = run_horseshoe_forest(d, cfg, test ? &*test : nullptr);
        }
        return draws_dict(draws);
      },
      py::arg("X"), py::arg("y"), py::arg("status") = py::none(), py::arg("config") = ChainConfig{},
      py::arg("outcome") = "survival", py::arg("X_test") = py::none(),
      "Single horseshoe forest on a survival, continuous or binary outcome.");

  m.def(
      "c_index",
      [](const std::vector<double>& scores, const std::vector<double>& y, const std::vector<int>& delta) {
        return c_index(scores, y, delta);
      },
      py::arg("scores"), py::arg("y"), py::arg("delta"));

  m.def(
      "interval",
      [](const std::vector<double>& draws, double level) {
        const IntervalSummary s = summarize_draws(draws, level);
        return py::make_tuple(s.mean, s.lower, s.upper);
      },
      py::arg("draws"), py::arg("level") = 0.95, "(mean, lower, upper) of an equal-tailed interval.");
}
