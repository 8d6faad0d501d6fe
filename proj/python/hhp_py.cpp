#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hhp/cli.hpp"
#include "hhp/errors.hpp"
#include "hhp/hgroup.hpp"
#include "hhp/kernel.hpp"

namespace py = pybind11;

namespace {

hhp::RunConfig config_from(const py::dict& d) {
  hhp::RunConfig cfg;
  for (const auto& item : d) {
    const std::string key = py::str(item.first);
    py::handle v = item.second;
    std::string text;
    if (py::isinstance<py::bool_>(v)) {
      text = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& x : v) {
        if (!text.empty()) text += ',';
        text += py::str(py::float_(py::reinterpret_borrow<py::object>(x))).cast<std::string>();
      }
    } else {
      text = py::str(v);
    }
    cfg.set(key, text);
  }
  return cfg;
}

py::dict cell_dict(const hhp::RunConfig& cfg, const hhp::PhaseCell& c) {
  py::dict d;
  d["p"] = c.p;
  d["gamma"] = c.gamma;
  d["verdict"] = hhp::to_string(c.verdict);
  d["regime"] = hhp::to_string(c.regime);
  d["t_final"] = c.t_final;
  d["max_norm"] = c.max_norm;
  d["lambda_scale"] = c.lambda_used;
  d["leakage"] = c.leakage;
  py::list hist;
  for (const auto& s : c.history) hist.append(py::make_tuple(s.t, s.norm));
  d["history"] = hist;
  d["certified"] = c.certification ? py::cast(c.certification->certified) : py::none();
  d["note"] = c.note;
  hhp::RunConfig echo = cfg;
  echo.gamma = c.gamma;
  echo.p = c.p;
  d["manifest"] = hhp::manifest_json(echo, c);
  return d;
}

}  // namespace

PYBIND11_MODULE(hhp_py, m) {
  m.doc() = "Hardy-Henon parabolic equation on the first Heisenberg group";

  py::register_exception<hhp::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<hhp::NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("compose", [](py::tuple a, py::tuple b) {
    const auto r = hhp::compose(hhp::GPoint::h1(a[0].cast<double>(), a[1].cast<double>(), a[2].cast<double>()),
                                hhp::GPoint::h1(b[0].cast<double>(), b[1].cast<double>(), b[2].cast<double>()));
    return py::make_tuple(r.x[0], r.y[0], r.tau);
  }, "Group product of two points (x, y, tau)");
  m.def("koranyi_norm", [](double x, double y, double tau) { return hhp::koranyi_norm(hhp::GPoint::h1(x, y, tau)); },
        py::arg("x"), py::arg("y"), py::arg("tau"));
  m.def("heat_kernel", [](double t, double x, double y, double tau) {
    return hhp::eval_kernel(t, hhp::GPoint::h1(x, y, tau));
  }, py::arg("t"), py::arg("x"), py::arg("y"), py::arg("tau"), "h_t at (x, y, tau) by direct quadrature");
  m.def("kernel_at_origin", [](double t) { return hhp::kernel_at_origin(1, t); }, py::arg("t"));

  m.def("fujita_exponent", [](double g) { return hhp::fujita_exponent(g); }, py::arg("gamma"));
  m.def("hardy_threshold", [](double g) { return hhp::hardy_threshold(g); }, py::arg("gamma"));
  m.def("classify", [](double p, double g) { return hhp::to_string(hhp::classify(p, g)); }, py::arg("p"),
        py::arg("gamma"));

  m.def("config_keys", [] { return hhp::RunConfig::keys(); });
  m.def("config_echo", [](const py::dict& d) {
    const auto cfg = config_from(d);
    py::dict out;
    for (const auto& [k, v] : cfg.key_values()) out[py::str(k)] = v;
    return out;
  }, py::arg("config") = py::dict());

  m.def("run_single", [](const py::dict& d) {
    const auto cfg = config_from(d);
    hhp::PhaseCell cell;
    {
      py::gil_scoped_release release;
      cell = hhp::run_single(cfg);
    }
    return cell_dict(cfg, cell);
  }, py::arg("config") = py::dict(), "Run one cell; keys as in the config file");

  m.def("run_sweep", [](const py::dict& d) {
    const auto cfg = config_from(d);
    std::vector<hhp::PhaseCell> cells;
    {
      py::gil_scoped_release release;
      cells = hhp::run_sweep(cfg);
    }
    std::ostringstream csv;
    hhp::write_sweep_csv(csv, cells, cfg.n_heis);
    py::list rows;
    for (const auto& c : cells) rows.append(cell_dict(cfg, c));
    return py::make_tuple(rows, csv.str());
  }, py::arg("config"), "Sweep p_values x gamma_values; returns (cells, csv text)");

  m.def("kernel_check", [](std::uint64_t seed) {
    std::vector<hhp::CheckRow> rows;
    {
      py::gil_scoped_release release;
      rows = hhp::kernel_check_suite(seed);
    }
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["name"] = r.name;
      d["detail"] = r.detail;
      d["value"] = r.value;
      d["limit"] = r.limit;
      d["pass"] = r.pass;
      out.append(d);
    }
    return out;
  }, py::arg("seed") = 0);
}
