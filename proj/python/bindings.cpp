#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "adasf/adawat.hpp"
#include "adasf/cli.hpp"
#include "adasf/config.hpp"
#include "adasf/fft.hpp"
#include "adasf/imageio.hpp"
#include "adasf/metrics.hpp"
#include "adasf/pipeline.hpp"

namespace py = pybind11;
using namespace adasf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  return Tensor({1, 1, h, w}, std::vector<double>(a.data(), a.data() + h * w));
}

Array to_array(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("expected a single plane, got " + s.str());
  Array out({s.h, s.w});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["EN"] = r.en;
  d["SD"] = r.sd;
  d["SF"] = r.sf;
  d["MI"] = r.mi;
  d["SCD"] = r.scd;
  d["Qabf"] = r.qabf;
  d["SSIM"] = r.ssim;
  return d;
}

/// A model together with its optimizer state.
struct Model {
  Checkpoint ck;

  static Model from_config(const std::string& text, std::optional<std::uint64_t> seed) {
    RunSettings s;
    if (!text.empty()) apply_config_text(s, text);
    if (seed) s.model.seed = *seed;
    return Model{Checkpoint{ModelParams::create(s.model), {}}};
  }

  Array fuse(const Array& a, const Array& b) {
    const Tensor ta = to_tensor(a);
    const Tensor tb = to_tensor(b);
    require_same_shape(ta, tb, "fuse");
    const Padded pa = pad_to_multiple(ta, 4);
    const Padded pb = pad_to_multiple(tb, 4);
    Tensor f;
    {
      py::gil_scoped_release release;
      f = adasf::fuse(pa.tensor, pb.tensor, ck.params, MaskMode::Hard);
    }
    return to_array(crop_back(f, pa.orig_h, pa.orig_w));
  }

  py::list train(const std::vector<std::pair<Array, Array>>& pairs, std::size_t steps, double lr, std::size_t batch) {
    std::vector<ImagePair> data;
    for (const auto& [a, b] : pairs) data.push_back({to_tensor(a), to_tensor(b)});
    TrainConfig tc;
    tc.steps = steps;
    tc.lr = lr;
    tc.batch = batch;
    std::vector<LossRecord> rec;
    {
      py::gil_scoped_release release;
      rec = train_toy(ck.params, ck.state, data, tc);
    }
    py::list out;
    for (const LossRecord& r : rec) {
      py::dict d;
      d["step"] = r.step;
      d["l_ssim"] = r.loss.l_ssim;
      d["l_text"] = r.loss.l_text;
      d["l_int"] = r.loss.l_int;
      d["l_total"] = r.loss.l_total;
      d["smoothed"] = r.smoothed;
      out.append(d);
    }
    return out;
  }

  py::dict decompose(const Array& x, std::size_t channel) {
    if (channel >= ck.params.config.channels) throw py::index_error("channel out of range");
    AdaWatParams slice = ck.params.adawat.channel_slice(channel);
    const SubbandSet s = adawat_forward(to_tensor(x), slice, true);
    py::dict d;
    d["ll"] = to_array(s.ll);
    d["lh"] = to_array(s.lh);
    d["hl"] = to_array(s.hl);
    d["hh"] = to_array(s.hh);
    return d;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatial-frequency image fusion core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Model>(m, "Model")
      .def(py::init(&Model::from_config), py::arg("config") = "", py::arg("seed") = py::none(),
           "Fresh model from key=value config text.")
      .def_static(
          "load", [](const std::filesystem::path& p) { return Model{load_checkpoint(p)}; }, py::arg("path"))
      .def(
          "save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(p, self.ck.params, &self.ck.state); },
          py::arg("path"))
      .def_property_readonly("param_count", [](const Model& self) { return param_count(self.ck.params); })
      .def_property_readonly("step", [](const Model& self) { return self.ck.state.adam.step; })
      .def_property_readonly("config", [](const Model& self) { return config_to_text(self.ck.params.config); })
      .def("fuse", &Model::fuse, py::arg("a"), py::arg("b"), "Fuse two aligned luminance images in [0, 1].")
      .def("train", &Model::train, py::arg("pairs"), py::arg("steps") = 200, py::arg("lr") = 1e-4,
           py::arg("batch") = 0, "Adam steps on (a, b) pairs; returns one loss record per step.")
      .def("decompose", &Model::decompose, py::arg("image"), py::arg("channel") = 0,
           "Enhanced wavelet subbands of an even-sized image.");

  m.def(
      "metrics", [](const Array& f, const Array& a, const Array& b) {
        return report_dict(compute_metrics(to_tensor(f), to_tensor(a), to_tensor(b)));
      },
      py::arg("fused"), py::arg("a"), py::arg("b"));
  m.def("entropy", [](const Array& x) { return entropy(to_tensor(x)); });
  m.def("spatial_frequency", [](const Array& x) { return spatial_frequency(to_tensor(x)); });
  m.def("ssim_metric",
        [](const Array& f, const Array& a, const Array& b) { return ssim_metric(to_tensor(f), to_tensor(a), to_tensor(b)); });
  m.def(
      "fft2",
      [](const Array& x) {
        const Spectrum s = fft2(to_tensor(x));
        py::array_t<std::complex<double>> out({s.shape.h, s.shape.w});
        auto* dst = out.mutable_data();
        for (std::size_t i = 0; i < s.re.size(); ++i) dst[i] = {s.re[i], s.im[i]};
        return out;
      },
      "Unitary 2-D DFT.");
  m.def(
      "read_luminance", [](const std::filesystem::path& p) { return to_array(luminance(read_pnm(p))); },
      py::arg("path"));
  m.def(
      "write_gray", [](const std::filesystem::path& p, const Array& x) { write_pnm(p, to_gray_image(to_tensor(x))); },
      py::arg("path"), py::arg("image"));
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "adasffuse");
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line subcommand; returns (exit_code, stdout, stderr).");
}
