// numpy-facing bindings. Arrays are float64 in (C, H, W) layout; configs
// travel as JSON text and are parsed by the same strict reader the CLI uses.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mattevit/config.hpp"
#include "mattevit/errors.hpp"
#include "mattevit/matte.hpp"
#include "mattevit/metrics.hpp"
#include "mattevit/pipeline.hpp"

namespace py = pybind11;
using namespace mattevit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ColorSpace parse_space(const std::string& s) {
  if (s == "srgb") return ColorSpace::kSRGB;
  if (s == "lab") return ColorSpace::kLAB;
  if (s == "gray") return ColorSpace::kGray;
  throw ConfigError("unknown color space '" + s + "' (srgb, lab, gray)");
}

Image to_image(const Array& a, const std::string& space) {
  if (a.ndim() != 3) throw ShapeError("expected a (C, H, W) array");
  return Image(to_tensor(a), parse_space(space));
}

RunConfig parse_config(const std::string& text) { return run_config_from_json(nlohmann::json::parse(text)); }

py::dict metrics_row(const MetricsRow& r) {
  py::dict d;
  d["image"] = r.image;
  if (r.has_image_metrics) {
    d["psnr_db"] = r.psnr_db;
    d["ssim"] = r.ssim;
    d["rmse"] = r.rmse;
  }
  if (r.edit_distance) d["edit_distance"] = *r.edit_distance;
  return d;
}

py::dict report(const MetricsReport& r) {
  py::list rows;
  for (const auto& row : r.rows) rows.append(metrics_row(row));
  py::dict d;
  d["rows"] = rows;
  d["mean"] = metrics_row(r.aggregate());
  d["problems"] = r.problems;
  return d;
}

py::dict train_result(const TrainResult& r) {
  py::list log;
  for (const auto& s : r.log)
    log.append(py::dict(py::arg("step") = s.step, py::arg("epoch") = s.epoch, py::arg("loss") = s.loss,
                        py::arg("charbonnier") = s.charbonnier, py::arg("fft") = s.fft));
  return py::dict(py::arg("checkpoint") = r.checkpoint, py::arg("step") = r.step, py::arg("log") = log);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p).pixels); });
  m.def("save_image", [](const Array& a, const std::filesystem::path& p, const std::string& space) {
    save_image(to_image(a, space), p);
  }, py::arg("pixels"), py::arg("path"), py::arg("space") = "srgb");
  m.def("rgb_to_lab", [](const Array& a) { return to_array(rgb_to_lab(to_image(a, "srgb")).pixels); });
  m.def("lab_to_rgb", [](const Array& a) { return to_array(lab_to_rgb(to_image(a, "lab")).pixels); });
  m.def("synth_pair", [](std::uint64_t seed, std::size_t h, std::size_t w) {
    const ShadowPair p = synth_shadow_pair(seed, h, w);
    return py::make_tuple(to_array(p.shadow.pixels), to_array(p.shadow_free.pixels));
  }, py::arg("seed"), py::arg("height"), py::arg("width"));
  m.def("write_synthetic_dataset", [](const std::filesystem::path& root, std::size_t count, std::uint64_t seed,
                                      std::size_t h, std::size_t w) {
    return write_synthetic_dataset(root, count, seed, h, w);
  }, py::arg("root"), py::arg("count"), py::arg("seed"), py::arg("height"), py::arg("width"));

  m.def("compute_matte", [](const Array& shadow, const Array& shadow_free, double epsilon, const std::string& space) {
    return to_array(compute_matte(to_image(shadow, space), to_image(shadow_free, space), epsilon).values);
  }, py::arg("shadow"), py::arg("shadow_free"), py::arg("epsilon") = 1e-6, py::arg("space") = "srgb");

  m.def("psnr", [](const Array& p, const Array& g) { return psnr(to_tensor(p), to_tensor(g)); });
  m.def("ssim", [](const Array& p, const Array& g) { return ssim(to_tensor(p), to_tensor(g)); });
  m.def("rmse", [](const Array& p, const Array& g, bool unit) {
    return rmse(to_tensor(p), to_tensor(g), unit ? RmseScale::kUnit : RmseScale::kEightBit);
  }, py::arg("pred"), py::arg("gt"), py::arg("unit") = false);
  m.def("edit_distance", [](std::string_view a, std::string_view b) { return edit_distance(a, b); });

  m.def("parameter_count", [](const std::string& model_json) {
    return parameter_count(model_config_from_json(nlohmann::json::parse(model_json)));
  });
  m.def("normalize_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); });

  m.def("train_matte_generator", [](const std::string& config, const std::filesystem::path& resume) {
    py::gil_scoped_release nogil;
    const TrainResult r = train_matte_generator(parse_config(config), resume);
    py::gil_scoped_acquire gil;
    return train_result(r);
  }, py::arg("config"), py::arg("resume") = std::filesystem::path{});
  m.def("train_removal", [](const std::string& config, const std::filesystem::path& resume) {
    py::gil_scoped_release nogil;
    const TrainResult r = train_removal(parse_config(config), resume);
    py::gil_scoped_acquire gil;
    return train_result(r);
  }, py::arg("config"), py::arg("resume") = std::filesystem::path{});

  m.def("restore", [](const std::filesystem::path& checkpoint, const Array& shadow) {
    return to_array(load_removal_model(checkpoint).restore(to_image(shadow, "srgb")).pixels);
  }, py::arg("checkpoint"), py::arg("shadow"));
  m.def("infer", [](const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                    const std::filesystem::path& out) { return infer(checkpoint, input, out); },
        py::arg("checkpoint"), py::arg("input"), py::arg("out"));
  m.def("evaluate", [](const std::filesystem::path& pred, const std::filesystem::path& gt) {
    return report(evaluate(pred, gt));
  }, py::arg("pred"), py::arg("gt"));
  m.def("ocr_eval", [](const std::filesystem::path& pred, const std::filesystem::path& gt) {
    return report(ocr_eval(gt, pred));
  }, py::arg("pred"), py::arg("gt"));

  m.def("gradient_audit", [](std::uint64_t seed) {
    py::list out;
    for (const auto& e : gradient_audit(seed)) out.append(py::make_tuple(e.name, e.error, e.tolerance));
    return out;
  }, py::arg("seed") = 0);
}
