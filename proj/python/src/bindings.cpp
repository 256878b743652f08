#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lesionmetrics/components.hpp"
#include "lesionmetrics/error.hpp"
#include "lesionmetrics/loss.hpp"

namespace py = pybind11;
namespace lm = lesionmetrics;

namespace {

lm::Dims dims_of(const py::array& a, const char* name) {
  if (a.ndim() != 3) throw py::value_error(std::string(name) + " must be a 3-D array");
  if (!(a.flags() & py::array::c_style)) {
    throw py::value_error(std::string(name) + " must be C-contiguous");
  }
  return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
          static_cast<std::size_t>(a.shape(2))};
}

template <typename T>
std::vector<double> widen(const py::array& a) {
  const auto* src = static_cast<const T*>(a.data());
  return std::vector<double>(src, src + a.size());
}

struct Input {
  lm::ProbVolume p;
  lm::BinaryMask g;
  bool single = false;
};

Input read_input(const py::array& p, const py::array& g, const std::array<double, 3>& spacing) {
  const auto dp = dims_of(p, "p");
  const auto dg = dims_of(g, "g");
  if (!(dp == dg)) throw py::value_error("p and g shapes differ");
  const lm::Spacing sp{spacing[0], spacing[1], spacing[2]};

  Input in;
  if (p.dtype().is(py::dtype::of<double>())) {
    in.p = lm::ProbVolume(dp, sp, widen<double>(p));
  } else if (p.dtype().is(py::dtype::of<float>())) {
    in.p = lm::ProbVolume(dp, sp, widen<float>(p));
    in.single = true;
  } else {
    throw py::type_error("p must be float32 or float64");
  }
  if (!g.dtype().is(py::dtype::of<std::uint8_t>()) && !g.dtype().is(py::dtype::of<bool>())) {
    throw py::type_error("g must be uint8 or bool");
  }
  const auto* gs = static_cast<const std::uint8_t*>(g.data());
  in.g = lm::BinaryMask(dg, sp, std::vector<std::uint8_t>(gs, gs + g.size()));
  return in;
}

py::tuple result(const lm::LossResult& r, const py::array& like, bool single) {
  std::vector<py::ssize_t> shape(like.shape(), like.shape() + 3);
  if (single) {
    py::array_t<float> grad(shape);
    std::transform(r.gradient.begin(), r.gradient.end(), grad.mutable_data(),
                   [](double x) { return static_cast<float>(x); });
    return py::make_tuple(r.value, grad);
  }
  py::array_t<double> grad(shape);
  std::copy(r.gradient.begin(), r.gradient.end(), grad.mutable_data());
  return py::make_tuple(r.value, grad);
}

lm::VolumeUnit parse_unit(const std::string& s) {
  if (s == "voxels") return lm::VolumeUnit::Voxels;
  if (s == "mm3") return lm::VolumeUnit::CubicMillimeters;
  throw py::value_error("volume_unit must be 'voxels' or 'mm3'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dice-family losses with gradients over dense 3-D arrays.";

  py::register_exception<lm::Error>(m, "LesionMetricsError", PyExc_ValueError);

  py::class_<lm::WeightMapCache>(m, "WeightMapCache")
      .def(py::init<>())
      .def_property_readonly("size", &lm::WeightMapCache::size)
      .def_property_readonly("hits", &lm::WeightMapCache::hits);

  m.def(
      "va_dice",
      [](const py::array& p, const py::array& g, double epsilon, double numerator_constant,
         int connectivity, std::array<double, 3> spacing, const std::string& volume_unit,
         lm::WeightMapCache* cache) {
        const auto in = read_input(p, g, spacing);
        lm::LossConfig cfg;
        cfg.epsilon = epsilon;
        cfg.numerator_constant = numerator_constant;
        cfg.connectivity = lm::parse_connectivity(std::to_string(connectivity));
        cfg.volume_unit = parse_unit(volume_unit);
        lm::LossResult r;
        {
          py::gil_scoped_release release;
          r = lm::va_dice_loss(in.p, in.g, cfg, cache);
        }
        return result(r, p, in.single);
      },
      py::arg("p"), py::arg("g"), py::kw_only(), py::arg("epsilon") = 1e-5,
      py::arg("numerator_constant") = 2.0, py::arg("connectivity") = 26,
      py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
      py::arg("volume_unit") = "voxels", py::arg("cache") = nullptr,
      "Volume-aware Dice loss. Returns (value, gradient).");

  m.def(
      "soft_dice",
      [](const py::array& p, const py::array& g, double epsilon) {
        const auto in = read_input(p, g, {1.0, 1.0, 1.0});
        lm::LossResult r;
        {
          py::gil_scoped_release release;
          r = lm::soft_dice_loss(in.p, in.g, epsilon);
        }
        return result(r, p, in.single);
      },
      py::arg("p"), py::arg("g"), py::kw_only(), py::arg("epsilon") = 1e-5,
      "Soft Dice loss. Returns (value, gradient).");

  m.def(
      "cross_entropy",
      [](const py::array& p, const py::array& g, double epsilon) {
        const auto in = read_input(p, g, {1.0, 1.0, 1.0});
        lm::LossResult r;
        {
          py::gil_scoped_release release;
          r = lm::cross_entropy_loss(in.p, in.g, epsilon);
        }
        return result(r, p, in.single);
      },
      py::arg("p"), py::arg("g"), py::kw_only(), py::arg("epsilon") = 1e-5,
      "Mean binary cross-entropy. Returns (value, gradient).");
}
