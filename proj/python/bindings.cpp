#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>
#include <string>
#include <vector>

#include "pcgs/codec.hpp"
#include "pcgs/container.hpp"
#include "pcgs/error.hpp"
#include "pcgs/model_io.hpp"
#include "pcgs/quantizer.hpp"
#include "pcgs/synth.hpp"

namespace py = pybind11;

namespace {

std::span<const uint8_t>
view(const py::bytes& b)
{
  std::string_view sv = b;
  return {reinterpret_cast<const uint8_t*>(sv.data()), sv.size()};
}

py::bytes
to_py(const std::vector<uint8_t>& v)
{
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

template <class T>
py::array_t<T>
matrix(const std::vector<T>& v, size_t rows, size_t cols)
{
  py::array_t<T> a({rows, cols});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict
rate_dict(const pcgs::RateTerms& r)
{
  py::dict d;
  d["new_anchor_bits"] = r.new_anchor_bits;
  d["refine_bits"] = r.refine_bits;
  d["new_offset_bits"] = r.new_offset_bits;
  d["total_bits"] = r.total_bits();
  d["new_anchor_symbols"] = r.new_anchor_symbols;
  d["refine_symbols"] = r.refine_symbols;
  d["new_offset_symbols"] = r.new_offset_symbols;
  d["clamped"] = r.clamped;
  return d;
}

py::dict
recon_dict(const pcgs::Reconstruction& rc)
{
  const size_t n = size_t(rc.num_anchors);
  const int d = rc.layout.feat_dim;
  const int k = rc.layout.offsets_per_anchor;
  const int ac = rc.layout.anchor_channels();
  std::vector<double> anchors(n * ac, 0.0), offsets(n * 3 * size_t(k), 0.0);
  std::vector<uint8_t> apres(n, 0), gpres(n * size_t(k), 0);
  for (size_t i = 0; i < n; i++) {
    if (!rc.anchor_present(int(i)))
      continue;
    apres[i] = 1;
    for (int c = 0; c < ac; c++)
      anchors[i * ac + c] = rc.anchor_value(int(i), c);
    for (int g = 0; g < k; g++) {
      if (!rc.gauss_present(int(i), g))
        continue;
      gpres[i * k + g] = 1;
      for (int j = 0; j < 3; j++)
        offsets[(i * k + g) * 3 + j] = rc.offset_value(int(i), g, j);
    }
  }
  std::vector<double> feats(n * d), scal(n * 6);
  for (size_t i = 0; i < n; i++) {
    std::copy_n(&anchors[i * ac], d, &feats[i * d]);
    std::copy_n(&anchors[i * ac + d], 6, &scal[i * 6]);
  }

  py::dict out;
  out["level"] = rc.level;
  out["locations"] = matrix(rc.locations, n, 3);
  out["anchor_feats"] = matrix(feats, n, size_t(d));
  out["scalings"] = matrix(scal, n, 6);
  py::array_t<double> off({n, size_t(k), size_t(3)});
  std::copy(offsets.begin(), offsets.end(), off.mutable_data());
  out["offsets"] = off;
  out["anchor_present"] = py::array(py::dtype("bool"), {n}, apres.data());
  out["gauss_present"] = py::array(py::dtype("bool"), {n, size_t(k)}, gpres.data());
  out["anchor_coverage"] = rc.anchor_coverage();
  out["gauss_coverage"] = rc.gauss_coverage();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Progressive anchor-scene codec";

  static py::exception<pcgs::Error> base(m, "Error");
  static py::exception<pcgs::Error> io_err(m, "IoError", base.ptr());
  static py::exception<pcgs::Error> fmt_err(m, "FormatError", base.ptr());
  static py::exception<pcgs::Error> inv_err(m, "InvariantError", base.ptr());
  static py::exception<pcgs::Error> arg_err(m, "ArgumentError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const pcgs::Error& e) {
      switch (e.kind()) {
      case pcgs::ErrorKind::io: PyErr_SetString(io_err.ptr(), e.what()); break;
      case pcgs::ErrorKind::format: PyErr_SetString(fmt_err.ptr(), e.what()); break;
      case pcgs::ErrorKind::invariant: PyErr_SetString(inv_err.ptr(), e.what()); break;
      case pcgs::ErrorKind::argument: PyErr_SetString(arg_err.ptr(), e.what()); break;
      }
    }
  });

  m.def("synth_spec", [](const std::string& text) { return pcgs::to_text(pcgs::parse_synth_spec(text)); },
        py::arg("text") = "", "Normalized text form of a synthetic scene recipe.");

  m.def(
    "synth",
    [](const std::string& text) {
      auto spec = pcgs::parse_synth_spec(text);
      pcgs::check_synth_spec(spec);
      return to_py(pcgs::write_scene_model(pcgs::generate(spec)));
    },
    py::arg("spec") = "", "Generate a scene model file from key=value recipe text.");

  m.def(
    "validate",
    [](const py::bytes& model) { return pcgs::validate_scene(pcgs::read_scene_model(view(model))); },
    py::arg("model"));

  m.def(
    "encode",
    [](const py::bytes& model, int max_levels, int threads) {
      auto sm = pcgs::read_scene_model(view(model));
      pcgs::EncodeOptions opts;
      opts.max_levels = max_levels;
      opts.threads = threads;
      std::vector<uint8_t> out;
      {
        py::gil_scoped_release nogil;
        out = pcgs::encode(sm, opts).stream.to_bytes();
      }
      return to_py(out);
    },
    py::arg("model"), py::arg("max_levels") = 0, py::arg("threads") = 0);

  m.def(
    "decode",
    [](const py::bytes& stream, int levels, int threads) {
      auto bs = pcgs::ProgressiveBitstream::parse(view(stream));
      pcgs::DecodeOptions opts;
      opts.threads = threads;
      pcgs::Reconstruction rc;
      {
        py::gil_scoped_release nogil;
        rc = pcgs::decode(bs, levels, opts);
      }
      return recon_dict(rc);
    },
    py::arg("stream"), py::arg("levels") = 0, py::arg("threads") = 0);

  m.def(
    "truncate",
    [](const py::bytes& stream, int level) {
      return to_py(pcgs::truncate(pcgs::ProgressiveBitstream::parse(view(stream)), level).to_bytes());
    },
    py::arg("stream"), py::arg("level"));

  m.def(
    "inspect",
    [](const py::bytes& stream) {
      auto r = pcgs::inspect(pcgs::ProgressiveBitstream::parse(view(stream)));
      py::dict d;
      d["file_bytes"] = r.file_bytes;
      d["header_bytes"] = r.header_bytes;
      d["trailer_bytes"] = r.trailer_bytes;
      d["header_sections"] = r.header_sections;
      d["levels_configured"] = r.levels_configured;
      d["levels_present"] = r.levels_present;
      d["num_anchors"] = r.num_anchors;
      d["num_gaussians"] = r.num_gaussians;
      d["delta_bytes"] = r.delta_bytes;
      d["anchor_ratio"] = r.anchor_ratio;
      d["gauss_ratio"] = r.gauss_ratio;
      return d;
    },
    py::arg("stream"));

  m.def(
    "estimate_rates",
    [](const py::bytes& model) {
      auto sm = pcgs::read_scene_model(view(model));
      py::list out;
      for (const auto& r : pcgs::estimate_rates(sm))
        out.append(rate_dict(r));
      return out;
    },
    py::arg("model"));

  m.def(
    "quantize",
    [](double f, double q1, int first_level, int level) {
      auto lat = pcgs::quantize_at_level(f, pcgs::Step::from_real(q1), first_level, level);
      return py::make_tuple(lat.index, lat.value());
    },
    py::arg("f"), py::arg("q1"), py::arg("first_level") = 1, py::arg("level") = 1,
    "Index and value of f after rounding at first_level and refining to level.");

  m.def(
    "step", [](double q1, int level) { return pcgs::Step::from_real(q1).at_level(level).value(); },
    py::arg("q1"), py::arg("level") = 1);
}
