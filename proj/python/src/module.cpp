#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "autoaug/bench.hpp"
#include "autoaug/child.hpp"
#include "autoaug/codec.hpp"
#include "autoaug/datasets.hpp"
#include "autoaug/errors.hpp"
#include "autoaug/evaluation.hpp"
#include "autoaug/ops.hpp"
#include "autoaug/policy.hpp"
#include "autoaug/rng.hpp"

namespace py = pybind11;
using namespace autoaug;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ArgumentError("expected an HxWx3 uint8 array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> bytes(a.data(), a.data() + a.size());
  return ImageBuffer(w, h, std::move(bytes));
}

py::array_t<std::uint8_t> to_array(const ImageBuffer& img) {
  py::array_t<std::uint8_t> out({img.height(), img.width(), ImageBuffer::kChannels});
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

EnhanceKind enhance_kind(const std::string& name) {
  if (name == "contrast") return EnhanceKind::contrast;
  if (name == "color") return EnhanceKind::color;
  if (name == "brightness") return EnhanceKind::brightness;
  if (name == "sharpness") return EnhanceKind::sharpness;
  throw ArgumentError("unknown enhancement '" + name + "'");
}

AffineKind affine_kind(const std::string& name) {
  if (name == "shear_x") return AffineKind::shear_x;
  if (name == "shear_y") return AffineKind::shear_y;
  if (name == "translate_x") return AffineKind::translate_x;
  if (name == "translate_y") return AffineKind::translate_y;
  if (name == "rotate") return AffineKind::rotate;
  throw ArgumentError("unknown affine kind '" + name + "'");
}

py::list dataset_to_list(const LabeledDataset& d) {
  py::list out;
  for (std::size_t i = 0; i < d.size(); ++i) out.append(py::make_tuple(to_array(d.images[i]), d.labels[i]));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the autoaug package";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DatasetError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("invert", [](const U8Array& a) { return to_array(invert(to_image(a))); });
  m.def("solarize", [](const U8Array& a, int threshold) { return to_array(solarize(to_image(a), threshold)); },
        py::arg("img"), py::arg("threshold"));
  m.def("posterize", [](const U8Array& a, int bits) { return to_array(posterize(to_image(a), bits)); },
        py::arg("img"), py::arg("bits"));
  m.def("equalize", [](const U8Array& a) { return to_array(equalize(to_image(a))); });
  m.def("autocontrast", [](const U8Array& a) { return to_array(autocontrast(to_image(a))); });
  m.def("enhance",
        [](const U8Array& a, const std::string& kind, double factor) {
          return to_array(enhance(to_image(a), enhance_kind(kind), factor));
        },
        py::arg("img"), py::arg("kind"), py::arg("factor"));
  m.def("affine",
        [](const U8Array& a, const std::string& kind, double value, int fill) {
          return to_array(affine(to_image(a), affine_kind(kind), value, static_cast<std::uint8_t>(fill)));
        },
        py::arg("img"), py::arg("kind"), py::arg("value"), py::arg("fill") = kDefaultFill);
  m.def("cutout",
        [](const U8Array& a, int size, std::uint64_t seed) {
          RngStream rng(seed, 0);
          return to_array(cutout(to_image(a), size, rng));
        },
        py::arg("img"), py::arg("size"), py::arg("seed") = 0);
  m.def("sample_pair",
        [](const U8Array& a, const U8Array& b, double weight) {
          return to_array(sample_pair(to_image(a), to_image(b), weight));
        },
        py::arg("img"), py::arg("partner"), py::arg("weight"));

  m.def("op_names", [] {
    std::vector<std::string> names;
    for (int i = 0; i < kNumOpKinds; ++i) names.emplace_back(op_name(op_from_index(i)));
    return names;
  });

  py::class_<Policy>(m, "Policy")
      .def("__len__", &Policy::size)
      .def("__str__", [](const Policy& p) { return serialize_policy(p); })
      .def("__eq__", [](const Policy& a, const Policy& b) { return a == b; })
      .def("to_json", [](const Policy& p) { return policy_to_json(p).dump(); })
      .def_static("from_json", [](const std::string& text) {
        try {
          return policy_from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(0, e.what());
        }
      })
      .def("sub_policy", [](const Policy& p, std::size_t i) {
        if (i >= p.size()) throw py::index_error("sub-policy index out of range");
        py::list ops;
        for (const auto& op : p[i].ops) {
          ops.append(py::make_tuple(std::string(op_name(op.kind)), op.probability(), op.mag_index));
        }
        return ops;
      });

  m.def("parse_policy", [](const std::string& text) { return parse_policy(text); });
  m.def("apply_policy",
        [](const Policy& p, const U8Array& a, std::uint64_t seed, std::uint64_t stream) {
          RngStream rng(seed, stream);
          return to_array(apply_policy(p, to_image(a), rng));
        },
        py::arg("policy"), py::arg("img"), py::arg("seed"), py::arg("stream") = 0);
  m.def("encode_policy", [](const Policy& p) {
    const TokenSequence t = encode_policy(p);
    return std::vector<int>(t.begin(), t.end());
  });
  m.def("decode_tokens", [](const std::vector<int>& tokens) { return decode_tokens(std::span<const int>(tokens)); });
  m.def("search_space_size", &search_space_size, py::arg("num_sub_policies") = 5);
  m.def("derive_seed", py::overload_cast<std::uint64_t, std::uint64_t>(&derive_seed));

  m.def("synth_invariance",
        [](const std::string& invariances, std::uint64_t seed, std::size_t train, std::size_t val) {
          SynthOptions o;
          o.invariances = Invariances::parse(invariances);
          o.train = train;
          o.val = val;
          const SynthSplits s = synth_invariance(o, seed);
          return py::make_tuple(dataset_to_list(s.train), dataset_to_list(s.val), dataset_to_list(s.test));
        },
        py::arg("invariances") = "invert", py::arg("seed") = 0, py::arg("train") = 200, py::arg("val") = 200);

  // Validation accuracy of the reference child trained with `policy` (None for no augmentation).
  m.def("child_accuracy",
        [](const Policy* policy, const std::string& invariances, std::uint64_t dataset_seed, std::uint64_t eval_seed,
           int epochs) {
          SynthOptions o;
          o.invariances = Invariances::parse(invariances);
          const SynthSplits s = synth_invariance(o, dataset_seed);
          ChildConfig cfg;
          cfg.epochs = epochs;
          const ChildEvaluator ev(s.train, s.val, cfg);
          py::gil_scoped_release release;
          return ev.evaluate(policy ? *policy : identity_policy(), eval_seed);
        },
        py::arg("policy"), py::arg("invariances") = "invert", py::arg("dataset_seed") = 0,
        py::arg("eval_seed") = 0, py::arg("epochs") = 10);

  m.def("bench",
        [](const Policy& p, int image_size, std::size_t count, int threads, std::uint64_t seed) {
          std::string report;
          {
            py::gil_scoped_release release;
            report = bench(p, image_size, count, threads, seed).to_json();
          }
          return py::module_::import("json").attr("loads")(report);
        },
        py::arg("policy"), py::arg("image_size") = 32, py::arg("count") = 1000, py::arg("threads") = 1,
        py::arg("seed") = 0);
}
