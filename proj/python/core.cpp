#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "ccn/data/embedding_store.hpp"
#include "ccn/errors.hpp"
#include "ccn/evidence/image.hpp"
#include "ccn/evidence/text.hpp"
#include "ccn/report/verdict.hpp"
#include "ccn/train/gradient_suite.hpp"

namespace py = pybind11;
using namespace ccn;

namespace {

Section parse_section(std::string_view name) {
  for (Section s : kAllSections)
    if (section_name(s) == name) return s;
  throw ValidationError("unknown store section '" + std::string(name) + "'");
}

py::array_t<double> to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

std::string verify_json(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                        const std::filesystem::path& store, const std::string& example_id, std::size_t k) {
  const Checkpoint ckpt = Checkpoint::read(checkpoint);
  const auto examples = load_dataset(dataset, false);
  const EmbeddingStore st = EmbeddingStore::read(store);
  if (example_id.empty() && examples.size() != 1)
    throw ValidationError("dataset has " + std::to_string(examples.size()) + " examples; give an example id");
  const ExampleRecord* ex = example_id.empty() ? &examples.front() : nullptr;
  for (const auto& e : examples)
    if (e.id == example_id) ex = &e;
  if (!ex) throw ValidationError("no example with id '" + example_id + "'");
  return to_json(verify_example(ckpt, *ex, st, k)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings of the ccn library";

  static py::exception<Error> base(m, "CcnError", PyExc_RuntimeError);
  static py::exception<DimensionError> dimension(m, "DimensionError", base.ptr());
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<FormatError> format(m, "FormatError", base.ptr());
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<NumericError> numeric(m, "NumericError", base.ptr());
  static py::exception<DecodeError> decode(m, "DecodeError", base.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DimensionError& e) {
      dimension(e.what());
    } catch (const ConfigError& e) {
      config(e.what());
    } catch (const FormatError& e) {
      format(e.what());
    } catch (const ValidationError& e) {
      validation(e.what());
    } catch (const NumericError& e) {
      numeric(e.what());
    } catch (const DecodeError& e) {
      decode(e.what());
    } catch (const IoError& e) {
      io(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def(
      "perceptual_hash", [](py::bytes data) { return perceptual_hash(std::string_view(data)).to_hex(); },
      py::arg("encoded"), "dHash of an encoded PNG, JPEG or PNM image as 16 hex digits");
  m.def(
      "perceptual_hash_file",
      [](const std::filesystem::path& path) { return perceptual_hash(read_image(path)).to_hex(); }, py::arg("path"));
  m.def(
      "hamming_distance",
      [](const std::string& a, const std::string& b) {
        return hamming_distance(PerceptualHash::from_hex(a), PerceptualHash::from_hex(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("normalize_caption", [](const std::string& s) { return normalize_caption(s); }, py::arg("text"));
  m.def("dedupe_snippets", &dedupe_snippets, py::arg("snippets"));

  m.def("verify_json", &verify_json, py::arg("checkpoint"), py::arg("dataset"), py::arg("store"),
        py::arg("example_id") = "", py::arg("k") = kDefaultReportK, py::call_guard<py::gil_scoped_release>());
  m.def(
      "render_report",
      [](const std::string& report_json) {
        return render_text(verdict_report_from_json(nlohmann::json::parse(report_json)));
      },
      py::arg("report_json"));

  m.def(
      "gradcheck",
      [](std::size_t seeds, double h) {
        std::vector<std::uint64_t> s;
        for (std::uint64_t i = 1; i <= seeds; ++i) s.push_back(i);
        std::vector<std::tuple<std::string, std::uint64_t, double>> out;
        for (const auto& c : run_gradient_suite(s, h)) out.emplace_back(c.name, c.seed, c.report.max_rel_error);
        return out;
      },
      py::arg("seeds") = 1, py::arg("h") = 1e-5, py::call_guard<py::gil_scoped_release>(),
      "(check, seed, max relative error) for every finite-difference check");

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init<>())
      .def_static("read", &EmbeddingStore::read, py::arg("path"))
      .def("write", &EmbeddingStore::write, py::arg("path"))
      .def_static("sections", [] {
        std::vector<std::string> out;
        for (Section s : kAllSections) out.emplace_back(section_name(s));
        return out;
      })
      .def("declare", [](EmbeddingStore& st, const std::string& s, std::size_t dim) { st.declare(parse_section(s), dim); },
           py::arg("section"), py::arg("dim"))
      .def("dim", [](const EmbeddingStore& st, const std::string& s) { return st.dim(parse_section(s)); })
      .def("keys", [](const EmbeddingStore& st, const std::string& s) { return st.keys(parse_section(s)); })
      .def("put_vector",
           [](EmbeddingStore& st, const std::string& s, const std::string& key,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
             if (v.ndim() != 1) throw DimensionError("put_vector expects a 1-D array");
             st.put_vector(parse_section(s), key, std::span<const double>(v.data(), v.size()));
           },
           py::arg("section"), py::arg("key"), py::arg("values"))
      .def("put_tokens",
           [](EmbeddingStore& st, const std::string& key,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
             if (v.ndim() != 2) throw DimensionError("put_tokens expects a 2-D array");
             st.put_tokens(key, from_array(v));
           },
           py::arg("key"), py::arg("tokens"))
      .def("put_strings",
           [](EmbeddingStore& st, const std::string& s, const std::string& key, std::vector<std::string> values) {
             st.put_strings(parse_section(s), key, std::move(values));
           },
           py::arg("section"), py::arg("key"), py::arg("values"))
      .def("vector",
           [](const EmbeddingStore& st, const std::string& s, const std::string& key) {
             return to_array(st.vector(parse_section(s), key));
           })
      .def("tokens", [](const EmbeddingStore& st, const std::string& key) { return to_array(st.tokens(key)); })
      .def("strings", [](const EmbeddingStore& st, const std::string& s,
                         const std::string& key) { return st.strings(parse_section(s), key); })
      .def("serialize", [](const EmbeddingStore& st) { return py::bytes(st.serialize()); })
      .def("__eq__", [](const EmbeddingStore& a, const EmbeddingStore& b) { return a == b; });
}
