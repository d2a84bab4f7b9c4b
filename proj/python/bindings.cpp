#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kin/metrics.hpp"
#include "kin/pipeline.hpp"
#include "kin/weight_file.hpp"

namespace py = pybind11;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as float32 (3, H, W) arrays in [-1, 1].
kin::Image to_image(const FloatArray& a) {
  if (a.ndim() != 3) throw kin::Error("expected a (channels, height, width) array");
  kin::Image img(a.shape(0), a.shape(1), a.shape(2));
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

FloatArray to_array(const kin::Image& img) {
  FloatArray a({img.channels(), img.height(), img.width()});
  std::copy(img.data().begin(), img.data().end(), a.mutable_data());
  return a;
}

kin::NormMode make_mode(const std::string& mode, const std::string& kernel, int kernel_size,
                        std::optional<double> sigma) {
  const kin::NormKind kind = kin::parse_norm_kind(mode);
  if (kind != kin::NormKind::KIN) return {kind, std::nullopt};
  return kin::NormMode::kin(kin::build_kernel(kin::parse_kernel_kind(kernel), kernel_size, sigma));
}

kin::Generator make_generator(int patch, int base_width, int resblocks,
                              std::optional<std::uint64_t> seed,
                              std::optional<std::filesystem::path> weights) {
  kin::GeneratorConfig cfg;
  cfg.patch_size = patch;
  cfg.base_width = base_width;
  cfg.n_resblocks = resblocks;
  if (weights) return kin::Generator::from_weights(cfg, kin::read_container(*weights));
  if (seed) return kin::Generator::from_seed(cfg, *seed);
  throw kin::Error("either weights or seed is required");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tiled image translation with kernelized instance normalization";
  py::register_exception<kin::Error>(m, "KinError", PyExc_ValueError);

  py::class_<kin::Generator>(m, "Generator")
      .def(py::init(&make_generator), py::kw_only(), py::arg("patch") = 512,
           py::arg("base_width") = 64, py::arg("resblocks") = 9, py::arg("seed") = py::none(),
           py::arg("weights") = py::none())
      .def_property_readonly("patch", [](const kin::Generator& g) { return g.config().patch_size; })
      .def_property_readonly("norm_sites",
                             [](const kin::Generator& g) { return g.config().norm_site_count(); })
      .def("save_weights", [](const kin::Generator& g, const std::filesystem::path& path) {
        kin::write_container(path, g.export_weights());
      });

  m.def(
      "translate",
      [](const FloatArray& image, const kin::Generator& gen, const std::string& mode,
         const std::string& kernel, int kernel_size, std::optional<double> sigma,
         const std::string& policy, int threads) {
        kin::TranslateOptions opts;
        opts.mode = make_mode(mode, kernel, kernel_size, sigma);
        opts.policy = kin::parse_policy(policy);
        opts.threads = threads;
        kin::TranslationResult result;
        const kin::Image img = to_image(image);
        {
          py::gil_scoped_release release;
          result = kin::translate(img, gen, opts);
        }
        return py::make_tuple(to_array(result.output), result.report.to_json().dump());
      },
      py::arg("image"), py::arg("generator"), py::kw_only(), py::arg("mode") = "kin",
      py::arg("kernel") = "constant", py::arg("kernel_size") = 3, py::arg("sigma") = py::none(),
      py::arg("policy") = "pad-reflect", py::arg("threads") = 1);

  m.def("read_image", [](const std::filesystem::path& p) { return to_array(kin::read_image(p)); });
  m.def("write_image", [](const std::filesystem::path& p, const FloatArray& a) {
    kin::write_image(p, to_image(a));
  });

  m.def("histogram_correlation", [](const FloatArray& a, const FloatArray& b, int bins) {
    const auto r = kin::histogram_correlation(to_image(a), to_image(b), bins);
    return py::make_tuple(r.value, r.degenerate);
  }, py::arg("a"), py::arg("b"), py::arg("bins") = 256);
  m.def("sobel_gradient_ycbcr", [](const FloatArray& a) { return kin::sobel_gradient_ycbcr(to_image(a)); });
  m.def("ssim", [](const FloatArray& a, const FloatArray& b, int window) {
    return kin::ssim(to_image(a), to_image(b), window);
  }, py::arg("a"), py::arg("b"), py::arg("window") = 8);
  m.def("seam_discrepancy", [](const FloatArray& a, std::size_t patch, const std::string& policy) {
    const kin::Image img = to_image(a);
    const auto grid = kin::make_grid(img.height(), img.width(), patch, kin::parse_policy(policy));
    return kin::seam_discrepancy(img, grid);
  }, py::arg("image"), py::arg("patch"), py::arg("policy") = "pad-reflect");

  m.def("stats_similarity_csv",
        [](const FloatArray& image, const kin::Generator& gen, std::vector<int> layers,
           double max_distance, bool include_self) {
          const kin::Image img = to_image(image);
          const auto grid = kin::make_grid(img.height(), img.width(),
                                           static_cast<std::size_t>(gen.config().patch_size),
                                           kin::RemainderPolicy::PadReflect);
          kin::StatsSimilarityOptions opts;
          opts.layers = std::move(layers);
          opts.max_distance_px = max_distance;
          opts.include_self_pairs = include_self;
          return kin::stats_similarity_csv(kin::stats_similarity(gen, img, grid, opts));
        },
        py::arg("image"), py::arg("generator"), py::kw_only(), py::arg("layers") = std::vector<int>{},
        py::arg("max_distance") = 5000.0, py::arg("include_self") = false);

  m.def("read_container", [](const std::filesystem::path& p) {
    py::dict out;
    for (const auto& [name, arr] : kin::read_container(p)) {
      std::vector<py::ssize_t> shape(arr.dims.begin(), arr.dims.end());
      FloatArray a(shape);
      std::copy(arr.values.begin(), arr.values.end(), a.mutable_data());
      out[py::str(name)] = a;
    }
    return out;
  });
  m.def("write_container", [](const std::filesystem::path& p, const py::dict& entries) {
    kin::WeightStore store;
    for (const auto& [key, value] : entries) {
      const auto a = py::cast<FloatArray>(value);
      kin::NamedArray arr;
      for (py::ssize_t i = 0; i < a.ndim(); ++i) arr.dims.push_back(static_cast<std::uint32_t>(a.shape(i)));
      arr.values.assign(a.data(), a.data() + a.size());
      store.emplace(py::cast<std::string>(key), std::move(arr));
    }
    kin::write_container(p, store);
  });
}
