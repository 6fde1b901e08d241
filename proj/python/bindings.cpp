#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "pakan/data.hpp"
#include "pakan/error.hpp"
#include "pakan/gradcheck.hpp"
#include "pakan/metrics.hpp"
#include "pakan/spline.hpp"
#include "pakan/tiling.hpp"
#include "pakan/train.hpp"

namespace py = pybind11;
using namespace pakan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape dims(a.shape(), a.shape() + a.ndim());
    return Tensor(std::move(dims), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    Array out(shape);
    std::copy_n(t.raw(), t.numel(), out.mutable_data());
    return out;
}

py::dict sample_dict(const SamplePair& s) {
    py::dict d;
    d["id"] = s.id;
    d["lr_ms"] = to_array(s.lr_ms);
    d["pan"] = to_array(s.pan);
    d["gt"] = to_array(s.gt);
    return d;
}

SplineBasisSpec basis_spec(const std::string& family, std::size_t grid) {
    if (family == "cubic_bspline") return {BasisFamily::cubic_bspline, grid};
    if (family == "triangular") return {BasisFamily::triangular, grid};
    throw ConfigError("unknown basis family '" + family + "'");
}

NetworkConfig network_config(std::size_t bands, std::size_t width, std::size_t depth, bool pa, bool kan, bool use_1d,
                             bool use_2d, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.bands = bands;
    cfg.width = width;
    cfg.depth = depth;
    cfg.pa = pa;
    cfg.kan = kan;
    cfg.use_1d = use_1d;
    cfg.use_2d = use_2d;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pixel-adaptive KAN pansharpening: splines, metrics, data and the network";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    m.def(
        "basis_eval", [](double u, const std::string& family, std::size_t grid) { return basis_eval(u, basis_spec(family, grid)); },
        py::arg("u"), py::arg("family") = "cubic_bspline", py::arg("grid") = 5);
    m.def(
        "basis_grad", [](double u, const std::string& family, std::size_t grid) { return basis_grad(u, basis_spec(family, grid)); },
        py::arg("u"), py::arg("family") = "cubic_bspline", py::arg("grid") = 5);

    // data
    m.def("normalize", [](const Array& raw) { return to_array(normalize(to_tensor(raw))); });
    m.def("synth_scene", [](std::uint64_t seed, std::size_t bands, std::size_t h, std::size_t w) {
        return to_array(synth_scene(seed, bands, h, w));
    });
    m.def(
        "wald_degrade",
        [](const Array& gt, double sigma) {
            const auto d = wald_degrade(to_tensor(gt), sigma);
            return py::make_tuple(to_array(d.lr_ms), to_array(d.pan));
        },
        py::arg("gt"), py::arg("blur_sigma") = kDefaultBlurSigma);
    m.def("make_sample", [](std::uint64_t seed, std::size_t index, std::size_t bands) {
        return sample_dict(make_sample(seed, index, bands));
    });
    m.def("write_dataset", [](const std::filesystem::path& dir, std::uint64_t seed, std::size_t count, std::size_t bands) {
        return write_dataset(dir, seed, count, bands).rows.size();
    });
    m.def("pktn_write", [](const std::filesystem::path& path, const std::map<std::string, Array>& entries) {
        NamedTensors named;
        for (const auto& [k, v] : entries) named.emplace_back(k, to_tensor(v));
        pktn_write(path, named);
    });
    m.def("pktn_read", [](const std::filesystem::path& path) {
        py::dict d;
        for (const auto& [k, v] : pktn_read(path)) d[py::str(k)] = to_array(v);
        return d;
    });

    // metrics
    m.def("psnr", [](const Array& x, const Array& ref) { return psnr(to_tensor(x), to_tensor(ref)); });
    m.def("sam", [](const Array& x, const Array& ref) { return sam(to_tensor(x), to_tensor(ref)); });
    m.def(
        "ergas", [](const Array& x, const Array& ref, std::size_t ratio) { return ergas(to_tensor(x), to_tensor(ref), ratio); },
        py::arg("x"), py::arg("ref"), py::arg("ratio") = 4);
    m.def(
        "q_index", [](const Array& a, const Array& b, std::size_t block) { return q_index(to_tensor(a), to_tensor(b), block); },
        py::arg("a"), py::arg("b"), py::arg("block") = kQBlock);
    m.def(
        "q2n", [](const Array& x, const Array& ref, std::size_t block) { return q2n(to_tensor(x), to_tensor(ref), block); },
        py::arg("x"), py::arg("ref"), py::arg("block") = kQBlock);
    m.def("d_lambda", [](const Array& fused, const Array& ms) { return d_lambda(to_tensor(fused), to_tensor(ms)); });
    m.def("d_s", [](const Array& fused, const Array& ms, const Array& pan) {
        return d_s(to_tensor(fused), to_tensor(ms), to_tensor(pan));
    });
    m.def("hqnr", &hqnr, py::arg("d_lambda"), py::arg("d_s"));

    // network
    py::class_<PansharpNet>(m, "Network")
        .def(py::init([](std::size_t bands, std::size_t width, std::size_t depth, bool pa, bool kan, bool use_1d, bool use_2d,
                         std::uint64_t seed) {
                 return build_network(network_config(bands, width, depth, pa, kan, use_1d, use_2d, seed));
             }),
             py::arg("bands") = 4, py::arg("width") = 16, py::arg("depth") = 2, py::arg("pa") = true, py::arg("kan") = true,
             py::arg("use_1d") = true, py::arg("use_2d") = true, py::arg("seed") = 0)
        .def_static("load", [](const std::filesystem::path& path) { return load_checkpoint(path); })
        .def("save", [](const PansharpNet& net, const std::filesystem::path& path) { save_checkpoint(path, net); })
        .def_property_readonly("variant", [](const PansharpNet& net) { return net.cfg.variant_name(); })
        .def_property_readonly("param_count", [](const PansharpNet& net) { return net.params.total_elements(); })
        .def("predict", [](const PansharpNet& net, const Array& ms, const Array& pan) {
            return to_array(predict(net, to_tensor(ms), to_tensor(pan)));
        })
        .def(
            "tile_infer",
            [](const PansharpNet& net, const Array& ms, const Array& pan, std::size_t tile, std::size_t pad) {
                TileSpec spec;
                spec.hr_tile = tile;
                spec.reflect_pad = pad;
                return to_array(tile_infer(net, to_tensor(ms), to_tensor(pan), spec));
            },
            py::arg("ms"), py::arg("pan"), py::arg("tile") = 64, py::arg("pad") = 4);

    // training
    m.def("lr_at_epoch", [](std::size_t epoch, double lr, std::size_t step_size, double gamma) {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.step_size = step_size;
        cfg.gamma = gamma;
        return lr_at_epoch(cfg, epoch);
    }, py::arg("epoch"), py::arg("lr") = 4e-4, py::arg("step_size") = 100, py::arg("gamma") = 0.7);
    m.def(
        "train",
        [](const std::string& config_text) {
            const auto res = train(parse_train_config(config_text));
            py::list log;
            for (const auto& e : res.log) {
                py::dict d;
                d["epoch"] = e.epoch;
                d["train_l1"] = e.train_l1;
                d["val_l1"] = e.val_l1;
                d["val_sam"] = e.val_sam;
                d["lr"] = e.lr;
                log.append(d);
            }
            return py::make_tuple(log, res.best_epoch);
        },
        py::arg("config_text"), "Trains from `key = value` config text; returns (per-epoch log, best epoch).");
    m.def(
        "gradcheck",
        [](std::uint64_t seed) {
            std::vector<std::tuple<std::string, double, bool>> out;
            for (const auto& r : run_gradcheck_suite(seed)) out.emplace_back(r.name, r.max_rel_error, r.passed);
            return out;
        },
        py::arg("seed") = 0);
}
