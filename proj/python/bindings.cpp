#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sarw/metrics.hpp"
#include "sarw/mixing.hpp"
#include "sarw/objectives.hpp"
#include "sarw/radiometry.hpp"
#include "sarw/schedule.hpp"
#include "sarw/synthetic.hpp"
#include "sarw/trainer.hpp"

namespace py = pybind11;
using namespace sarw;

namespace {

GridD grid_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2D array");
  GridD g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + g.size(), g.v.begin());
  return g;
}

py::array_t<double> array_from_grid(const GridD& g) {
  py::array_t<double> out({g.rows, g.cols});
  std::copy(g.v.begin(), g.v.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<double> array_from_gridT(const Grid<T>& g) {
  py::array_t<double> out({g.rows, g.cols});
  double* p = out.mutable_data();
  for (size_t i = 0; i < g.v.size(); ++i) p[i] = static_cast<double>(g.v[i]);
  return out;
}

SarPatch patch_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& vh,
                           const py::array_t<double, py::array::c_style | py::array::forcecast>& vv) {
  SarPatch p;
  p.id = "py";
  p.vh_db = grid_from_array(vh).cast<float>();
  p.vv_db = grid_from_array(vv).cast<float>();
  p.check_consistent();
  return p;
}

}  // namespace

PYBIND11_MODULE(_sarw, m) {
  m.doc() = "Backscatter-power-weighted masked-autoencoder pretraining for dual-pol SAR tiles";

  py::register_exception<Error>(m, "SarwError");

  m.def(
      "db_to_linear",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& db) {
        return array_from_grid(db_to_linear(grid_from_array(db)));
      },
      py::arg("db"), "Elementwise 10^(dB/10).");

  m.def(
      "linear_to_db",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& linear) {
        return array_from_grid(linear_to_db(grid_from_array(linear)));
      },
      py::arg("linear"), "Elementwise 10*log10(x); input must be strictly positive.");

  m.def(
      "min_max_normalize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return array_from_grid(min_max_normalize(grid_from_array(x)));
      },
      py::arg("x"));

  m.def(
      "compute_weight_map",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& vh_db,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& vv_db) {
        return array_from_gridT(compute_weight_map(patch_from_arrays(vh_db, vv_db)));
      },
      py::arg("vh_db"), py::arg("vv_db"),
      "Per-pixel loss weights exp(1 - norm(mean linear backscatter)), each in [1, e].");

  m.def(
      "sample_mask",
      [](int grid_side, double ratio, int mask_unit, uint64_t seed) {
        Rng rng(seed);
        const MixMask mask = sample_mask(grid_side, ratio, mask_unit, rng);
        py::array_t<uint8_t> out({grid_side, grid_side});
        std::copy(mask.unit_grid.v.begin(), mask.unit_grid.v.end(), out.mutable_data());
        return out;
      },
      py::arg("grid_side"), py::arg("ratio"), py::arg("mask_unit"), py::arg("seed"),
      "Binary mix mask with exactly round(ratio * grid_side^2) units set.");

  m.def(
      "weighted_dual_reconstruction_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& t1_hat,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& t2_hat,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& t1,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& t2,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& selector,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
         int mask_unit) {
        if (t1_hat.ndim() != 3) throw ShapeError("predictions must be [C, S, S]");
        auto to_tensor = [](const py::array_t<double, py::array::c_style |
                                                          py::array::forcecast>& a) {
          std::vector<int> shape;
          for (int d = 0; d < a.ndim(); ++d) shape.push_back(static_cast<int>(a.shape(d)));
          Tensor<double> t(shape);
          std::copy(a.data(), a.data() + t.numel(), t.data.begin());
          return t;
        };
        Grid<uint8_t> sel(static_cast<int>(selector.shape(0)),
                          static_cast<int>(selector.shape(1)));
        std::copy(selector.data(), selector.data() + sel.size(), sel.v.begin());
        const GridF w = grid_from_array(weights).cast<float>();
        const auto out = weighted_dual_reconstruction_loss(
            to_tensor(t1_hat), to_tensor(t2_hat), to_tensor(t1), to_tensor(t2), sel, w, mask_unit);
        auto grad_array = [&](const Tensor<double>& g) {
          py::array_t<double> arr({g.dim(0), g.dim(1), g.dim(2)});
          std::copy(g.data.begin(), g.data.end(), arr.mutable_data());
          return arr;
        };
        return py::make_tuple(out.loss, grad_array(out.grad1), grad_array(out.grad2));
      },
      py::arg("t1_hat"), py::arg("t2_hat"), py::arg("t1"), py::arg("t2"), py::arg("selector"),
      py::arg("weights"), py::arg("mask_unit"),
      "Returns (loss, d_loss/d_t1_hat, d_loss/d_t2_hat). Selector 0 activates the first "
      "target, 1 the second; weights lie in [1, e].");

  m.def(
      "generate_synthetic_scene",
      [](int size, int region_count, int speckle_looks, uint64_t seed, double mean_lo_db,
         double mean_hi_db, const std::vector<double>& region_means_db) {
        SyntheticSceneSpec spec;
        spec.size = size;
        spec.region_count = region_count;
        spec.speckle_looks = speckle_looks;
        spec.seed = seed;
        spec.mean_lo_db = mean_lo_db;
        spec.mean_hi_db = mean_hi_db;
        spec.region_means_db = region_means_db;
        const auto scene = generate_synthetic_scene(spec);
        py::array_t<int> regions({spec.size, spec.size});
        std::copy(scene.regions.v.begin(), scene.regions.v.end(), regions.mutable_data());
        return py::make_tuple(array_from_gridT(scene.patch.vh_db),
                              array_from_gridT(scene.patch.vv_db), regions);
      },
      py::arg("size"), py::arg("region_count"), py::arg("speckle_looks"), py::arg("seed"),
      py::arg("mean_lo_db") = -28.0, py::arg("mean_hi_db") = -4.0,
      py::arg("region_means_db") = std::vector<double>{},
      "Voronoi scene with unit-mean Gamma speckle; returns (vh_db, vv_db, regions).");

  m.def(
      "average_precision",
      [](const std::vector<double>& scores, const std::vector<int>& labels) -> py::object {
        std::vector<uint8_t> l(labels.begin(), labels.end());
        const auto ap = average_precision(scores, l);
        if (!ap) return py::none();
        return py::float_(*ap);
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "aggregate_macro_micro",
      [](const std::vector<std::vector<double>>& scores,
         const std::vector<std::vector<int>>& labels) {
        std::vector<std::vector<uint8_t>> l;
        l.reserve(labels.size());
        for (const auto& row : labels) l.emplace_back(row.begin(), row.end());
        return aggregate_macro_micro(scores, l).to_json();
      },
      py::arg("scores"), py::arg("labels"), "Returns the metric report as a JSON string.");

  m.def(
      "lr_at",
      [](long long step, double peak_lr, int warmup_epochs, int total_epochs,
         int steps_per_epoch) {
        TrainSchedule s;
        s.peak_lr = peak_lr;
        s.warmup_epochs = warmup_epochs;
        s.total_epochs = total_epochs;
        s.steps_per_epoch = steps_per_epoch;
        return lr_at(step, s);
      },
      py::arg("step"), py::arg("peak_lr"), py::arg("warmup_epochs"), py::arg("total_epochs"),
      py::arg("steps_per_epoch"), "Linear warmup to the peak, then half-cosine decay to 0.");

#ifdef SARW_VERSION
  m.attr("__version__") = SARW_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
