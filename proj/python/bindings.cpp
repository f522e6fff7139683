#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "loco/baselines.hpp"
#include "loco/completion.hpp"
#include "loco/forecast.hpp"
#include "loco/io.hpp"
#include "loco/qrnn.hpp"
#include "loco/streams.hpp"
#include "loco/synth.hpp"

namespace py = pybind11;
using namespace loco;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Pose sequences cross the boundary as float64 arrays of shape (T, 25, 3).
std::vector<Pose> to_poses(const Array& a) {
  if (a.ndim() != 3 || a.shape(1) != static_cast<py::ssize_t>(kJointCount) || a.shape(2) != 3) {
    throw py::value_error("poses must have shape (T, 25, 3)");
  }
  std::vector<Pose> out(a.shape(0));
  auto r = a.unchecked<3>();
  for (py::ssize_t t = 0; t < a.shape(0); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto jj = static_cast<py::ssize_t>(j);
      out[t][j] = {r(t, jj, 0), r(t, jj, 1), r(t, jj, 2)};
    }
  }
  return out;
}

Array from_poses(std::span<const Pose> poses) {
  Array a({static_cast<py::ssize_t>(poses.size()), static_cast<py::ssize_t>(kJointCount), py::ssize_t{3}});
  auto w = a.mutable_unchecked<3>();
  for (std::size_t t = 0; t < poses.size(); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto tt = static_cast<py::ssize_t>(t), jj = static_cast<py::ssize_t>(j);
      w(tt, jj, 0) = poses[t][j].u;
      w(tt, jj, 1) = poses[t][j].v;
      w(tt, jj, 2) = poses[t][j].c;
    }
  }
  return a;
}

Array from_transforms(std::span<const TransformSE3> ts) {
  Array a({static_cast<py::ssize_t>(ts.size()), py::ssize_t{3}, py::ssize_t{4}});
  double* p = a.mutable_data();
  for (const auto& t : ts) p = std::copy(t.m.begin(), t.m.end(), p);
  return a;
}

std::vector<TransformSE3> to_transforms(const Array& a) {
  if (a.ndim() != 3 || a.shape(1) != 3 || a.shape(2) != 4) {
    throw py::value_error("transforms must have shape (T, 3, 4)");
  }
  std::vector<TransformSE3> out(a.shape(0));
  const double* p = a.data();
  for (auto& t : out) {
    std::copy(p, p + 12, t.m.begin());
    p += 12;
  }
  return out;
}

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  Tensor t = Tensor::matrix(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

Array from_tensor(const Tensor& t) {
  Array a({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

py::dict record_dict(const DatasetRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["frame_index"] = r.frame_index;
  d["poses"] = from_poses(r.seq.frames);
  d["depth"] = r.seq.anchor_depth;
  d["transforms"] = from_transforms(r.seq.transforms);
  d["width"] = r.seq.frame_width;
  d["height"] = r.seq.frame_height;
  d["truth"] = r.truth.empty() ? py::object(py::none()) : py::object(from_poses(r.truth));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pedestrian locomotion forecasting core";
  m.attr("JOINT_COUNT") = kJointCount;
  m.attr("ANCHOR_JOINT") = kAnchorJoint;

  m.def("kde", [](const Array& pred, const Array& truth, const std::string& norm) {
    return kde(to_poses(pred), to_poses(truth), parse_kde_norm(norm));
  }, py::arg("pred"), py::arg("truth"), py::arg("norm") = "l2",
        "Keypoint displacement error summed over joints, averaged over frames.");
  m.def("mean_kde", [](const Array& pred, const Array& truth, const std::string& norm) {
    return mean_kde(to_poses(pred), to_poses(truth), parse_kde_norm(norm));
  }, py::arg("pred"), py::arg("truth"), py::arg("norm") = "l2");
  m.def("snap_to_lattice", &snap_to_lattice);

  m.def("decompose", [](const Array& poses, bool allow_missing) {
    const auto sp = decompose(to_poses(poses), allow_missing ? MissingJoints::kAllow : MissingJoints::kReject);
    const auto T = static_cast<py::ssize_t>(sp.global.size());
    const auto L = static_cast<py::ssize_t>(kLocalJointCount);
    Array anchor({T, py::ssize_t{2}}), offsets({T, L, py::ssize_t{2}}), conf({T, L});
    auto a = anchor.mutable_unchecked<2>();
    auto o = offsets.mutable_unchecked<3>();
    auto c = conf.mutable_unchecked<2>();
    for (py::ssize_t t = 0; t < T; ++t) {
      a(t, 0) = sp.global.anchor[t].u;
      a(t, 1) = sp.global.anchor[t].v;
      for (py::ssize_t k = 0; k < L; ++k) {
        o(t, k, 0) = sp.local.frames[t].offset[k].u;
        o(t, k, 1) = sp.local.frames[t].offset[k].v;
        c(t, k) = sp.local.frames[t].confidence[k];
      }
    }
    return py::make_tuple(anchor, sp.global.confidence, offsets, conf);
  }, py::arg("poses"), py::arg("allow_missing") = false,
        "Split poses into (anchor, anchor_confidence, offsets, offset_confidence).");
  m.def("recombine", [](const Array& anchor, const Array& anchor_conf, const Array& offsets,
                        const Array& conf) {
    GlobalStream g;
    LocalStream l;
    auto a = anchor.unchecked<2>();
    auto o = offsets.unchecked<3>();
    auto c = conf.unchecked<2>();
    if (offsets.shape(0) != anchor.shape(0) || offsets.shape(1) != static_cast<py::ssize_t>(kLocalJointCount)) {
      throw py::value_error("offsets must have shape (T, 24, 2)");
    }
    for (py::ssize_t t = 0; t < anchor.shape(0); ++t) {
      g.anchor.push_back({a(t, 0), a(t, 1)});
      g.confidence.push_back(anchor_conf.data()[t]);
      LocalFrame f;
      for (std::size_t k = 0; k < kLocalJointCount; ++k) {
        const auto kk = static_cast<py::ssize_t>(k);
        f.offset[k] = {o(t, kk, 0), o(t, kk, 1)};
        f.confidence[k] = c(t, kk);
      }
      l.frames.push_back(f);
    }
    return from_poses(recombine(g, l));
  });

  m.def("baseline", [](const std::string& name, const Array& history, std::size_t t_f) {
    return from_poses(run_baseline(parse_baseline(name), to_poses(history), t_f));
  }, py::arg("name"), py::arg("history"), py::arg("t_f"),
        "zero_velocity | constant_velocity | last_observed_velocity");

  m.def("chain_transforms", [](const Array& steps) {
    const auto t = chain_transforms(to_transforms(steps));
    return from_transforms(std::span<const TransformSE3>(&t, 1));
  }, "Compose (K, 3, 4) per-step transforms into one (1, 3, 4) transform.");

  m.def("generate_dataset", [](std::size_t count, std::size_t t_p, std::size_t t_f,
                               const std::string& preset, std::uint64_t seed) {
    py::list out;
    for (const auto& r : generate_dataset(count, t_p, t_f, parse_scene_preset(preset), NoiseConfig{},
                                          Intrinsics{}, seed)) {
      out.append(record_dict(to_record(r)));
    }
    return out;
  }, py::arg("count"), py::arg("t_p") = 15, py::arg("t_f") = 15, py::arg("preset") = "default",
        py::arg("seed") = 0);
  m.def("load_dataset", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : load_dataset(path)) out.append(record_dict(r));
    return out;
  });

  m.def("qrnn_layer_forward", [](const Array& x, const Array& W, const Array& b, std::size_t hidden,
                                 std::size_t kernel, const std::string& pooling, const Array& c0) {
    if (pooling != "fo" && pooling != "f") throw py::value_error("pooling must be 'fo' or 'f'");
    QrnnLayerSpec spec{static_cast<std::size_t>(x.shape(1)), hidden, kernel,
                       pooling == "fo" ? Pooling::kFo : Pooling::kF};
    ParameterSet p;
    p.add("q.W", to_tensor(W));
    p.add("q.b", to_tensor(b));
    auto [h, c] = qrnn_layer_forward(to_tensor(x), p, "q", spec, to_tensor(c0));
    return py::make_tuple(from_tensor(h), from_tensor(c));
  }, py::arg("x"), py::arg("W"), py::arg("b"), py::arg("hidden"), py::arg("kernel"),
        py::arg("pooling"), py::arg("c0"),
        "One QRNN layer over a (T, D) sequence; W is (kernel*D, gates*hidden), gates z, f[, o].");

  py::class_<CompletionModel>(m, "CompletionModel")
      .def_property_readonly("loss_history", [](const CompletionModel& c) { return c.loss_history; })
      .def("complete", [](const CompletionModel& c, const Array& poses, double alpha_c) {
        return from_poses(complete(to_poses(poses), c, alpha_c));
      }, py::arg("poses"), py::arg("alpha_c") = kDefaultConfidenceThreshold)
      .def("save", [](const CompletionModel& c, const std::filesystem::path& dir) { save_completion(dir, c); })
      .def_static("load", &load_completion);
  m.def("train_completion", [](const Array& poses, std::size_t steps, std::uint64_t seed) {
    CompletionConfig cfg;
    cfg.steps = steps;
    const auto p = to_poses(poses);
    py::gil_scoped_release release;
    return train_completion(p, cfg, seed);
  }, py::arg("poses"), py::arg("steps") = 8000, py::arg("seed") = 0);

  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      std::vector<std::string> full{"loco"};
      full.insert(full.end(), args.begin(), args.end());
      code = run_cli(full, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Run a loco command line; returns (exit_code, stdout, stderr).");
}
