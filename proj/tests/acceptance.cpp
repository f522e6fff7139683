// Acceptance run: one pass/fail line per criterion, exit status 1 if any fails.
// `acceptance 1 3 9` runs a subset.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "loco/baselines.hpp"
#include "loco/completion.hpp"
#include "loco/forecast.hpp"
#include "loco/io.hpp"
#include "loco/optim.hpp"
#include "loco/qrnn.hpp"
#include "loco/streams.hpp"
#include "loco/synth.hpp"

using namespace loco;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::matrix(r, c);
  for (double& x : t.data()) x = n(rng);
  return t;
}

// ---------------------------------------------------------------------------

void exact_inverse(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coord(-200.0, 1500.0), conf(0.01, 1.0);
  std::size_t mismatches = 0;
  for (int s = 0; s < 1000; ++s) {
    std::vector<Pose> seq(30);
    for (auto& p : seq) {
      for (auto& k : p.joints) k = {snap_to_lattice(coord(rng)), snap_to_lattice(coord(rng)), conf(rng)};
    }
    const auto sp = decompose(seq);
    if (!(recombine(sp.global, sp.local) == seq)) ++mismatches;
  }
  const double t = seconds_since(t0);
  o.detail << "1000 sequences, " << mismatches << " mismatches, " << t << " s";
  o.require(mismatches == 0, "exact equality");
  o.require(t < 5.0, "runtime < 5 s");
}

// Moves every future target well away from an untrained prediction so no L1
// term sits at its kink during differencing; adds large random egomotion.
ForecastExample away_from_kinks(ForecastExample ex) {
  for (std::size_t t = 0; t < ex.target.size(); ++t) {
    const double shift = 15.0 * static_cast<double>(t + 1);
    for (auto* p : {&ex.target[t], &ex.teacher[t]}) {
      for (auto& k : p->joints) {
        k.u += shift;
        if (&k != &p->anchor()) k.v += 0.2 * shift * static_cast<double>(&k - p->joints.data());
      }
    }
  }
  std::mt19937_64 rng(ex.history.size());
  std::normal_distribution<double> n(0.0, 0.3);
  for (std::size_t t = 1; t < ex.transforms.size(); ++t) {
    ex.transforms[t] = TransformSE3::from_axis_angle({n(rng), n(rng), n(rng)}, {5 * n(rng), n(rng), 5 * n(rng)});
  }
  return ex;
}

LocomotionSequence clean_scene(std::uint64_t seed, ScenePreset preset, std::size_t frames) {
  const auto s = sample_scene(preset, Intrinsics{}, frames, seed);
  return generate_scene(s.walker, s.camera, Intrinsics{}, frames);
}

void gradients(Outcome& o) {
  const auto t0 = Clock::now();
  constexpr double eps = 1e-4, tol = 1e-4;
  std::mt19937_64 rng(77);
  auto report = [&](const char* name, const GradCheckReport& r, const ParameterSet& p) {
    o.detail << name << " " << r.max_relative_error << "; ";
    o.require(r.max_relative_error <= tol, name);
    o.require(r.elements_checked == p.element_count(), std::string(name) + " coverage");
  };

  {  // completion autoencoder, dropout mask frozen
    Autoencoder net(AutoencoderSpec{}, "completion");
    ParameterSet p;
    net.init(p, rng);
    const auto data = generate_dataset(1, 15, 15, ScenePreset::kDefault, NoiseConfig{}, Intrinsics{}, 5);
    Tensor clean = Tensor::matrix(4, 50), mask = Tensor::matrix(4, 50);
    std::bernoulli_distribution keep(0.5);
    for (std::size_t b = 0; b < 4; ++b) {
      pose_to_row(data[0].truth.frames[b * 3], 1280.0, 720.0, &clean(b, 0));
      for (std::size_t j = 0; j < kJointCount; ++j) {
        const double k = keep(rng) ? 1.0 : 0.0;
        mask(b, 2 * j) = k;
        mask(b, 2 * j + 1) = k;
      }
    }
    auto build = [&](Graph& g) {
      ParamScope scope(g, p);
      return completion_loss(scope, net, clean, mask);
    };
    report("autoencoder", finite_diff_check(p, build, eps), p);
  }

  {  // 2-layer QRNN encoder-decoder
    QrnnConfig cfg;
    cfg.input_dim = 3;
    cfg.target_dim = 2;
    cfg.hidden = 4;
    cfg.layers = 2;
    QrnnEncoderDecoder net(cfg, "ed");
    ParameterSet p;
    net.init(p, rng);
    for (const auto& name : p.names()) {
      if (name.ends_with(".b")) p.value(name) = random_matrix(1, p.value(name).cols(), rng, 0.3);
    }
    const Tensor x = random_matrix(2 * 5, 3, rng), seed = random_matrix(2, 2, rng);
    const Tensor target = random_matrix(2 * 4, 2, rng);
    auto build = [&](Graph& g) {
      ParamScope scope(g, p);
      Var all = g.input(x);
      std::vector<Var> xs;
      for (std::size_t t = 0; t < 5; ++t) xs.push_back(g.slice(all, 0, 2 * t, 2 * t + 2));
      auto ys = net.decode(scope, net.encode(scope, xs), g.input(seed), 4);
      Var d = g.sub(g.concat(ys, 0), g.input(target));
      return g.mean(g.hadamard(d, d));
    };
    report("qrnn", finite_diff_check(p, build, eps), p);
  }

  {  // frame encoder
    ParameterSet p;
    FrameEncoder enc{16};
    enc.init(p, rng);
    const Tensor x = random_matrix(5, kFrameFeatureCount, rng);
    auto build = [&](Graph& g) {
      ParamScope scope(g, p);
      Var y = enc(scope, g.input(x));
      return g.mean(g.hadamard(y, y));
    };
    report("frame encoder", finite_diff_check(p, build, eps), p);
  }

  {  // composed global forecaster, free-running
    ForecastConfig cfg;
    cfg.t_p = 6;
    cfg.t_f = 4;
    cfg.hidden = 6;
    cfg.frame_hidden = 5;
    auto model = init_global(cfg, 7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& name : model.params.names()) {
      if (name.ends_with(".b")) {
        for (double& v : model.params.value(name).data()) v = 0.3 * n(rng);
      }
    }
    std::vector<ForecastExample> batch;
    for (std::uint64_t s = 0; s < 2; ++s) {
      auto seq = annotate_noisy(clean_scene(10 + s, ScenePreset::kCameraHeavy, 10), NoiseConfig{}, s);
      batch.push_back(away_from_kinks(make_example(seq, 6, 4, nullptr, 0.25)));
    }
    auto build = [&](Graph& g) {
      ParamScope scope(g, model.params);
      return global_loss(g, scope, model, batch, false);
    };
    report("global forecaster", finite_diff_check(model.params, build, eps), model.params);
  }
  const double t = seconds_since(t0);
  o.detail << t << " s";
  o.require(t < 120.0, "runtime < 2 min");
}

// ---------------------------------------------------------------------------

double naive_kde(const std::vector<Pose>& a, const std::vector<Pose>& b) {
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < 25; ++i) {
      const double du = a[t][i].u - b[t][i].u, dv = a[t][i].v - b[t][i].v;
      total += std::sqrt(du * du + dv * dv);
    }
  }
  return total / static_cast<double>(a.size());
}

void kde_oracle(Outcome& o) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> len(1, 30);
  std::uniform_real_distribution<double> coord(0.0, 1000.0), conf(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pose> a(len(rng)), b(a.size());
    for (auto* seq : {&a, &b}) {
      for (auto& p : *seq) {
        for (auto& k : p.joints) k = {coord(rng), coord(rng), conf(rng)};
      }
    }
    const double ref = naive_kde(a, b);
    worst = std::max({worst, std::fabs(kde(a, b) - ref), std::fabs(mean_kde(a, b) - ref / 25.0)});
  }
  o.detail << "max deviation " << worst;
  o.require(worst <= 1e-9, "naive loop to 1e-9");

  Pose a, b;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    a[i] = {10.0 * i, 7.0 * i, 1.0};
    b[i] = {10.0 * i + 3.0, 7.0 * i + 4.0, 1.0};
  }
  const std::vector<Pose> pa(4, a), pb(4, b);
  const std::vector<Vec2> ta{{0, 0}, {1, 1}}, tb{{3, 4}, {4, 5}};
  const bool exact = kde(pa, pb) == 125.0 && mean_kde(pa, pb) == 5.0 && kde(ta, tb) == 5.0;
  o.detail << "; (3,4) offsets exact: " << (exact ? "yes" : "no");
  o.require(exact, "(3,4) analytic cases");
}

void baseline_analytics(Outcome& o) {
  std::vector<Pose> linear(30), drift(30);
  for (std::size_t t = 0; t < 30; ++t) {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      const double vu = 0.5 * static_cast<double>(i) - 3.0, vv = 1.25 - 0.25 * static_cast<double>(i % 7);
      linear[t][i] = {100.0 + 8.0 * i + vu * t, 300.0 - 4.0 * i + vv * t, 1.0};
      drift[t][i] = {50.0 + 2.0 * t, 80.0 + i, 1.0};
    }
  }
  const std::span<const Pose> lh(linear.data(), 15), lf(linear.data() + 15, 15);
  const std::span<const Pose> dh(drift.data(), 15), df(drift.data() + 15, 15);
  const double cv = kde(constant_velocity(lh, 15), lf);
  const double lov = kde(last_observed_velocity(lh, 15), lf);
  const double zv = mean_kde(zero_velocity(dh, 15), df);
  o.detail << "constant velocity " << cv << ", last observed velocity " << lov
           << ", zero velocity per-joint " << zv;
  o.require(cv == 0.0 && lov == 0.0, "velocity baselines exact");
  o.require(zv == 16.0, "zero velocity 16");
}

// ---------------------------------------------------------------------------

double mean_kde_against_truth(const std::vector<std::vector<Pose>>& pred,
                              const std::vector<SyntheticRecord>& test, std::size_t t_p,
                              std::size_t t_f) {
  double s = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    s += kde(pred[i], std::span<const Pose>(test[i].truth.frames.data() + t_p, t_f));
  }
  return s / static_cast<double>(test.size());
}

std::vector<Pose> confident_poses(const std::vector<SyntheticRecord>& records) {
  std::vector<Pose> out;
  for (const auto& r : records) {
    const auto f = confidence_filter(r.noisy.frames);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

void orderings(Outcome& o) {
  const auto t0 = Clock::now();
  const std::size_t t_p = 15, t_f = 15;
  const double alpha = kDefaultConfidenceThreshold;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto train = generate_dataset(500, t_p, t_f, ScenePreset::kDefault, NoiseConfig{}, Intrinsics{},
                                        derive_seed(seed, 100));
    const auto test = generate_dataset(100, t_p, t_f, ScenePreset::kDefault, NoiseConfig{}, Intrinsics{},
                                       derive_seed(seed, 200));
    const auto confident = confident_poses(train);
    const auto completion = train_completion(confident, CompletionConfig{}, seed);
    ForecastConfig fc;
    std::vector<ForecastExample> completed, raw;
    for (const auto& r : train) {
      completed.push_back(make_example(r.noisy, t_p, t_f, &completion, alpha));
      raw.push_back(make_example(r.noisy, t_p, t_f, nullptr, alpha));
    }
    std::vector<LocomotionSequence> seqs;
    std::vector<std::vector<Pose>> raw_hist;
    for (const auto& r : test) {
      seqs.push_back(r.noisy);
      raw_hist.emplace_back(r.noisy.frames.begin(), r.noisy.frames.begin() + t_p);
    }

    auto local = init_local(fc, completion, confident, seed);
    train_local(local, completed, seed);
    auto global = init_global(fc, seed);
    train_global(global, completed, seed);
    const double full = mean_kde_against_truth(
        forecast_locomotion(seqs, &completion, {&local, &global}, t_p, t_f, alpha), test, t_p, t_f);
    const double zero = mean_kde_against_truth(
        forecast_locomotion(seqs, &completion, {}, t_p, t_f, alpha), test, t_p, t_f);

    auto local_raw = init_local(fc, completion, confident, seed);
    train_local(local_raw, raw, seed);
    auto global_raw = init_global(fc, seed);
    train_global(global_raw, raw, seed);
    const double decomposition = mean_kde_against_truth(
        forecast_locomotion(seqs, nullptr, {&local_raw, &global_raw}, t_p, t_f, alpha), test, t_p, t_f);

    auto entangled = init_entangled(fc, 1280.0, 720.0, seed);
    train_entangled(entangled, raw, seed);
    const double tangled = mean_kde_against_truth(forecast_entangled(raw_hist, entangled), test, t_p, t_f);

    o.detail << "seed " << seed << ": full " << full << " < decomposition-only " << decomposition
             << " < entangled " << tangled << ", zero-velocity " << zero << "; ";
    const std::string tag = "seed " + std::to_string(seed);
    o.require(full < decomposition, tag + " full < decomposition-only");
    o.require(decomposition < tangled, tag + " decomposition-only < entangled");
    o.require(full < zero, tag + " full < zero-velocity");
  }
  const double t = seconds_since(t0);
  o.detail << "(KDE summed over 25 joints) " << t << " s";
  o.require(t < 1800.0, "runtime < 30 min");
}

void horizon_trend(Outcome& o) {
  const std::size_t t_p = 15, t_f = kHorizons.back();
  const double alpha = kDefaultConfidenceThreshold;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto train = generate_dataset(500, t_p, t_f, ScenePreset::kCameraHeavy, NoiseConfig{},
                                        Intrinsics{}, derive_seed(seed, 300));
    const auto test = generate_dataset(100, t_p, t_f, ScenePreset::kCameraHeavy, NoiseConfig{},
                                       Intrinsics{}, derive_seed(seed, 400));
    const auto completion = train_completion(confident_poses(train), CompletionConfig{}, seed);
    ForecastConfig fc;
    fc.t_f = t_f;
    std::vector<ForecastExample> examples;
    for (const auto& r : train) examples.push_back(make_example(r.noisy, t_p, t_f, &completion, alpha));
    auto global = init_global(fc, seed);
    train_global(global, examples, seed);

    std::map<std::size_t, double> model_kde, cv_kde;
    for (const auto& r : test) {
      LocomotionSequence hist = r.noisy.window(0, t_p);
      hist.frames = complete(hist.frames, completion, alpha);
      const auto track = forecast_global(decompose(hist).global, global);
      const auto cv = constant_velocity(hist.frames, t_f);
      for (std::size_t h : kHorizons) {
        std::vector<Vec2> truth, base;
        for (std::size_t k = 0; k < h; ++k) {
          truth.push_back(r.truth.frames[t_p + k].anchor().position());
          base.push_back(cv[k].anchor().position());
        }
        model_kde[h] += kde(std::span<const Vec2>(track.data(), h), truth) / 100.0;
        cv_kde[h] += kde(base, truth) / 100.0;
      }
    }
    o.detail << "seed " << seed << " advantage";
    double previous = -1e300;
    bool monotone = true;
    for (std::size_t h : kHorizons) {
      const double adv = cv_kde[h] - model_kde[h];
      o.detail << " " << h << ":" << adv;
      monotone = monotone && adv >= previous;
      previous = adv;
    }
    o.detail << "; ";
    o.require(monotone, "seed " + std::to_string(seed) + " non-decreasing");
  }
}

// ---------------------------------------------------------------------------

void completion_suite(Outcome& o) {
  auto poses_of = [](std::size_t count, std::uint64_t seed) {
    const auto data = generate_dataset(count, 15, 15, ScenePreset::kDefault, NoiseConfig{}, Intrinsics{}, seed);
    std::vector<Pose> out;
    for (const auto& r : data) out.insert(out.end(), r.truth.frames.begin(), r.truth.frames.end());
    return out;
  };
  const auto train = poses_of(300, 21);
  const auto model = train_completion(train, CompletionConfig{}, 5);
  const double alpha = kDefaultConfidenceThreshold;

  Pose mean{};
  for (const auto& p : train) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      mean[j].u += p[j].u / static_cast<double>(train.size());
      mean[j].v += p[j].v / static_cast<double>(train.size());
    }
  }
  const auto held = poses_of(60, 77);
  std::mt19937_64 rng(17);
  std::bernoulli_distribution drop(0.3);
  double ae = 0.0, fill = 0.0;
  std::size_t n = 0;
  bool pass_through = true, idempotent = true;
  for (const auto& p : held) {
    Pose q = p;
    std::vector<std::size_t> masked;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (drop(rng)) {
        q[j] = {0.0, 0.0, 0.0};
        masked.push_back(j);
      }
    }
    const Pose c = complete(q, model, alpha);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (q[j].c > alpha) pass_through = pass_through && c[j] == q[j];
    }
    idempotent = idempotent && complete(c, model, alpha) == c;
    for (std::size_t j : masked) {
      ae += std::hypot(c[j].u - p[j].u, c[j].v - p[j].v);
      fill += std::hypot(mean[j].u - p[j].u, mean[j].v - p[j].v);
      ++n;
    }
  }
  ae /= static_cast<double>(n);
  fill /= static_cast<double>(n);
  o.detail << "masked joints " << n << ": autoencoder " << ae << " px, mean-pose fill " << fill
           << " px, 3% of width " << 0.03 * 1280.0 << " px; pass-through " << (pass_through ? "yes" : "no")
           << ", idempotent " << (idempotent ? "yes" : "no");
  o.require(pass_through, "pass-through");
  o.require(idempotent, "idempotence");
  o.require(ae < fill, "beats mean fill");
  o.require(ae < 0.03 * 1280.0, "< 3% of width");
}

Eigen::Matrix4d homogeneous(const TransformSE3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = t.m[4 * r + c];
  }
  return m;
}

void transform_chaining(Outcome& o) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.4);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TransformSE3> steps;
    Eigen::Matrix4d oracle = Eigen::Matrix4d::Identity();
    for (int k = 0; k < 30; ++k) {
      steps.push_back(TransformSE3::from_axis_angle({n(rng), n(rng), n(rng)}, {3 * n(rng), 3 * n(rng), 3 * n(rng)}));
      oracle = oracle * homogeneous(steps.back());
    }
    worst = std::max(worst, (homogeneous(chain_transforms(steps)) - oracle).cwiseAbs().maxCoeff());
  }
  o.detail << "chain max deviation " << worst;
  o.require(worst <= 1e-9, "chain oracle 1e-9");

  LocomotionSequence truth;
  const std::size_t frames = 31;
  for (std::size_t t = 0; t < frames; ++t) {
    truth.frames.emplace_back();
    for (auto& k : truth.frames.back().joints) k = {100.0, 100.0, 1.0};
    truth.anchor_depth.push_back(10.0);
    truth.transforms.push_back(TransformSE3::identity());
  }
  NoiseConfig noise;
  noise.dropout = 0.0;
  noise.jitter_sigma = 0.0;
  noise.depth_sigma = 0.0;
  std::vector<double> sq(frames, 0.0), rot(frames, 0.0);
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    const auto noisy = annotate_noisy(truth, noise, static_cast<std::uint64_t>(s));
    for (std::size_t k = 1; k < frames; ++k) {
      const auto t = noisy.transforms[k].translation();
      sq[k] += (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]) / 3.0;
      const auto& m = noisy.transforms[k].m;
      const double wx = 0.5 * (m[9] - m[6]), wy = 0.5 * (m[2] - m[8]), wz = 0.5 * (m[4] - m[1]);
      rot[k] += (wx * wx + wy * wy + wz * wz) / 3.0;
    }
  }
  double worst_ratio = 0.0;
  for (std::size_t k = 1; k < frames; ++k) {
    const double root_k = std::sqrt(static_cast<double>(k));
    worst_ratio = std::max(worst_ratio, std::fabs(std::sqrt(sq[k] / seeds) / (noise.translation_jitter * root_k) - 1.0));
    worst_ratio = std::max(worst_ratio, std::fabs(std::sqrt(rot[k] / seeds) / (noise.rotation_jitter * root_k) - 1.0));
  }
  o.detail << "; drift worst relative deviation from sqrt(k) over k=1..30: " << worst_ratio;
  o.require(worst_ratio < 0.15, "sqrt(k) drift within 15%");
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "loco_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "loco");
    return run_cli(args, sink, sink);
  };
  const std::string data = (root / "data.jsonl").string();
  fs::create_directories(root);
  bool ok = run({"generate", "--out", data, "--count", "24", "--seed", "4"}) == 0;
  const std::vector<std::string> budget{"--seed", "4", "--completion_steps", "300", "--codec_steps", "200",
                                        "--epochs", "3"};
  // (bundle, command): the ablation bundle trains its own completion model first.
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"main", {"train-completion"}},      {"main", {"train-local"}},
      {"main", {"train-global"}},          {"main", {"train-entangled"}},
      {"ablation", {"train-completion"}},  {"ablation", {"train-local", "--raw"}},
      {"ablation", {"train-global", "--raw"}}, {"ablation", {"train-entangled", "--completed"}}};
  const std::vector<std::string> methods{"full", "decomposition_only", "global_only", "entangled",
                                         "zero_velocity", "constant_velocity", "last_observed_velocity"};
  std::size_t commands_run = 0;
  // Both passes write to the same paths, since reports echo them.
  const fs::path dir = root / "run";
  std::vector<std::map<std::string, std::string>> passes;
  for (int rep = 0; rep < 2; ++rep) {
    fs::remove_all(dir);
    for (const auto& [bundle, cmd] : commands) {
      auto args = cmd;
      args.insert(args.end(), {"--data", data, "--models", (dir / bundle).string()});
      args.insert(args.end(), budget.begin(), budget.end());
      ok = ok && run(args) == 0;
      ++commands_run;
    }
    for (const auto& m : methods) {
      ok = ok && run({"evaluate", "--data", data, "--models", (dir / "main").string(), "--method", m,
                      "--out", (dir / ("eval_" + m + ".json")).string(), "--text",
                      (dir / ("eval_" + m + ".txt")).string(), "--seed", "4"}) == 0;
      ++commands_run;
    }
    passes.push_back(dir_bytes(dir));
  }
  const auto& a = passes[0];
  const auto& b = passes[1];
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  o.detail << commands_run << " command runs, " << a.size() << " output files, " << differing << " differ";
  o.require(ok, "all commands exit 0");
  o.require(differing == 0 && a.size() == b.size() && !a.empty(), "bit-identical outputs");
  fs::remove_all(root);
}

// ---------------------------------------------------------------------------

void qrnn_limits(Outcome& o) {
  std::mt19937_64 rng(4);
  {
    QrnnLayerSpec spec{3, 4, 2, Pooling::kFo};
    ParameterSet p;
    init_qrnn_layer(p, "q", spec, rng);
    for (std::size_t k = 0; k < 4; ++k) p.value("q.b")[4 + k] = 40.0;
    const Tensor x = random_matrix(30, 3, rng, 0.5), c0 = random_matrix(1, 4, rng);
    const Tensor cell = qrnn_layer_forward(x, p, "q", spec, c0).second;
    double drift = 0.0;
    for (std::size_t k = 0; k < 4; ++k) drift = std::max(drift, std::fabs(cell[k] - c0[k]));
    o.detail << "saturated gate drift " << drift;
    o.require(drift <= 1e-8, "saturated forget gate");
  }
  {
    QrnnLayerSpec spec{3, 4, 2, Pooling::kF};
    ParameterSet p;
    init_qrnn_layer(p, "q", spec, rng);
    auto& W = p.value("q.W");
    for (std::size_t r = 0; r < W.rows(); ++r) {
      for (std::size_t k = 4; k < 8; ++k) W(r, k) = 0.0;
    }
    for (std::size_t k = 4; k < 8; ++k) p.value("q.b")[k] = -60.0;
    const Tensor x = random_matrix(12, 3, rng);
    const Tensor h = qrnn_layer_forward(x, p, "q", spec, random_matrix(1, 4, rng)).first;
    double worst = 0.0;
    for (std::size_t t = 0; t < 12; ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        double z = p.value("q.b")[k];
        for (std::size_t j = 0; j < 2; ++j) {
          if (t + j < 1) continue;
          for (std::size_t d = 0; d < 3; ++d) z += x(t + j - 1, d) * W(j * 3 + d, k);
        }
        worst = std::max(worst, std::fabs(h(t, k) - std::tanh(z)));
      }
    }
    o.detail << "; closed gate deviation from candidate " << worst;
    o.require(worst <= 1e-12, "memoryless candidate");
  }
  {
    std::size_t violations = 0, steps = 0;
    for (Pooling pooling : {Pooling::kFo, Pooling::kF}) {
      for (std::size_t kernel : {1u, 2u, 3u}) {
        QrnnLayerSpec spec{2, 3, kernel, pooling};
        ParameterSet p;
        init_qrnn_layer(p, "q", spec, rng);
        const std::size_t T = 10;
        const Tensor x = random_matrix(T, 2, rng), c0 = Tensor::matrix(1, 3);
        const Tensor base = qrnn_layer_forward(x, p, "q", spec, c0).first;
        for (std::size_t s = 0; s < T; ++s) {
          Tensor y = x;
          y(s, 0) += 1.0;
          y(s, 1) -= 0.7;
          const Tensor h = qrnn_layer_forward(y, p, "q", spec, c0).first;
          for (std::size_t t = 0; t < T; ++t) {
            double diff = 0.0;
            for (std::size_t k = 0; k < 3; ++k) diff = std::max(diff, std::fabs(h(t, k) - base(t, k)));
            if ((t < s && diff != 0.0) || (t == s && diff == 0.0)) ++violations;
          }
          ++steps;
        }
      }
    }
    o.detail << "; causality sweep " << steps << " perturbations, " << violations << " violations";
    o.require(violations == 0, "causality");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"exact inverse", exact_inverse},          {"gradients", gradients},
      {"kde oracle", kde_oracle},                {"baseline analytics", baseline_analytics},
      {"method orderings", orderings},           {"horizon trend", horizon_trend},
      {"completion", completion_suite},          {"transform chaining", transform_chaining},
      {"determinism", determinism},              {"qrnn limits", qrnn_limits},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(number)) continue;
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %-20s %s  %s\n", number, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
