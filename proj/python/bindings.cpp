#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "sonar/audio/audio.hpp"
#include "sonar/features/features.hpp"
#include "sonar/metrics/metrics.hpp"
#include "sonar/nn/checkpoint.hpp"
#include "sonar/nn/models.hpp"
#include "sonar/synth/synth.hpp"
#include "sonar/train/train.hpp"

namespace py = pybind11;
using namespace sonar;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int64_t, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DoubleArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  py::array_t<double> out(py::ssize_t(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

// (N,1,F,T) float batch from a 3-D or 4-D numpy array.
nn::Tensor<float> batch_from_array(const FloatArray& a) {
  py::ssize_t n, f, t;
  if (a.ndim() == 4) {
    if (a.shape(1) != 1)
      throw py::value_error("expected channel dimension 1 in a 4-D batch");
    n = a.shape(0), f = a.shape(2), t = a.shape(3);
  } else if (a.ndim() == 3) {
    n = a.shape(0), f = a.shape(1), t = a.shape(2);
  } else {
    throw py::value_error("expected (N,F,T) or (N,1,F,T) input");
  }
  auto out = nn::Tensor<float>::zeros(
      {size_t(n), 1, size_t(f), size_t(t)});
  std::memcpy(out.data()->v.data(), a.data(), size_t(a.size()) * sizeof(float));
  return out;
}

py::array_t<float> array_from_tensor(const nn::Tensor<float>& t) {
  std::vector<py::ssize_t> dims;
  for (size_t d : t.shape()) dims.push_back(py::ssize_t(d));
  py::array_t<float> out(dims);
  std::memcpy(out.mutable_data(), t.data()->v.data(),
              t.numel() * sizeof(float));
  return out;
}

metrics::ConfusionMatrix cm_from_array(const IntArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1))
    throw py::value_error("confusion matrix must be square");
  metrics::ConfusionMatrix cm;
  cm.num_classes = size_t(a.shape(0));
  cm.counts.assign(a.data(), a.data() + a.size());
  return cm;
}

std::vector<int> labels_from_array(const IntArray& a) {
  if (a.ndim() != 1) throw py::value_error("labels must be 1-D");
  std::vector<int> out(size_t(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) out[size_t(i)] = int(a.data()[i]);
  return out;
}

// Eval-mode model handle for python callers.
struct PyModel {
  nn::Model<float> model;
  features::FeatureKind feature_kind = features::FeatureKind::STFT;
  features::FeatureStats stats;
  bool has_stats = false;

  py::array_t<float> logits(const FloatArray& batch) {
    auto x = batch_from_array(batch);
    auto emb = nn::embed(model, x);
    auto out = nn::linear(emb, model.param("classifier.weight"),
                          model.param("classifier.bias"));
    return array_from_tensor(out);
  }

  py::array_t<float> embed(const FloatArray& batch) {
    auto x = batch_from_array(batch);
    return array_from_tensor(nn::embed(model, x));
  }

  py::array_t<int64_t> predict(const FloatArray& batch) {
    auto lg = logits(batch);
    auto r = lg.unchecked<2>();
    py::array_t<int64_t> out(r.shape(0));
    auto* o = out.mutable_data();
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
      py::ssize_t best = 0;
      for (py::ssize_t j = 1; j < r.shape(1); ++j)
        if (r(i, j) > r(i, best)) best = j;
      o[i] = best;
    }
    return out;
  }

  void save(const std::string& path) const {
    auto ckpt = nn::model_to_checkpoint(model, nullptr,
                                        has_stats ? &stats : nullptr,
                                        feature_kind);
    nn::save_checkpoint(path, ckpt);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "passive-sonar vessel classification toolkit";

  m.attr("TARGET_RATE") = audio::kTargetRate;
  m.attr("SEGMENT_SAMPLES") = py::int_(audio::kSegmentSamples);
  m.attr("NUM_CLASSES") = audio::kNumClasses;
  py::list class_names;
  for (const auto& n : audio::kClassNames) class_names.append(n);
  m.attr("CLASS_NAMES") = class_names;
  py::list feature_kinds;
  for (int k = 0; k < 6; ++k)
    feature_kinds.append(features::kind_name(features::FeatureKind(k)));
  m.attr("FEATURE_KINDS") = feature_kinds;

  // ---- audio ----
  m.def("decode_wav", [](const std::string& path) {
    auto sig = audio::decode_wav(path);
    return py::make_tuple(from_vector(sig.samples), sig.sample_rate);
  }, py::arg("path"), "Decode a WAV file to (samples, sample_rate).");

  m.def("write_wav_float32", [](const std::string& path, const DoubleArray& x,
                                int sample_rate) {
    audio::write_wav_float32(path, to_vector(x), sample_rate);
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  m.def("resample", [](const DoubleArray& x, int from_rate, int to_rate) {
    return from_vector(audio::resample(to_vector(x), from_rate, to_rate));
  }, py::arg("samples"), py::arg("from_rate"), py::arg("to_rate"),
     "Band-limited rational resampling.");

  // ---- features ----
  m.def("feature_shape", [](const std::string& kind) {
    features::FeatureConfig cfg;
    auto [f, t] = features::padded_shape(features::kind_from_name(kind), cfg);
    return py::make_tuple(f, t);
  }, py::arg("kind"));

  m.def("extract_feature", [](const DoubleArray& samples,
                              const std::string& kind, int label) {
    audio::Segment seg;
    seg.record_id = "py";
    seg.samples = to_vector(samples);
    seg.label = label;
    auto f = features::extract_feature(
        seg, features::kind_from_name(kind), features::FeatureConfig{});
    py::array_t<float> out({py::ssize_t(f.freq_bins),
                            py::ssize_t(f.time_frames)});
    std::memcpy(out.mutable_data(), f.data.data(),
                f.data.size() * sizeof(float));
    return out;
  }, py::arg("samples"), py::arg("kind"), py::arg("label") = 0,
     "Extract one padded time-frequency feature from a 3 s segment.");

  // ---- histogram layer ----
  m.def("histogram_forward", [](const FloatArray& x, const FloatArray& centers,
                                const FloatArray& widths, int window_s,
                                int window_t, int stride_s, int stride_t) {
    if (x.ndim() != 4) throw py::value_error("x must be (N,D,H,W)");
    if (centers.ndim() != 2 || widths.ndim() != 2)
      throw py::value_error("centers and widths must be (bins, channels)");
    nn::HistogramLayer<float> layer;
    layer.bins = size_t(centers.shape(0));
    layer.channels = size_t(centers.shape(1));
    layer.window_s = size_t(window_s);
    layer.window_t = size_t(window_t);
    layer.stride_s = size_t(stride_s);
    layer.stride_t = size_t(stride_t);
    layer.centers = nn::Tensor<float>::zeros({layer.bins, layer.channels});
    layer.widths = nn::Tensor<float>::zeros({layer.bins, layer.channels});
    std::memcpy(layer.centers.data()->v.data(), centers.data(),
                size_t(centers.size()) * sizeof(float));
    std::memcpy(layer.widths.data()->v.data(), widths.data(),
                size_t(widths.size()) * sizeof(float));
    auto xt = nn::Tensor<float>::zeros(
        {size_t(x.shape(0)), size_t(x.shape(1)), size_t(x.shape(2)),
         size_t(x.shape(3))});
    std::memcpy(xt.data()->v.data(), x.data(),
                size_t(x.size()) * sizeof(float));
    return array_from_tensor(nn::hist_forward_direct(xt, layer));
  }, py::arg("x"), py::arg("centers"), py::arg("widths"),
     py::arg("window_s") = 0, py::arg("window_t") = 0, py::arg("stride_s") = 0,
     py::arg("stride_t") = 0,
     "Soft-binning histogram features; window 0 means one global window.");

  // ---- models ----
  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", [](const PyModel& pm) {
        return std::string(nn::model_name(pm.model.kind));
      })
      .def_property_readonly("feature", [](const PyModel& pm) {
        return std::string(features::kind_name(pm.feature_kind));
      })
      .def_property_readonly("embed_width", [](const PyModel& pm) {
        return pm.model.embed_width();
      })
      .def_property_readonly("parameter_count", [](const PyModel& pm) {
        return nn::parameter_count(pm.model);
      })
      .def("logits", &PyModel::logits, py::arg("batch"))
      .def("embed", &PyModel::embed, py::arg("batch"))
      .def("predict", &PyModel::predict, py::arg("batch"))
      .def("save", &PyModel::save, py::arg("path"));

  m.def("build_model", [](const std::string& kind, int bins, uint32_t seed,
                          size_t input_freq, size_t input_time) {
    nn::ModelConfig cfg;
    cfg.bins = size_t(bins);
    cfg.input_freq = input_freq;
    cfg.input_time = input_time;
    Rng rng(seed);
    PyModel pm;
    pm.model = nn::build_model<float>(nn::model_from_name(kind), cfg, rng);
    return pm;
  }, py::arg("kind"), py::arg("bins") = 16, py::arg("seed") = 0,
     py::arg("input_freq") = 48, py::arg("input_time") = 48);

  m.def("load_checkpoint", [](const std::string& path) {
    auto loaded = nn::checkpoint_to_model(nn::load_checkpoint(path));
    PyModel pm;
    pm.model = std::move(loaded.model);
    pm.feature_kind = loaded.feature_kind;
    pm.stats = loaded.stats;
    pm.has_stats = loaded.has_stats;
    return pm;
  }, py::arg("path"));

  // ---- metrics ----
  m.def("confusion", [](const IntArray& preds, const IntArray& labels,
                        size_t num_classes) {
    auto cm = metrics::confusion(labels_from_array(preds),
                                 labels_from_array(labels), num_classes);
    py::array_t<int64_t> out({py::ssize_t(num_classes),
                              py::ssize_t(num_classes)});
    std::memcpy(out.mutable_data(), cm.counts.data(),
                cm.counts.size() * sizeof(int64_t));
    return out;
  }, py::arg("preds"), py::arg("labels"), py::arg("num_classes"));

  m.def("classification_metrics", [](const IntArray& cm_array) {
    auto mm = metrics::classification_metrics(cm_from_array(cm_array));
    py::dict d;
    d["accuracy"] = mm.accuracy;
    d["precision"] = mm.precision;
    d["recall"] = mm.recall;
    d["f1"] = mm.f1;
    d["per_class_precision"] = mm.per_class_precision;
    d["per_class_recall"] = mm.per_class_recall;
    d["per_class_f1"] = mm.per_class_f1;
    return d;
  }, py::arg("confusion"));

  m.def("mcc", [](const IntArray& cm_array) {
    return metrics::mcc(cm_from_array(cm_array));
  }, py::arg("confusion"));

  m.def("fdr", [](const FloatArray& embeddings, const IntArray& labels,
                  size_t num_classes) {
    if (embeddings.ndim() != 2)
      throw py::value_error("embeddings must be (N, d)");
    std::vector<float> flat(embeddings.data(),
                            embeddings.data() + embeddings.size());
    auto rep = metrics::fdr(flat, size_t(embeddings.shape(1)),
                            labels_from_array(labels), num_classes);
    py::dict d;
    d["per_class_log"] = rep.per_class_log;
    d["overall_log"] = rep.overall_log;
    return d;
  }, py::arg("embeddings"), py::arg("labels"), py::arg("num_classes"));

  // ---- synthetic corpus ----
  m.def("generate_corpus", [](const std::string& out_dir,
                              int n_signals_per_class, double duration_s,
                              uint32_t seed) {
    synth::SynthSpec spec;
    spec.n_signals_per_class = n_signals_per_class;
    spec.signal_duration_s = duration_s;
    spec.seed = seed;
    return synth::generate(spec, out_dir).entries.size();
  }, py::arg("out_dir"), py::arg("n_signals_per_class") = 40,
     py::arg("duration_s") = 30.0, py::arg("seed") = 1234);

  m.def("sanity_probe", [](const std::string& corpus_dir) {
    auto manifest =
        audio::read_manifest(corpus_dir + "/manifest.csv");
    audio::resolve_paths(manifest, corpus_dir);
    auto rep = synth::sanity_probe(manifest);
    py::dict d;
    d["max_band_gap_db"] = rep.max_band_gap_db;
    d["kurtosis_gap"] = rep.kurtosis_gap;
    d["group_accuracy"] = rep.group_accuracy;
    d["centroid_cd_accuracy"] = rep.centroid_cd_accuracy;
    d["kurtosis_cd_accuracy"] = rep.kurtosis_cd_accuracy;
    d["pass"] = rep.pass();
    return d;
  }, py::arg("corpus_dir"));
}
