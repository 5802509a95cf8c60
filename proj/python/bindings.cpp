#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "formant/baseline.hpp"
#include "formant/dsp.hpp"
#include "formant/eval.hpp"
#include "formant/inference.hpp"
#include "formant/model.hpp"
#include "formant/quantizer.hpp"
#include "formant/synth.hpp"

namespace py = pybind11;
using namespace formant;

namespace {

Waveform to_wave(const std::vector<double>& samples, int sample_rate) {
  Waveform w{samples, sample_rate};
  w.validate();
  return w;
}

py::tuple track_tuple(const FormantTrack& t) { return py::make_tuple(t.values, t.valid); }

using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

FormantTrack from_arrays(const Eigen::MatrixXd& values, const BoolArray& valid) {
  if (valid.ndim() != 2 || valid.shape(0) != values.rows() || valid.shape(1) != values.cols()) {
    throw std::invalid_argument("values and valid must have the same shape");
  }
  FormantTrack t;
  t.values = values;
  t.valid.resize(values.rows(), values.cols());
  const auto v = valid.unchecked<2>();
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) t.valid(i, j) = v(i, j);
  return t;
}

SpectrogramConfig spectrogram_config(int fft_size, int hop, int window_length, bool standardize) {
  SpectrogramConfig cfg;
  cfg.geometry = FrameGeometry{fft_size, hop, window_length};
  cfg.standardize = standardize;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_formant, m) {
  m.doc() = "Formant tracking core";

  m.def(
      "spectrogram",
      [](const std::vector<double>& samples, int sample_rate, int fft_size, int hop, int window_length,
         bool standardize) {
        return front_end(to_wave(samples, sample_rate), spectrogram_config(fft_size, hop, window_length, standardize))
            .values;
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("fft_size") = 512, py::arg("hop") = 160,
      py::arg("window_length") = 512, py::arg("standardize") = true,
      "Log-magnitude spectrogram (bins x frames) after pre-emphasis.");

  m.def(
      "quantize", [](double hz, double bin_width, int num_bins) {
        return quantize(hz, BinSpec{bin_width, num_bins, (num_bins - 1) * bin_width});
      },
      py::arg("hz"), py::arg("bin_width") = 31.25, py::arg("num_bins") = 257);
  m.def(
      "dequantize", [](int bin, double bin_width, int num_bins) {
        return dequantize(bin, BinSpec{bin_width, num_bins, (num_bins - 1) * bin_width});
      },
      py::arg("bin"), py::arg("bin_width") = 31.25, py::arg("num_bins") = 257);

  m.def(
      "synthesize",
      [](double f0, std::vector<double> formants, std::vector<double> bandwidths, double duration, int sample_rate) {
        SyntheticSpec spec;
        spec.f0 = f0;
        spec.formants = std::move(formants);
        spec.bandwidths = std::move(bandwidths);
        spec.duration = duration;
        auto [w, track] = synthesize(spec, sample_rate);
        return py::make_tuple(w.samples, track.values, track.valid);
      },
      py::arg("f0") = 120.0, py::arg("formants") = std::vector<double>{500.0, 1500.0, 2500.0},
      py::arg("bandwidths") = std::vector<double>{50.0, 70.0, 90.0}, py::arg("duration") = 0.5,
      py::arg("sample_rate") = 16000, "Synthetic vowel: (samples, formant values T x K, valid T x K).");

  m.def(
      "lpc_track",
      [](const std::vector<double>& samples, int sample_rate, int order) {
        LpcTrackConfig cfg;
        cfg.order = order;
        return track_tuple(lpc_track(to_wave(samples, sample_rate), FrameGeometry{}, cfg));
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("order") = LpcTrackConfig{}.order,
      "LPC formant estimates per frame: (values T x 3, valid T x 3).");

  py::class_<FormantModel>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& path) { return load_model(path); }, py::arg("path"))
      .def_static(
          "random", [](std::uint64_t seed) { return FormantModel(ModelConfig{}, seed); }, py::arg("seed") = 0)
      .def("save", [](const FormantModel& model, const std::filesystem::path& path) { save_model(path, model); })
      .def_property_readonly("num_bins", [](const FormantModel& model) { return model.config().bins.num_bins; })
      .def_property_readonly("parameter_count", &FormantModel::parameter_count)
      .def(
          "track",
          [](const FormantModel& model, const std::vector<double>& samples, int sample_rate) {
            SpectrogramConfig cfg;
            const auto s = front_end(to_wave(samples, sample_rate), cfg);
            if (s.num_bins() != model.config().bins.num_bins) {
              throw std::invalid_argument("model bins do not match the default front end");
            }
            auto r = track(s, model, model.config().bins);
            return py::make_tuple(r.track.values, r.track.valid, aggregate_heatmaps(r.heatmaps));
          },
          py::arg("samples"), py::arg("sample_rate") = 16000,
          "Greedy tracking: (values T x 3, valid T x 3, aggregated heatmap bins x T).");

  m.def(
      "tracking_mae",
      [](const Eigen::MatrixXd& pred, const BoolArray& pred_valid, const Eigen::MatrixXd& gold,
         const BoolArray& gold_valid) {
        const auto r = tracking_mae(from_arrays(pred, pred_valid), from_arrays(gold, gold_valid), std::nullopt);
        std::vector<std::optional<double>> out;
        for (int k = 0; k < static_cast<int>(gold.cols()); ++k) out.push_back(r.overall.mae(k));
        return out;
      },
      py::arg("pred"), py::arg("pred_valid"), py::arg("gold"), py::arg("gold_valid"),
      "Per-formant frame MAE in Hz over frames valid in both tracks; None where nothing was scored.");
}
