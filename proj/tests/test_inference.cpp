#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "formant/inference.hpp"
#include "support.hpp"

using namespace formant;

namespace {

Spectrogram random_spectrogram(int bins, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Spectrogram s;
  s.values.resize(bins, frames);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = n(rng);
  return s;
}

FormantModel random_model(int bins, std::uint64_t seed) {
  FormantModel m(ModelConfig::for_bins(bins), seed);
  for (auto* p : m.parameters()) p->value.setRandom();
  return m;
}

}  // namespace

TEST_CASE("argmax prefers the lowest index on ties") {
  Eigen::VectorXd c(5);
  c << 0.1, 0.3, 0.3, 0.2, 0.3;
  CHECK(argmax_in_range(c, 0, 4) == 1);
  CHECK(argmax_in_range(c, 2, 4) == 2);
  CHECK(argmax_in_range(c, 3, 3) == 3);
  CHECK(argmax_in_range(c, 4, 3) == -1);
}

TEST_CASE("track follows encode, mask and decode head by head") {
  const auto model = random_model(33, 7);
  const auto bins = model.config().bins;
  const auto s = random_spectrogram(33, 6, 8);
  const auto r = track(s, model, bins);

  const Eigen::MatrixXd z = encode(model, s);
  std::vector<int> lower(6, -1);
  for (int k = 0; k < 3; ++k) {
    const Eigen::MatrixXd h = decode_head(model, k, mask_lower(z, lower), lower);
    CHECK((h - r.heatmaps.maps[k]).cwiseAbs().maxCoeff() < 1e-6);
    for (int t = 0; t < 6; ++t) {
      const int b = argmax_in_range(h.col(t), 0, 32);
      CHECK(b > lower[t]);
      CHECK(r.track.values(t, k) == dequantize(b, bins));
      lower[t] = b;
    }
  }
}

TEST_CASE("batched and single tracking agree and are repeatable") {
  const auto model = random_model(17, 3);
  const auto bins = model.config().bins;
  std::vector<Spectrogram> specs{random_spectrogram(17, 1, 1), random_spectrogram(17, 5, 2),
                                 random_spectrogram(17, 3, 3)};
  const auto batch = track_batch(specs, model, bins);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto single = track(specs[i], model, bins);
    CHECK(single.track == batch[i].track);
    CHECK(single.track == track(specs[i], model, bins).track);
    CHECK(single.track.num_frames() == specs[i].num_frames());
    for (int k = 0; k < 3; ++k) CHECK(single.heatmaps.maps[k] == track(specs[i], model, bins).heatmaps.maps[k]);
  }
}

TEST_CASE("predicted values are bin centers and strictly increasing") {
  const auto model = random_model(257, 4);
  const auto r = track(random_spectrogram(257, 5, 9), model, model.config().bins);
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 3; ++k) {
      CHECK(std::fmod(r.track.values(t, k), 31.25) == 0.0);
      CHECK(r.track.valid(t, k));
    }
    CHECK(r.track.values(t, 0) < r.track.values(t, 1));
    CHECK(r.track.values(t, 1) < r.track.values(t, 2));
  }
  CHECK_THROWS(track(random_spectrogram(17, 5, 9), model, model.config().bins));
}

TEST_CASE("heatmap aggregation") {
  HeatmapSet same{{Eigen::MatrixXd::Random(4, 3), Eigen::MatrixXd()}};
  same.maps[1] = same.maps[0];
  CHECK(aggregate_heatmaps(same) == same.maps[0]);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 2), b = Eigen::MatrixXd::Zero(4, 2);
  a(0, 0) = 1.0;
  b(3, 1) = 0.5;
  auto u = aggregate_heatmaps(HeatmapSet{{a, b}});
  CHECK(u(0, 0) == 1.0);
  CHECK(u(3, 1) == 0.5);
  CHECK(u.sum() == 1.5);

  HeatmapSet rnd{{Eigen::MatrixXd::Random(5, 4), Eigen::MatrixXd::Random(5, 4), Eigen::MatrixXd::Random(5, 4)}};
  auto m = aggregate_heatmaps(rnd);
  for (int d = 0; d < 5; ++d)
    for (int t = 0; t < 4; ++t)
      CHECK(m(d, t) == std::max({rnd.maps[0](d, t), rnd.maps[1](d, t), rnd.maps[2](d, t)}));
}

TEST_CASE("track csv roundtrip") {
  formant::testing::TempDir dir("inference");
  FormantTrack tr(3, 3);
  tr.values << 500, 1500, 2500, 531.25, 1562.5, 2531.25, 0, 0, 0;
  tr.valid.row(0).setConstant(true);
  tr.valid.row(1).setConstant(true);
  write_track_csv(dir / "t.csv", tr, FrameGeometry{}, 16000);
  std::ifstream in(dir / "t.csv");
  std::string header, row1;
  std::getline(in, header);
  std::getline(in, row1);
  CHECK(header == "frame,time_sec,f1_hz,f2_hz,f3_hz,valid");
  std::getline(in, row1);
  CHECK(row1 == "1,0.01,531.25,1562.5,2531.25,1");
  CHECK(read_track_csv(dir / "t.csv") == tr);

  write_heatmap_csv(dir / "h.csv", Eigen::MatrixXd::Constant(3, 2, 0.5), BinSpec{});
  std::ifstream h(dir / "h.csv");
  std::getline(h, header);
  CHECK(header == "bin,hz,frame_0,frame_1");
}
