#pragma once

// Small hand-scored fixtures for the evaluation protocols.

#include "formant/eval.hpp"

namespace formant::testing {

struct EvalFixture {
  FormantTrack gold;
  FormantTrack pred;
  PhoneSegmentation segmentation;
};

// Three frames: a stop frame then a two-frame vowel; F3 unlabelled in the
// last frame.
//
// tracking, stop:   F1 31.25   F2 0        F3 31.25
// tracking, vowel:  F1 21.25   F2 36.875   F3 25 (one frame)
// tracking, all:    F1 73.75/3 F2 73.75/3  F3 28.125
// estimation (vowel [1,3), gold at frame 1): F1 11.25  F2 4.375  F3 37.5
// transitions: the only boundary (frame 1) is too close to the start.
inline EvalFixture three_frame_fixture() {
  EvalFixture f;
  f.gold = FormantTrack(3, 3);
  f.gold.values << 500, 1500, 2500, 520, 1480, 2600, 540, 1460, 0;
  f.gold.valid.setConstant(true);
  f.gold.valid(2, 2) = false;
  f.pred = FormantTrack(3, 3);
  f.pred.values << 531.25, 1500, 2468.75, 500, 1531.25, 2625, 562.5, 1437.5, 2500;
  f.pred.valid.setConstant(true);
  f.segmentation.intervals = {{0, 1, BroadClass::stop}, {1, 3, BroadClass::vowel}};
  return f;
}

// Ten frames: fricative [0,4), vowel [4,7), nasal [7,10). Prediction errors
// per frame are F1 100,10,20,...,90, F2 -5 everywhere, F3 +7 with F3
// unlabelled at frame 3.
//
// CV window (frames 1..6): F1 35  F2 5  F3 7 (five frames)
// VC window (frames 4..9): F1 65  F2 5  F3 7 (six frames)
inline EvalFixture ten_frame_fixture() {
  EvalFixture f;
  f.gold = FormantTrack(10, 3);
  f.pred = FormantTrack(10, 3);
  const double e1[10] = {100, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  for (int t = 0; t < 10; ++t) {
    f.gold.values.row(t) << 400 + 10 * t, 1400 - 10 * t, 2500;
    f.pred.values.row(t) << f.gold.values(t, 0) + e1[t], f.gold.values(t, 1) - 5, f.gold.values(t, 2) + 7;
  }
  f.gold.valid.setConstant(true);
  f.gold.valid(3, 2) = false;
  f.pred.valid.setConstant(true);
  f.segmentation.intervals = {{0, 4, BroadClass::fricative}, {4, 7, BroadClass::vowel}, {7, 10, BroadClass::nasal}};
  return f;
}

}  // namespace formant::testing
