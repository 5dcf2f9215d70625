// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pathroute/tape.hpp"

namespace pathroute::nn {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// x: (n, in_ch, h, w); weight: (out_ch, in_ch, k, k); bias: (1, out_ch, 1, 1).
Var conv2d(Tape& tape, Var x, Var weight, Var bias, Conv2dOptions opts);

int conv_output_extent(int in, int k, Conv2dOptions opts);

/// Subgradient at exactly zero is zero.
Var relu(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);
Var tanh(Tape& tape, Var x);

Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, float s);

/// Sum of all elements as a (1,1,1,1) scalar, accumulated in double.
Var sum(Tape& tape, Var x);

/// Mean of squared differences, as a (1,1,1,1) scalar.
Var mse(Tape& tape, Var a, Var b);

/// x: (n, in, 1, 1); weight: (out, in, 1, 1); bias: (1, out, 1, 1).
Var linear(Tape& tape, Var x, Var weight, Var bias);

/// Per-channel spatial mean: (n, c, h, w) -> (n, c, 1, 1).
Var global_avg_pool(Tape& tape, Var x);

/// 2x2 mean with stride 2; odd trailing rows/columns are dropped.
Var avg_pool2(Tape& tape, Var x);

/// Softmax over the channel axis of (n, m, 1, 1), max-subtracted.
Var softmax(Tape& tape, Var logits);
Var log_softmax(Tape& tape, Var logits);

/// Channels [start, start + count) of x.
Var slice_channels(Tape& tape, Var x, int start, int count);

/// Single element x[n, c, 0, 0] as a scalar.
Var pick(Tape& tape, Var x, int n, int c);

struct LstmWeights {
  Var w_ih;  // (4H, in, 1, 1), gate order i, f, g, o
  Var w_hh;  // (4H, H, 1, 1)
  Var bias;  // (1, 4H, 1, 1)
};

struct LstmState {
  Var h;
  Var c;
};

/// One step of the gated recurrent cell:
///   c' = sigmoid(f) * c + sigmoid(i) * tanh(g),  h' = sigmoid(o) * tanh(c').
LstmState lstm_step(Tape& tape, Var x, LstmState state, const LstmWeights& weights);

}  // namespace pathroute::nn
