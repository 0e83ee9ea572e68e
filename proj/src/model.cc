// Copyright 2026 The hierlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hierlabel/model.h"

#include <algorithm>
#include <cmath>

#include "hierlabel/error.h"

namespace hierlabel {
namespace {

struct Shape {
  std::size_t c, h, w;
  std::size_t plane() const { return h * w; }
  std::size_t size() const { return c * h * w; }
};

// Offsets of every parameter block inside the flat array.
struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0, end = 0;
};

Layout layout_of(const ModelSpec& s) {
  Layout l;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  switch (s.kind) {
    case ModelKind::kLinear:
      l.w1 = take(s.outputs * s.input_dim);
      l.b1 = take(s.outputs);
      break;
    case ModelKind::kMlp:
      l.w1 = take(s.hidden * s.input_dim);
      l.b1 = take(s.hidden);
      l.w2 = take(s.outputs * s.hidden);
      l.b2 = take(s.outputs);
      break;
    case ModelKind::kTinyCnn: {
      const std::size_t c1 = s.conv_channels.at(0), c2 = s.conv_channels.at(1);
      l.w1 = take(c1 * s.channels * 9);
      l.b1 = take(c1);
      l.w2 = take(c2 * c1 * 9);
      l.b2 = take(c2);
      l.w3 = take(s.outputs * c2);
      l.b3 = take(s.outputs);
      break;
    }
  }
  l.end = at;
  return l;
}

void affine(const double* w, const double* b, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// dW += dy x^T, db += dy, dx += W^T dy (dx may be null).
void affine_backward(const double* w, std::size_t rows, std::size_t cols,
                     const double* x, const double* dy, double* dw, double* db,
                     double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    db[r] += g;
    if (g == 0.0) continue;
    double* dwr = dw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dwr[c] += g * x[c];
    if (dx != nullptr) {
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dx[c] += g * wr[c];
    }
  }
}

struct Window {
  std::size_t lo, hi;
};

// Output range for which the input index out + d stays inside [0, n).
Window window(std::ptrdiff_t d, std::size_t n) {
  const std::size_t lo = d < 0 ? static_cast<std::size_t>(-d) : 0;
  const std::size_t hi = d > 0 ? n - static_cast<std::size_t>(d) : n;
  return {lo, hi};
}

// Same-padded 3x3 convolution.
void conv3x3(const double* in, Shape is, const double* k, const double* bias,
             std::size_t cout, double* out) {
  const std::size_t plane = is.plane();
  for (std::size_t o = 0; o < cout; ++o) {
    double* op = out + o * plane;
    std::fill(op, op + plane, bias[o]);
    for (std::size_t c = 0; c < is.c; ++c) {
      const double* ip = in + c * plane;
      for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
        const Window wy = window(ky - 1, is.h);
        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
          const Window wx = window(kx - 1, is.w);
          const double wgt = k[((o * is.c + c) * 3 + ky) * 3 + kx];
          for (std::size_t y = wy.lo; y < wy.hi; ++y) {
            const double* src = ip + (y + ky - 1) * is.w + (kx - 1);
            double* dst = op + y * is.w;
            for (std::size_t x = wx.lo; x < wx.hi; ++x) dst[x] += wgt * src[x];
          }
        }
      }
    }
  }
}

void conv3x3_backward(const double* in, Shape is, const double* k,
                      std::size_t cout, const double* dout, double* dk,
                      double* dbias, double* din) {
  const std::size_t plane = is.plane();
  for (std::size_t o = 0; o < cout; ++o) {
    const double* gp = dout + o * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += gp[i];
    dbias[o] += sum;
    for (std::size_t c = 0; c < is.c; ++c) {
      const double* ip = in + c * plane;
      double* dip = din != nullptr ? din + c * plane : nullptr;
      for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
        const Window wy = window(ky - 1, is.h);
        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
          const Window wx = window(kx - 1, is.w);
          const std::size_t ki = ((o * is.c + c) * 3 + ky) * 3 + kx;
          const double wgt = k[ki];
          double acc = 0.0;
          for (std::size_t y = wy.lo; y < wy.hi; ++y) {
            const double* src = ip + (y + ky - 1) * is.w + (kx - 1);
            const double* g = gp + y * is.w;
            for (std::size_t x = wx.lo; x < wx.hi; ++x) acc += g[x] * src[x];
            if (dip != nullptr) {
              double* dst = dip + (y + ky - 1) * is.w + (kx - 1);
              for (std::size_t x = wx.lo; x < wx.hi; ++x) dst[x] += wgt * g[x];
            }
          }
          dk[ki] += acc;
        }
      }
    }
  }
}

void relu(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// 2x2 max pooling, stride 2; ties keep the first cell in row-major order.
void maxpool(const std::vector<double>& in, Shape is, std::vector<double>& out,
             std::vector<std::uint32_t>& arg) {
  const std::size_t oh = is.h / 2, ow = is.w / 2;
  out.assign(is.c * oh * ow, 0.0);
  arg.assign(out.size(), 0);
  for (std::size_t c = 0; c < is.c; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = c * is.plane() + 2 * y * is.w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + is.w, base + is.w + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (in[cand[i]] > in[best]) best = cand[i];
        }
        const std::size_t o = (c * oh + y) * ow + x;
        out[o] = in[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear:
      return "linear";
    case ModelKind::kMlp:
      return "mlp";
    case ModelKind::kTinyCnn:
      return "tinycnn";
  }
  return "linear";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::kLinear;
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "tinycnn") return ModelKind::kTinyCnn;
  fail(ErrorKind::kInvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

std::size_t ModelSpec::parameter_count() const {
  switch (kind) {
    case ModelKind::kLinear:
      return (input_dim + 1) * outputs;
    case ModelKind::kMlp:
      return (input_dim + 1) * hidden + (hidden + 1) * outputs;
    case ModelKind::kTinyCnn: {
      const std::size_t c1 = conv_channels.at(0), c2 = conv_channels.at(1);
      return c1 * (9 * channels + 1) + c2 * (9 * c1 + 1) + (c2 + 1) * outputs;
    }
  }
  return 0;
}

std::size_t ModelSpec::input_size() const {
  return kind == ModelKind::kTinyCnn ? channels * height * width : input_dim;
}

void ModelSpec::validate() const {
  auto bad = [](const std::string& why) { fail(ErrorKind::kInvalidArgument, why); };
  if (outputs == 0) bad("model needs at least one output");
  switch (kind) {
    case ModelKind::kLinear:
      if (input_dim == 0) bad("model input_dim must be >= 1");
      break;
    case ModelKind::kMlp:
      if (input_dim == 0) bad("model input_dim must be >= 1");
      if (hidden == 0) bad("mlp hidden width must be >= 1");
      break;
    case ModelKind::kTinyCnn:
      if (channels == 0) bad("tinycnn needs at least one input channel");
      if (height < 4 || width < 4) bad("tinycnn input must be at least 4x4");
      if (conv_channels.size() != 2 || conv_channels[0] == 0 || conv_channels[1] == 0) {
        bad("tinycnn conv_channels must list two positive widths");
      }
      break;
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j = {{"kind", to_string(spec.kind)}, {"outputs", spec.outputs}};
  switch (spec.kind) {
    case ModelKind::kLinear:
      j["input_dim"] = spec.input_dim;
      break;
    case ModelKind::kMlp:
      j["input_dim"] = spec.input_dim;
      j["hidden"] = spec.hidden;
      break;
    case ModelKind::kTinyCnn:
      j["channels"] = spec.channels;
      j["height"] = spec.height;
      j["width"] = spec.width;
      j["conv_channels"] = spec.conv_channels;
      break;
  }
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.outputs = j.value("outputs", std::size_t{0});
    s.input_dim = j.value("input_dim", std::size_t{0});
    s.hidden = j.value("hidden", s.hidden);
    s.channels = j.value("channels", s.channels);
    s.height = j.value("height", std::size_t{0});
    s.width = j.value("width", std::size_t{0});
    s.conv_channels = j.value("conv_channels", s.conv_channels);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("model spec: ") + e.what());
  }
  return s;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  params_.assign(spec_.parameter_count(), 0.0);
}

Model::Model(ModelSpec spec, std::vector<double> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != spec_.parameter_count()) {
    fail(ErrorKind::kShapeMismatch,
         "parameter count " + std::to_string(params_.size()) + " does not match " +
             std::to_string(spec_.parameter_count()) + " for this model");
  }
}

void Model::init_glorot(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  const Layout l = layout_of(spec_);
  auto fill = [&](std::size_t at, std::size_t n, double limit) {
    for (std::size_t i = 0; i < n; ++i) params_[at + i] = rng.uniform(-limit, limit);
  };
  const ModelSpec& s = spec_;
  switch (s.kind) {
    case ModelKind::kLinear:
      fill(l.w1, s.outputs * s.input_dim, glorot_limit(s.input_dim, s.outputs));
      break;
    case ModelKind::kMlp:
      fill(l.w1, s.hidden * s.input_dim, glorot_limit(s.input_dim, s.hidden));
      fill(l.w2, s.outputs * s.hidden, glorot_limit(s.hidden, s.outputs));
      break;
    case ModelKind::kTinyCnn: {
      const std::size_t c1 = s.conv_channels[0], c2 = s.conv_channels[1];
      fill(l.w1, c1 * s.channels * 9, glorot_limit(9 * s.channels, 9 * c1));
      fill(l.w2, c2 * c1 * 9, glorot_limit(9 * c1, 9 * c2));
      fill(l.w3, s.outputs * c2, glorot_limit(c2, s.outputs));
      break;
    }
  }
}

std::vector<double> Model::forward(std::span<const double> input,
                                   ForwardCache* cache) const {
  const ModelSpec& s = spec_;
  if (input.size() != s.input_size()) {
    fail(ErrorKind::kShapeMismatch,
         "model input has " + std::to_string(input.size()) + " values, expected " +
             std::to_string(s.input_size()));
  }
  const Layout l = layout_of(s);
  const double* p = params_.data();
  std::vector<double> scores(s.outputs);
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.input.assign(input.begin(), input.end());

  switch (s.kind) {
    case ModelKind::kLinear:
      affine(p + l.w1, p + l.b1, s.outputs, s.input_dim, input.data(), scores.data());
      break;
    case ModelKind::kMlp:
      c.hidden.resize(s.hidden);
      affine(p + l.w1, p + l.b1, s.hidden, s.input_dim, input.data(), c.hidden.data());
      relu(c.hidden);
      affine(p + l.w2, p + l.b2, s.outputs, s.hidden, c.hidden.data(), scores.data());
      break;
    case ModelKind::kTinyCnn: {
      const std::size_t c1 = s.conv_channels[0], c2 = s.conv_channels[1];
      const Shape s0{s.channels, s.height, s.width};
      const Shape s1{c1, s.height, s.width};
      const Shape s2{c1, s.height / 2, s.width / 2};
      const Shape s3{c2, s2.h, s2.w};
      c.conv1.assign(s1.size(), 0.0);
      conv3x3(input.data(), s0, p + l.w1, p + l.b1, c1, c.conv1.data());
      relu(c.conv1);
      maxpool(c.conv1, s1, c.pool1, c.pool1_arg);
      c.conv2.assign(s3.size(), 0.0);
      conv3x3(c.pool1.data(), s2, p + l.w2, p + l.b2, c2, c.conv2.data());
      relu(c.conv2);
      maxpool(c.conv2, s3, c.pool2, c.pool2_arg);
      const std::size_t cells = (s3.h / 2) * (s3.w / 2);
      c.pooled.assign(c2, 0.0);
      for (std::size_t k = 0; k < c2; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < cells; ++i) sum += c.pool2[k * cells + i];
        c.pooled[k] = sum / static_cast<double>(cells);
      }
      affine(p + l.w3, p + l.b3, s.outputs, c2, c.pooled.data(), scores.data());
      break;
    }
  }
  return scores;
}

void Model::backward(const ForwardCache& c, std::span<const double> dscores,
                     std::span<double> dparams) const {
  const ModelSpec& s = spec_;
  if (dscores.size() != s.outputs || dparams.size() != params_.size()) {
    fail(ErrorKind::kShapeMismatch, "backward called with mismatched buffers");
  }
  const Layout l = layout_of(s);
  const double* p = params_.data();
  double* g = dparams.data();

  switch (s.kind) {
    case ModelKind::kLinear:
      affine_backward(p + l.w1, s.outputs, s.input_dim, c.input.data(), dscores.data(),
                      g + l.w1, g + l.b1, nullptr);
      break;
    case ModelKind::kMlp: {
      std::vector<double> dh(s.hidden, 0.0);
      affine_backward(p + l.w2, s.outputs, s.hidden, c.hidden.data(), dscores.data(),
                      g + l.w2, g + l.b2, dh.data());
      for (std::size_t i = 0; i < s.hidden; ++i) {
        if (c.hidden[i] <= 0.0) dh[i] = 0.0;
      }
      affine_backward(p + l.w1, s.hidden, s.input_dim, c.input.data(), dh.data(),
                      g + l.w1, g + l.b1, nullptr);
      break;
    }
    case ModelKind::kTinyCnn: {
      const std::size_t c1 = s.conv_channels[0], c2 = s.conv_channels[1];
      const Shape s0{s.channels, s.height, s.width};
      const Shape s2{c1, s.height / 2, s.width / 2};
      const std::size_t cells = (s2.h / 2) * (s2.w / 2);
      std::vector<double> dpooled(c2, 0.0);
      affine_backward(p + l.w3, s.outputs, c2, c.pooled.data(), dscores.data(),
                      g + l.w3, g + l.b3, dpooled.data());
      std::vector<double> dconv2(c.conv2.size(), 0.0);
      for (std::size_t i = 0; i < c.pool2_arg.size(); ++i) {
        dconv2[c.pool2_arg[i]] += dpooled[i / cells] / static_cast<double>(cells);
      }
      for (std::size_t i = 0; i < dconv2.size(); ++i) {
        if (c.conv2[i] <= 0.0) dconv2[i] = 0.0;
      }
      std::vector<double> dpool1(c.pool1.size(), 0.0);
      conv3x3_backward(c.pool1.data(), s2, p + l.w2, c2, dconv2.data(), g + l.w2,
                       g + l.b2, dpool1.data());
      std::vector<double> dconv1(c.conv1.size(), 0.0);
      for (std::size_t i = 0; i < c.pool1_arg.size(); ++i) {
        dconv1[c.pool1_arg[i]] += dpool1[i];
      }
      for (std::size_t i = 0; i < dconv1.size(); ++i) {
        if (c.conv1[i] <= 0.0) dconv1[i] = 0.0;
      }
      conv3x3_backward(c.input.data(), s0, p + l.w1, c1, dconv1.data(), g + l.w1,
                       g + l.b1, nullptr);
      break;
    }
  }
}

ConvActivation Model::last_conv(std::span<const double> input,
                                std::span<const double> dscores) const {
  const ModelSpec& s = spec_;
  if (s.kind != ModelKind::kTinyCnn) {
    fail(ErrorKind::kInvalidArgument,
         "activation maps need a tinycnn model, got " + to_string(s.kind));
  }
  if (dscores.size() != s.outputs) {
    fail(ErrorKind::kShapeMismatch, "score weights do not match the model outputs");
  }
  ForwardCache c;
  forward(input, &c);
  const Layout l = layout_of(s);
  const std::size_t c2 = s.conv_channels[1];
  ConvActivation out;
  out.channels = c2;
  out.height = s.height / 2;
  out.width = s.width / 2;
  const std::size_t cells = (out.height / 2) * (out.width / 2);
  std::vector<double> dpooled(c2, 0.0);
  for (std::size_t o = 0; o < s.outputs; ++o) {
    for (std::size_t k = 0; k < c2; ++k) {
      dpooled[k] += dscores[o] * params_[l.w3 + o * c2 + k];
    }
  }
  out.gradient.assign(c.conv2.size(), 0.0);
  for (std::size_t i = 0; i < c.pool2_arg.size(); ++i) {
    out.gradient[c.pool2_arg[i]] += dpooled[i / cells] / static_cast<double>(cells);
  }
  out.activation = std::move(c.conv2);
  return out;
}

}  // namespace hierlabel
