// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/diff/graph.hpp"
#include "fxda/io/binary.hpp"
#include "fxda/obs/superobs.hpp"

namespace fxda::net {

struct NetConfig {
  std::array<std::size_t, 3> widths{32, 64, 32};
  std::size_t channels = 10;     // background channels C
  std::size_t frames = 3;        // F
  std::size_t obs_channels = 3;  // K
  obs::Crop crop;
  /// Half-resolution cells evaluated around the crop by the last stage.
  std::size_t margin = 4;
  std::uint64_t seed = 7;

  void validate(const atm::GridSpec& grid) const;
  std::size_t obs_planes() const { return frames * (obs_channels + obs::kAuxPlanes); }
  std::size_t mixed_planes() const { return channels + obs_planes(); }
};

enum class NetKind { assimilator, corrector };
const char* kind_name(NetKind kind);
NetKind parse_kind(const std::string& name);

/// Per-channel standardization constants.
struct Normalization {
  std::vector<double> state_mean, state_std;  // C each
  std::vector<double> bt_mean, bt_std;        // K each
};

/// Named parameters of one network. Names are dotted paths whose first
/// component is the parameter group (bg, obs, mix, fuse1, fuse2, head,
/// norm).
class NetParams {
 public:
  NetParams(NetConfig config, NetKind kind, const atm::GridSpec& grid);

  NetParams(const NetParams& other);
  NetParams& operator=(const NetParams& other);
  NetParams(NetParams&&) noexcept = default;
  NetParams& operator=(NetParams&&) noexcept = default;

  const NetConfig& config() const { return config_; }
  NetKind kind() const { return kind_; }
  const atm::GridSpec& grid() const { return grid_; }

  diff::Parameter& at(const std::string& name);
  const diff::Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  diff::Var var(const std::string& name) const { return at(name).var(); }

  std::vector<diff::Parameter>& parameters() { return params_; }
  const std::vector<diff::Parameter>& parameters() const { return params_; }
  std::size_t trainable_count() const;
  std::vector<std::string> groups() const;
  static std::string group_of(const std::string& name);

  void zero_grad();
  void set_normalization(const Normalization& norm);
  Normalization normalization() const;

  io::Checkpoint to_checkpoint() const;
  /// Copies values by name; every parameter must be present with its shape.
  void load(const io::Checkpoint& checkpoint);

 private:
  void add(const std::string& name, diff::Tensor init, bool trainable = true);
  void add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                bool zero = false);
  void add_norm(const std::string& name, std::size_t channels);
  void add_down(const std::string& name, std::size_t in, std::size_t out);
  void add_up(const std::string& name, std::size_t in, std::size_t out);
  void add_fusion(const std::string& name, std::size_t bg, std::size_t ob, std::size_t mx);

  NetConfig config_;
  NetKind kind_;
  atm::GridSpec grid_;
  std::vector<diff::Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t init_counter_ = 0;
};

/// Standardized network inputs.
struct NetInputs {
  diff::Tensor background;  // [C, H', W'], H' = H rounded down to even
  diff::Tensor obs;         // [F*(K+7), h, w]
  diff::Tensor mixed;       // [C + F*(K+7), h, w]
};

NetInputs assemble_inputs(const NetParams& params, const atm::GridState& background,
                          const obs::SuperObsGrid& obs);
/// Background part only; obs and mixed are left empty.
NetInputs assemble_background(const NetParams& params, const atm::GridState& background);

/// Analysis = background + increment (increment nonzero on the crop only).
diff::Var forward_var(const NetParams& params, const atm::GridState& background,
                      const NetInputs& inputs);
atm::GridState forward(const NetParams& params, const atm::GridState& background,
                       const obs::SuperObsGrid& obs);
atm::GridState forward_corr(const NetParams& params, const atm::GridState& background);

/// Dispatches on the network kind; `obs` is ignored by a corrector.
diff::Var analysis_var(const NetParams& params, const atm::GridState& background,
                       const obs::SuperObsGrid* obs);
atm::GridState analyze(const NetParams& params, const atm::GridState& background,
                       const obs::SuperObsGrid* obs);

}  // namespace fxda::net
