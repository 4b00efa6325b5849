#pragma once

// Architecture configurations for the equivariant surrogate (GATr path) and
// the scalar-transformer negative control (VaTr path).

#include <stdexcept>

namespace vwss::net {

struct GatrConfig {
  int blocks = 10;       // total blocks; the first is the cross-attention tokeniser
  int heads = 4;         // attention heads (channels split across heads)
  int channels = 8;      // hidden multivector channels
  double rate = 0.1;     // tokenisation rate (coarse/fine point ratio)
  int k = 3;             // interpolation neighbours
  double eps = 1e-8;     // interpolation weight regulariser
  int timepoints = 21;   // output channels, one per WSS sample time
  double dropout = 0.2;  // channel dropout inside the geometric nonlinear layers

  void validate() const {
    if (blocks < 1) throw std::invalid_argument("config: blocks must be >= 1");
    if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
    if (channels < 1) throw std::invalid_argument("config: channels must be >= 1");
    if (channels % heads != 0)
      throw std::invalid_argument("config: channels must be divisible by heads");
    if (!(rate > 0.0) || rate > 1.0) throw std::invalid_argument("config: rate must be in (0, 1]");
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("config: eps must be > 0");
    if (timepoints < 1) throw std::invalid_argument("config: timepoints must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("config: dropout must be in [0, 1)");
  }
};

struct VatrConfig {
  int blocks = 12;
  int heads = 4;
  int hidden = 128;
  double rate = 0.1;
  int k = 3;
  double eps = 1e-8;
  int timepoints = 21;
  double dropout = 0.3;

  void validate() const {
    if (blocks < 1) throw std::invalid_argument("config: blocks must be >= 1");
    if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
    if (hidden < 1) throw std::invalid_argument("config: hidden must be >= 1");
    if (hidden % heads != 0)
      throw std::invalid_argument("config: hidden must be divisible by heads");
    if (!(rate > 0.0) || rate > 1.0) throw std::invalid_argument("config: rate must be in (0, 1]");
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("config: eps must be > 0");
    if (timepoints < 1) throw std::invalid_argument("config: timepoints must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("config: dropout must be in [0, 1)");
  }
};

} // namespace vwss::net
