#pragma once

#include <string>

#include "gnas/errors.hpp"

namespace gnas {

// Layer vocabulary of the block-wise space. EoB terminates a block.
enum class LayerKind { GCNII, GATII, SAGEIIMean, SAGEIIMax, AGNNII, EoB };

// `Identity` and `None` are distinct codes with the same function.
enum class Activation { ReLU, ELU, PReLU, Tanh, Identity, None };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::GCNII: return "GCNII";
    case LayerKind::GATII: return "GATII";
    case LayerKind::SAGEIIMean: return "SAGEII-Mean";
    case LayerKind::SAGEIIMax: return "SAGEII-Max";
    case LayerKind::AGNNII: return "AGNNII";
    case LayerKind::EoB: return "EoB";
  }
  throw Error("unknown LayerKind");
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::ELU: return "elu";
    case Activation::PReLU: return "prelu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::None: return "none";
  }
  throw Error("unknown Activation");
}

inline LayerKind layer_kind_from(const std::string& s) {
  if (s == "GCNII") return LayerKind::GCNII;
  if (s == "GATII") return LayerKind::GATII;
  if (s == "SAGEII-Mean") return LayerKind::SAGEIIMean;
  if (s == "SAGEII-Max") return LayerKind::SAGEIIMax;
  if (s == "AGNNII") return LayerKind::AGNNII;
  if (s == "EoB") return LayerKind::EoB;
  throw ParseError("unknown layer kind: " + s);
}

inline Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "elu") return Activation::ELU;
  if (s == "prelu") return Activation::PReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  if (s == "none") return Activation::None;
  throw ParseError("unknown activation: " + s);
}

}  // namespace gnas
