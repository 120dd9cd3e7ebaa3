#include "gspose/error.hpp"

namespace gspose {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::StaleForwardState: return "StaleForwardState";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NoViews: return "NoViews";
    case ErrorCode::DivergedFit: return "DivergedFit";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoAnomalousPixels: return "NoAnomalousPixels";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace gspose
