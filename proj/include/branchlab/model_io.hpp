#pragma once

#include <string>
#include <variant>

#include "branchlab/model.hpp"

namespace branchlab {

using AnyModel = std::variant<BmpModel, SpModel>;

/// Loads and validates a model configuration file (JSON; see README for the
/// schema).  Throws ParseError with field context, or propagates validation
/// errors from validate_bmp / validate_sp.
AnyModel load_model(const std::string& path);

AnyModel parse_model(const std::string& text, const std::string& origin = "<string>");

std::string serialize_model(const BmpModel& model);
std::string serialize_model(const SpModel& model);
std::string serialize_model(const AnyModel& model);

void save_model(const AnyModel& model, const std::string& path);

inline bool is_bmp(const AnyModel& m) { return std::holds_alternative<BmpModel>(m); }
inline const BmpModel& as_bmp(const AnyModel& m) { return std::get<BmpModel>(m); }
inline const SpModel& as_sp(const AnyModel& m) { return std::get<SpModel>(m); }

inline int model_dim(const AnyModel& m) {
  return is_bmp(m) ? as_bmp(m).d : as_sp(m).d;
}
inline const std::string& model_name(const AnyModel& m) {
  return is_bmp(m) ? as_bmp(m).name : as_sp(m).name;
}

}  // namespace branchlab
