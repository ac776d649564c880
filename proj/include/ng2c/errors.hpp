#ifndef NG2C_ERRORS_HPP
#define NG2C_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ng2c {

enum class Errc {
  config,
  slot_bounds,
  invalid_reference,
  invalid_handle,
  unknown_generation,
  too_large,
  out_of_memory,
  double_free,
  insufficient_data,
  incompatible_reports,
  workload_spec,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::config: return "configuration error";
    case Errc::slot_bounds: return "slot out of bounds";
    case Errc::invalid_reference: return "invalid reference";
    case Errc::invalid_handle: return "invalid root handle";
    case Errc::unknown_generation: return "unknown generation";
    case Errc::too_large: return "object too large";
    case Errc::out_of_memory: return "out of memory";
    case Errc::double_free: return "double free";
    case Errc::insufficient_data: return "insufficient data";
    case Errc::incompatible_reports: return "incompatible reports";
    case Errc::workload_spec: return "invalid workload spec";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ng2c

#endif  // NG2C_ERRORS_HPP
