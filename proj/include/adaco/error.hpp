#pragma once

#include <stdexcept>
#include <string>

namespace adaco {

enum class ErrorCode {
    io_failure,
    malformed_file,
    length_mismatch,
    label_out_of_range,
    invalid_argument,
    degenerate_input,
    fit_failed,
    empty_batch,
    undefined_metric,
    missing_input,
    unknown_class,
    diverged,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

}  // namespace adaco
