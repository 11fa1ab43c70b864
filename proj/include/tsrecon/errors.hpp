#pragma once

#include <stdexcept>
#include <string>

namespace tsrecon {

// Error categories map 1:1 onto CLI exit codes (validation -> 2, infeasible -> 3).
enum class errc {
  parse,
  validation,
  infeasible,
  solver,
  io,
};

class error : public std::runtime_error {
public:
  error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void throw_parse(const std::string& msg) { throw error(errc::parse, msg); }
[[noreturn]] inline void throw_validation(const std::string& msg) { throw error(errc::validation, msg); }
[[noreturn]] inline void throw_infeasible(const std::string& msg) { throw error(errc::infeasible, msg); }
[[noreturn]] inline void throw_solver(const std::string& msg) { throw error(errc::solver, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw error(errc::io, msg); }

}  // namespace tsrecon
