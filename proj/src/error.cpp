#include "hgmd/error.hpp"

namespace hgmd {

void throw_config(const std::string& what) { throw Error(ErrorKind::Config, what); }
void throw_numeric(const std::string& what) { throw Error(ErrorKind::Numeric, what); }
void throw_invalid(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }
void throw_io(const std::string& what) { throw Error(ErrorKind::Io, what); }

}  // namespace hgmd
