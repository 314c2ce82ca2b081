#pragma once

#include <stdexcept>
#include <string>

namespace int2int {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define INT2INT_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

INT2INT_DEFINE_ERROR(MalformedSequence);
INT2INT_DEFINE_ERROR(OutOfRange);
INT2INT_DEFINE_ERROR(UnknownToken);
INT2INT_DEFINE_ERROR(UnknownId);
INT2INT_DEFINE_ERROR(DegenerateInput);
INT2INT_DEFINE_ERROR(ConfigError);
INT2INT_DEFINE_ERROR(ParseError);
INT2INT_DEFINE_ERROR(FileError);
INT2INT_DEFINE_ERROR(IoError);
INT2INT_DEFINE_ERROR(MalformedLine);
INT2INT_DEFINE_ERROR(PositionOverflow);
INT2INT_DEFINE_ERROR(IntegrityError);
INT2INT_DEFINE_ERROR(VersionMismatch);
INT2INT_DEFINE_ERROR(InsufficientData);

#undef INT2INT_DEFINE_ERROR

}  // namespace int2int
