#include "wordimp/errors.hpp"

namespace wordimp {

const char* to_string(WavErrc code) noexcept {
  switch (code) {
    case WavErrc::FileNotFound: return "file not found";
    case WavErrc::MalformedHeader: return "malformed header";
    case WavErrc::UnsupportedEncoding: return "unsupported encoding";
    case WavErrc::WriteFailed: return "write failed";
  }
  return "unknown";
}

}  // namespace wordimp
